#include "chronos/diagnostics.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>

namespace chronos {

namespace {
constexpr const char* kModule = "diagnostics";

// Streams that must not be deleted by the logger.
struct NoDelete {
  void operator()(std::ostream*) const {}
};
}  // namespace

std::string to_string(const ErrCode& err) {
  if (err.ok()) return "success";
  std::string out = "error " + std::to_string(err.code);
  if (!err.module.empty() || !err.function.empty()) {
    out += " in " + err.module + "::" + err.function;
  }
  if (!err.message.empty()) out += ": " + err.message;
  return out;
}

Error::Error(ErrCode err) : std::runtime_error(to_string(err)), err_(std::move(err)) {}

Error::Error(int code, std::string message, std::string function, std::string module)
    : Error(ErrCode{code, std::move(message), std::move(function), std::move(module)}) {}

void raise(int code, std::string message, const char* function, const char* module) {
  throw Error(code, std::move(message), function, module);
}

// ---------------------------------------------------------------------------

std::string_view level_name(LogLevel level) {
  switch (level) {
    case LogLevel::kError:
      return "ERROR";
    case LogLevel::kWarning:
      return "WARNING";
    case LogLevel::kInfo:
      return "INFO";
    case LogLevel::kDebug:
      return "DEBUG";
    case LogLevel::kNone:
      break;
  }
  return "NONE";
}

bool parse_level(std::string_view text, LogLevel& out) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  static const std::map<std::string, LogLevel> kNames = {
      {"none", LogLevel::kNone},    {"0", LogLevel::kNone},    {"error", LogLevel::kError},
      {"1", LogLevel::kError},      {"warning", LogLevel::kWarning}, {"warn", LogLevel::kWarning},
      {"2", LogLevel::kWarning},    {"info", LogLevel::kInfo}, {"3", LogLevel::kInfo},
      {"debug", LogLevel::kDebug},  {"4", LogLevel::kDebug},
  };
  auto it = kNames.find(lower);
  if (it == kNames.end()) return false;
  out = it->second;
  return true;
}

std::string format_scalar(double value) {
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.15g", value);
  return buf.data();
}

std::string format_vector_entry(double value) {
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), " %.15e", value);
  return buf.data();
}

std::string render(const LogRecord& record, int rank) {
  std::string line;
  line.reserve(128);
  line += '[';
  line += level_name(record.level);
  line += "][rank ";
  line += std::to_string(rank);
  line += "][";
  line += record.scope;
  line += "][";
  line += record.label;
  line += ']';

  bool first = true;
  for (const auto& field : record.payload) {
    line += first ? " " : ", ";
    first = false;
    if (const auto* vec = std::get_if<std::vector<double>>(&field.value)) {
      line += field.key;
      line += "(:) =";
      for (double v : *vec) {
        line += '\n';
        line += format_vector_entry(v);
      }
      continue;
    }
    line += field.key;
    line += " = ";
    std::visit(
        [&line](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, long long>) {
            line += std::to_string(v);
          } else if constexpr (std::is_same_v<T, double>) {
            line += format_scalar(v);
          } else if constexpr (std::is_same_v<T, std::string>) {
            line += v;
          }
        },
        field.value);
  }
  return line;
}

// ---------------------------------------------------------------------------

struct Logger::Sinks {
  std::mutex mutex;
  std::array<std::shared_ptr<std::ostream>, 5> by_level{};
  std::map<std::string, std::shared_ptr<std::ostream>> files;
};

Logger::Logger() : sinks_(std::make_shared<Sinks>()) {
  sinks_->by_level[static_cast<int>(LogLevel::kError)] =
      std::shared_ptr<std::ostream>(&std::cerr, NoDelete{});
}

ErrCode Logger::set_sink(LogLevel level, const std::string& target) {
  if (level == LogLevel::kNone) {
    return ErrCode{errc::kIllegalInput, "no sink for level NONE", "set_sink", kModule};
  }
  std::shared_ptr<std::ostream> stream;
  if (target == "stdout") {
    stream = std::shared_ptr<std::ostream>(&std::cout, NoDelete{});
  } else if (target == "stderr") {
    stream = std::shared_ptr<std::ostream>(&std::cerr, NoDelete{});
  } else {
    std::lock_guard lock(sinks_->mutex);
    auto it = sinks_->files.find(target);
    if (it != sinks_->files.end()) {
      stream = it->second;
    } else {
      auto file = std::make_shared<std::ofstream>(target, std::ios::out | std::ios::trunc);
      if (!*file) {
        return ErrCode{errc::kIoError, "cannot open log file '" + target + "'", "set_sink",
                       kModule};
      }
      stream = file;
      sinks_->files.emplace(target, stream);
    }
  }
  set_sink(level, std::move(stream));
  return ErrCode{};
}

void Logger::set_sink(LogLevel level, std::shared_ptr<std::ostream> stream) {
  std::lock_guard lock(sinks_->mutex);
  sinks_->by_level[static_cast<int>(level)] = std::move(stream);
}

void Logger::clear_sink(LogLevel level) { set_sink(level, std::shared_ptr<std::ostream>()); }

bool Logger::enabled(LogLevel level) const {
  return level != LogLevel::kNone && static_cast<int>(level) <= static_cast<int>(max_level_) &&
         sinks_->by_level[static_cast<int>(level)] != nullptr;
}

ErrCode Logger::log(const LogRecord& record) const {
  if (!enabled(record.level)) return ErrCode{};
  const std::string text = render(record, rank_);
  std::lock_guard lock(sinks_->mutex);
  auto& stream = sinks_->by_level[static_cast<int>(record.level)];
  if (!stream) return ErrCode{};
  *stream << text << '\n';
  stream->flush();
  if (!*stream) {
    stream->clear();
    return ErrCode{errc::kIoError, "log sink write failed; record dropped", "log", kModule};
  }
  return ErrCode{};
}

LoggerFromEnv logger_from_environment() {
  LoggerFromEnv out;
  Logger& logger = out.logger;

  constexpr std::array<std::pair<const char*, LogLevel>, 4> kVars = {{
      {"CHRONOS_LOG_ERROR", LogLevel::kError},
      {"CHRONOS_LOG_WARNING", LogLevel::kWarning},
      {"CHRONOS_LOG_INFO", LogLevel::kInfo},
      {"CHRONOS_LOG_DEBUG", LogLevel::kDebug},
  }};

  LogLevel max_level = LogLevel::kError;
  if (const char* level_text = std::getenv("CHRONOS_LOG_LEVEL")) {
    if (!parse_level(level_text, max_level)) {
      out.status = ErrCode{errc::kIllegalInput,
                           std::string("invalid CHRONOS_LOG_LEVEL '") + level_text + "'",
                           "logger_from_environment", kModule};
      return out;
    }
  }
  logger.set_max_level(max_level);

  std::vector<std::string> failed;
  for (const auto& [name, level] : kVars) {
    const char* target = std::getenv(name);
    if (target == nullptr || *target == '\0') continue;
    if (ErrCode err = logger.set_sink(level, target)) {
      logger.set_sink(level, "stderr");
      failed.emplace_back(target);
    }
  }
  for (const auto& path : failed) {
    LogRecord warn{LogLevel::kWarning, "logger_from_environment", "sink-fallback", {}};
    warn.payload.emplace_back("path", path);
    warn.payload.emplace_back("fallback", std::string("stderr"));
    // Emitted even if WARNING is above the configured level.
    std::cerr << render(warn, logger.rank()) << '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------

ErrorContext::ErrorContext(std::shared_ptr<const Logger> logger)
    : logger_(logger ? std::move(logger) : std::make_shared<const Logger>()) {
  handlers_.emplace_back([log = logger_](const ErrCode& err) {
    LogRecord rec{LogLevel::kError, err.function.empty() ? "chronos" : err.function, "error", {}};
    rec.payload.emplace_back("code", err.code);
    rec.payload.emplace_back("module", err.module);
    rec.payload.emplace_back("msg", err.message);
    log->log(rec);
  });
}

void ErrorContext::push_error_handler(ErrorHandler handler) {
  handlers_.push_back(std::move(handler));
}

ErrCode ErrorContext::pop_error_handler() {
  if (handlers_.size() <= 1) {
    ErrCode err{errc::kHandlerStack, "cannot pop the default error handler", "pop_error_handler",
                kModule};
    last_error_ = err;
    return err;
  }
  handlers_.pop_back();
  return ErrCode{};
}

void ErrorContext::record(const ErrCode& err) {
  last_error_ = err;
  for (auto it = handlers_.rbegin(); it != handlers_.rend(); ++it) (*it)(err);
}

ErrCode ErrorContext::get_last_error() {
  ErrCode out = std::move(last_error_);
  last_error_ = ErrCode{};
  return out;
}

}  // namespace chronos

#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace chronos {

/// Error codes shared by every module. Zero is success, errors are negative.
namespace errc {
enum : int {
  kSuccess = 0,
  kIllegalInput = -1,
  kDimensionMismatch = -2,
  kStepTooSmall = -3,
  kTooMuchWork = -4,
  kRhsFailure = -5,
  kNonFinite = -6,
  kConvergenceFailure = -7,
  kUnknownName = -8,
  kIoError = -9,
  kUnsupported = -10,
  kOutOfRange = -11,
  kBlowUp = -12,
  kHandlerStack = -13,
  kStepperFailure = -14,
};
}  // namespace errc

/// A status value with the function and module that produced it.
struct ErrCode {
  int code = errc::kSuccess;
  std::string message;
  std::string function;
  std::string module;

  [[nodiscard]] bool ok() const { return code == errc::kSuccess; }
  explicit operator bool() const { return !ok(); }

  static ErrCode success() { return {}; }
};

std::string to_string(const ErrCode& err);

/// Exception carrying an ErrCode; thrown by library operations on failure.
class Error : public std::runtime_error {
 public:
  explicit Error(ErrCode err);
  Error(int code, std::string message, std::string function, std::string module);

  [[nodiscard]] const ErrCode& err() const { return err_; }
  [[nodiscard]] int code() const { return err_.code; }

 private:
  ErrCode err_;
};

[[noreturn]] void raise(int code, std::string message, const char* function, const char* module);

// Precondition checks on public entry points are always compiled. Interior
// consistency checks (finiteness of stages, workspace invariants) are dropped
// when the library is configured with CHRONOS_MINIMAL_CHECKS.
#define CHRONOS_REQUIRE(cond, code, msg)                         \
  do {                                                           \
    if (!(cond)) ::chronos::raise((code), (msg), __func__, kModule); \
  } while (false)

#ifdef CHRONOS_MINIMAL_CHECKS
#define CHRONOS_CHECK_FULL(cond, code, msg) \
  do {                                      \
  } while (false)
#else
#define CHRONOS_CHECK_FULL(cond, code, msg) CHRONOS_REQUIRE(cond, code, msg)
#endif

// ---------------------------------------------------------------------------
// Logging

enum class LogLevel : int { kNone = 0, kError = 1, kWarning = 2, kInfo = 3, kDebug = 4 };

std::string_view level_name(LogLevel level);
/// Parses "error", "warning", "info", "debug", "none" (any case) or 0-4.
bool parse_level(std::string_view text, LogLevel& out);

using LogValue = std::variant<long long, double, std::string, std::vector<double>>;

struct LogField {
  std::string key;
  LogValue value;

  template <typename T>
  LogField(std::string k, T v) : key(std::move(k)), value(convert(std::move(v))) {}

 private:
  template <typename T>
  static LogValue convert(T v) {
    if constexpr (std::is_same_v<T, bool>) {
      return static_cast<long long>(v ? 1 : 0);
    } else if constexpr (std::is_integral_v<T>) {
      return static_cast<long long>(v);
    } else if constexpr (std::is_floating_point_v<T>) {
      return static_cast<double>(v);
    } else if constexpr (std::is_convertible_v<T, std::string>) {
      return std::string(v);
    } else {
      return std::vector<double>(v.begin(), v.end());
    }
  }
};

struct LogRecord {
  LogLevel level = LogLevel::kInfo;
  std::string scope;
  std::string label;
  std::vector<LogField> payload;
};

/// Scalars: up to 15 significant digits, shortest form ("%.15g").
std::string format_scalar(double value);
/// Vector entries: one leading space, 15 fractional digits in scientific form.
std::string format_vector_entry(double value);

/// Renders a record exactly as it is written to a sink, without a trailing
/// newline:
///   [LEVEL][rank R][scope][label] k1 = v1, k2 = v2
/// A vector field renders as "name(:) =" followed by one line per entry.
std::string render(const LogRecord& record, int rank);

class Logger {
 public:
  /// ERROR records to standard error; all other levels disabled.
  Logger();

  void set_rank(int rank) { rank_ = rank; }
  [[nodiscard]] int rank() const { return rank_; }

  void set_max_level(LogLevel level) { max_level_ = level; }
  [[nodiscard]] LogLevel max_level() const { return max_level_; }

  /// target is a file path, "stdout" or "stderr". Files are truncated on open
  /// and shared between levels that name the same path.
  ErrCode set_sink(LogLevel level, const std::string& target);
  void set_sink(LogLevel level, std::shared_ptr<std::ostream> stream);
  void clear_sink(LogLevel level);

  [[nodiscard]] bool enabled(LogLevel level) const;

  /// Emits one record atomically. Disabled levels and levels without a sink
  /// are dropped with a success code.
  ErrCode log(const LogRecord& record) const;

 private:
  struct Sinks;
  int rank_ = 0;
  LogLevel max_level_ = LogLevel::kError;
  std::shared_ptr<Sinks> sinks_;
};

struct LoggerFromEnv {
  Logger logger;
  ErrCode status;
};

/// Reads CHRONOS_LOG_ERROR / _WARNING / _INFO / _DEBUG (file path, "stdout" or
/// "stderr") and CHRONOS_LOG_LEVEL.
LoggerFromEnv logger_from_environment();

// ---------------------------------------------------------------------------
// Error context

using ErrorHandler = std::function<void(const ErrCode&)>;

/// Handler stack plus a "last error" slot. The bottom handler logs the error
/// through the attached logger and can't be popped.
class ErrorContext {
 public:
  explicit ErrorContext(std::shared_ptr<const Logger> logger = nullptr);

  void push_error_handler(ErrorHandler handler);
  ErrCode pop_error_handler();
  [[nodiscard]] std::size_t handler_count() const { return handlers_.size(); }

  /// Stores err as the last error and runs the handlers newest-first.
  void record(const ErrCode& err);

  /// Returns the most recent error since the last read, then clears it.
  ErrCode get_last_error();
  [[nodiscard]] const ErrCode& peek_last_error() const { return last_error_; }
  void clear_last_error() { last_error_ = ErrCode{}; }

  [[nodiscard]] const std::shared_ptr<const Logger>& logger() const { return logger_; }

  /// Runs fn; a chronos::Error is recorded here and converted to its ErrCode.
  template <typename Fn>
  ErrCode checked(Fn&& fn) {
    try {
      std::forward<Fn>(fn)();
    } catch (const Error& e) {
      record(e.err());
      return e.err();
    }
    return ErrCode{};
  }

 private:
  std::vector<ErrorHandler> handlers_;
  ErrCode last_error_;
  std::shared_ptr<const Logger> logger_;
};

}  // namespace chronos

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "chronos/core.hpp"
#include "chronos/diagnostics.hpp"

using namespace chronos;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Splits "[A][B][C][D] k1 = v1, k2 = v2" into header fields and pairs.
struct ParsedLine {
  std::vector<std::string> header;
  std::vector<std::pair<std::string, std::string>> fields;
};

ParsedLine parse_line(const std::string& line) {
  ParsedLine out;
  const auto close = line.find("] ");
  std::string head = line.substr(1, (close == std::string::npos ? line.size() - 1 : close) - 1);
  std::size_t pos = 0;
  while (true) {
    auto next = head.find("][", pos);
    out.header.push_back(head.substr(pos, next - pos));
    if (next == std::string::npos) break;
    pos = next + 2;
  }
  if (close == std::string::npos) return out;
  std::string body = line.substr(close + 2);
  pos = 0;
  while (pos <= body.size()) {
    auto next = body.find(", ", pos);
    std::string kv = body.substr(pos, next - pos);
    auto eq = kv.find(" = ");
    out.fields.emplace_back(kv.substr(0, eq), kv.substr(eq + 3));
    if (next == std::string::npos) break;
    pos = next + 2;
  }
  return out;
}

struct ScopedEnv {
  std::string name;
  ScopedEnv(const char* n, const char* v) : name(n) { setenv(n, v, 1); }
  ~ScopedEnv() { unsetenv(name.c_str()); }
};

}  // namespace

TEST_CASE("listing lines render byte-exactly") {
  LogRecord info{LogLevel::kInfo, "ARKodeEvolve", "begin-step-attempt", {}};
  info.payload.emplace_back("step", 1);
  info.payload.emplace_back("tn", 0.0);
  info.payload.emplace_back("h", 0.000102986025609508);
  CHECK(render(info, 0) ==
        "[INFO][rank 0][ARKodeEvolve][begin-step-attempt] step = 1, tn = 0, h = "
        "0.000102986025609508");

  LogRecord debug{LogLevel::kDebug, "arkStep_TakeStep_Z", "explicit stage", {}};
  debug.payload.emplace_back("z_0", std::vector<double>{1.224744871391589, 1.732050807568877});
  CHECK(render(debug, 0) ==
        "[DEBUG][rank 0][arkStep_TakeStep_Z][explicit stage] z_0(:) =\n"
        " 1.224744871391589e+00\n"
        " 1.732050807568877e+00");
}

TEST_CASE("golden file is identical across repeated writes") {
  auto dir = std::filesystem::temp_directory_path() / "chronos_golden";
  std::filesystem::create_directories(dir);
  std::string contents[2];
  for (int run = 0; run < 2; ++run) {
    auto path = dir / ("run" + std::to_string(run) + ".log");
    {
      Logger logger;
      logger.set_max_level(LogLevel::kDebug);
      REQUIRE(logger.set_sink(LogLevel::kInfo, path.string()).ok());
      REQUIRE(logger.set_sink(LogLevel::kDebug, path.string()).ok());
      LogRecord info{LogLevel::kInfo, "ARKodeEvolve", "begin-step-attempt", {}};
      info.payload.emplace_back("step", 1);
      info.payload.emplace_back("tn", 0.0);
      info.payload.emplace_back("h", 0.000102986025609508);
      LogRecord debug{LogLevel::kDebug, "arkStep_TakeStep_Z", "explicit stage", {}};
      debug.payload.emplace_back("z_0",
                                 std::vector<double>{1.224744871391589, 1.732050807568877});
      CHECK(logger.log(info).ok());
      CHECK(logger.log(debug).ok());
    }
    contents[run] = read_file(path);
  }
  CHECK(contents[0] == contents[1]);
  CHECK(contents[0] ==
        "[INFO][rank 0][ARKodeEvolve][begin-step-attempt] step = 1, tn = 0, h = "
        "0.000102986025609508\n"
        "[DEBUG][rank 0][arkStep_TakeStep_Z][explicit stage] z_0(:) =\n"
        " 1.224744871391589e+00\n"
        " 1.732050807568877e+00\n");
  std::filesystem::remove_all(dir);
}

TEST_CASE("scalar formatting keeps at most 15 significant digits") {
  CHECK(format_scalar(0.0) == "0");
  CHECK(format_scalar(0.1) == "0.1");
  CHECK(format_scalar(1.0 / 3.0) == "0.333333333333333");
  CHECK(format_scalar(1e-20) == "1e-20");
  CHECK(format_vector_entry(-2.5) == " -2.500000000000000e+00");
}

TEST_CASE("records are machine readable") {
  LogRecord rec{LogLevel::kWarning, "scope_fn", "some-label", {}};
  rec.payload.emplace_back("n", 42);
  rec.payload.emplace_back("x", -1.5e-7);
  rec.payload.emplace_back("name", std::string("rkc"));
  rec.payload.emplace_back("ok", true);
  Logger logger;
  logger.set_rank(3);
  const auto parsed = parse_line(render(rec, logger.rank()));
  REQUIRE(parsed.header.size() == 4);
  CHECK(parsed.header[0] == "WARNING");
  CHECK(parsed.header[1] == "rank 3");
  CHECK(parsed.header[2] == "scope_fn");
  CHECK(parsed.header[3] == "some-label");
  REQUIRE(parsed.fields.size() == 4);
  CHECK(parsed.fields[0] == std::make_pair(std::string("n"), std::string("42")));
  CHECK(std::stod(parsed.fields[1].second) == -1.5e-7);
  CHECK(parsed.fields[2].second == "rkc");
  CHECK(parsed.fields[3].second == "1");
}

TEST_CASE("levels and sinks") {
  auto info = std::make_shared<std::ostringstream>();
  auto warn = std::make_shared<std::ostringstream>();
  Logger logger;
  logger.set_sink(LogLevel::kInfo, info);
  logger.set_sink(LogLevel::kWarning, warn);

  SUBCASE("level above the enabled max emits nothing") {
    logger.set_max_level(LogLevel::kWarning);
    CHECK(logger.log({LogLevel::kInfo, "f", "l", {}}).ok());
    CHECK(info->str().empty());
    CHECK(logger.log({LogLevel::kWarning, "f", "l", {}}).ok());
    CHECK(warn->str() == "[WARNING][rank 0][f][l]\n");
  }
  SUBCASE("each record reaches only the sink of its level") {
    logger.set_max_level(LogLevel::kDebug);
    logger.log({LogLevel::kInfo, "f", "i", {}});
    CHECK(info->str() == "[INFO][rank 0][f][i]\n");
    CHECK(warn->str().empty());
  }
  SUBCASE("write failure is reported and the record dropped") {
    logger.set_max_level(LogLevel::kInfo);
    info->setstate(std::ios::badbit);
    CHECK(logger.log({LogLevel::kInfo, "f", "l", {}}).code == errc::kIoError);
  }
}

TEST_CASE("parse_level accepts names and digits") {
  LogLevel lv{};
  CHECK(parse_level("INFO", lv));
  CHECK(lv == LogLevel::kInfo);
  CHECK(parse_level("4", lv));
  CHECK(lv == LogLevel::kDebug);
  CHECK_FALSE(parse_level("loud", lv));
}

TEST_CASE("logger_from_environment") {
  SUBCASE("all unset gives an error-only logger") {
    auto env = logger_from_environment();
    CHECK(env.status.ok());
    CHECK(env.logger.enabled(LogLevel::kError));
    CHECK_FALSE(env.logger.enabled(LogLevel::kWarning));
    CHECK_FALSE(env.logger.enabled(LogLevel::kInfo));
  }
  SUBCASE("info file sink") {
    auto path = std::filesystem::temp_directory_path() / "chronos_env_run.log";
    {
      ScopedEnv a("CHRONOS_LOG_INFO", path.c_str());
      ScopedEnv b("CHRONOS_LOG_LEVEL", "INFO");
      auto env = logger_from_environment();
      REQUIRE(env.status.ok());
      env.logger.log({LogLevel::kInfo, "f", "hello", {}});
    }
    CHECK(read_file(path) == "[INFO][rank 0][f][hello]\n");
    std::filesystem::remove(path);
  }
  SUBCASE("invalid level string") {
    ScopedEnv b("CHRONOS_LOG_LEVEL", "verbose");
    auto env = logger_from_environment();
    CHECK(env.status.code == errc::kIllegalInput);
    CHECK(env.logger.max_level() == LogLevel::kError);
  }
  SUBCASE("unwritable path falls back to standard error") {
    ScopedEnv a("CHRONOS_LOG_WARNING", "/nonexistent-dir/x/y.log");
    auto env = logger_from_environment();
    CHECK(env.status.ok());
  }
}

TEST_CASE("error handler stack") {
  auto sink = std::make_shared<std::ostringstream>();
  auto logger = std::make_shared<Logger>();
  logger->set_sink(LogLevel::kError, sink);
  ErrorContext ctx(logger);

  SUBCASE("counting handler sees every error") {
    int count = 0;
    ctx.push_error_handler([&](const ErrCode&) { ++count; });
    for (int i = 0; i < 3; ++i) ctx.record({errc::kIllegalInput, "bad", "fn", "mod"});
    CHECK(count == 3);
  }
  SUBCASE("handlers run newest first") {
    std::string order;
    ctx.push_error_handler([&](const ErrCode&) { order += "a"; });
    ctx.push_error_handler([&](const ErrCode&) { order += "b"; });
    ctx.record({errc::kIllegalInput, "bad", "fn", "mod"});
    CHECK(order == "ba");
    CHECK(ctx.pop_error_handler().ok());
    order.clear();
    ctx.record({errc::kIllegalInput, "bad", "fn", "mod"});
    CHECK(order == "a");
  }
  SUBCASE("default handler logs an ERROR record") {
    ctx.record({errc::kDimensionMismatch, "lengths differ", "wrms_norm", "core"});
    CHECK(sink->str() ==
          "[ERROR][rank 0][wrms_norm][error] code = -2, module = core, msg = lengths differ\n");
  }
  SUBCASE("default handler can't be popped") {
    CHECK(ctx.handler_count() == 1);
    CHECK(ctx.pop_error_handler().code == errc::kHandlerStack);
    CHECK(ctx.handler_count() == 1);
  }
}

TEST_CASE("last error is cleared on read") {
  auto logger = std::make_shared<Logger>();
  logger->clear_sink(LogLevel::kError);
  ErrorContext ctx(logger);

  StateVector y(2);
  y << 1.0, 2.0;
  ToleranceSpec tol;
  (void)wrms_norm(ctx, y, y, tol);
  CHECK(ctx.get_last_error().code == errc::kSuccess);

  StateVector short_vec(1);
  short_vec << 1.0;
  (void)wrms_norm(ctx, short_vec, y, tol);
  ErrCode err = ctx.get_last_error();
  CHECK(err.code == errc::kDimensionMismatch);
  CHECK(err.function == "wrms_norm");
  CHECK(err.module == "core");
  CHECK(ctx.get_last_error().code == errc::kSuccess);

  // linear_sum returns a value, so its failure only shows up as last error.
  StateVector z = linear_sum(ctx, 1.0, short_vec, 1.0, y);
  CHECK(z.size() == 0);
  CHECK(ctx.get_last_error().code == errc::kDimensionMismatch);
}

TEST_CASE("error codes") {
  CHECK(ErrCode::success().ok());
  CHECK(ErrCode::success().message.empty());
  ErrCode e{errc::kIoError, "m", "f", "mod"};
  CHECK(static_cast<bool>(e));
  CHECK(to_string(e) == "error -9 in mod::f: m");
  try {
    raise(errc::kOutOfRange, "x", "fn", "mod");
  } catch (const Error& ex) {
    CHECK(ex.code() == errc::kOutOfRange);
  }
}

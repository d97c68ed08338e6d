// Command-line driver for the benchmark experiments. Each subcommand runs one
// experiment and writes a CSV file.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <string>

#include "chronos/harness/experiments.hpp"

using namespace chronos;
using namespace chronos::harness;

namespace {

struct Common {
  std::string out;
  std::string log_level;
  std::uint64_t seed = 1;
  bool no_timing = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--out", c.out, "CSV output path (default: <subcommand>.csv)");
  sub->add_option("--log-level", c.log_level, "none, error, warning, info or debug");
  sub->add_option("--seed", c.seed, "Random seed (used by aa-demo)");
  sub->add_flag("--no-timing", c.no_timing, "Write zero wall times so reruns are byte-identical");
}

// Environment sinks win; levels without one go to stderr.
Logger make_logger(const std::string& level_text) {
  auto env = logger_from_environment();
  if (env.status) throw Error(env.status);
  Logger logger = env.logger;
  if (level_text.empty()) return logger;
  LogLevel level;
  if (!parse_level(level_text, level)) {
    throw Error(errc::kIllegalInput, "unknown log level '" + level_text + "'", "main", "cli");
  }
  logger.set_max_level(level);
  constexpr std::pair<LogLevel, const char*> kLevels[] = {
      {LogLevel::kError, "CHRONOS_LOG_ERROR"},
      {LogLevel::kWarning, "CHRONOS_LOG_WARNING"},
      {LogLevel::kInfo, "CHRONOS_LOG_INFO"},
      {LogLevel::kDebug, "CHRONOS_LOG_DEBUG"}};
  for (const auto& [lv, var] : kLevels) {
    const char* t = std::getenv(var);
    if (t == nullptr || *t == '\0') logger.set_sink(lv, "stderr");
  }
  return logger;
}

std::string output_path(const Common& c, const std::string& name) {
  if (!c.out.empty()) return c.out;
  const std::string path = name + ".csv";
  std::cout << "no --out given, writing " << path << "\n";
  return path;
}

void finish(const CsvTable& t, const std::string& path) {
  t.save(path);
  std::cout << "wrote " << t.rows().size() << " rows to " << path << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-integration benchmark experiments"};
  app.require_subcommand(1);

  Common common;

  SplittingExperimentConfig gss;
  std::vector<int> gss_exponents;
  auto* gs_split = app.add_subcommand("gray-scott-splitting",
                                      "Operator-splitting convergence on Gray-Scott");
  add_common(gs_split, common);
  gs_split->add_option("--grid", gss.problem.N, "Grid points per side")->check(CLI::Range(3, 1 << 14));
  gs_split->add_option("--t-end", gss.t_end, "Final time")->check(CLI::PositiveNumber);
  gs_split->add_option("--step-exponents", gss_exponents, "Step exponents i, h = 2^-i (default 0..7)")
      ->delimiter(',');
  gs_split->add_option("--methods", gss.methods, "Splitting methods")->delimiter(',');
  gs_split->add_option("--ref-tol", gss.ref_tol, "Reference tolerance")
      ->check(CLI::PositiveNumber);

  LsrkExperimentConfig gsl;
  auto* gs_lsrk =
      app.add_subcommand("gray-scott-lsrk", "RKC against a second-order ERK pair on Gray-Scott");
  add_common(gs_lsrk, common);
  gs_lsrk->add_option("--grid", gsl.problem.N, "Grid points per side")->check(CLI::Range(3, 1 << 14));
  gs_lsrk->add_option("--t-end", gsl.t_end, "Final time")->check(CLI::PositiveNumber);
  gs_lsrk->add_option("--tolerances", gsl.reltols, "Relative tolerances")->delimiter(',');
  gs_lsrk->add_option("--abstol", gsl.abstol, "Absolute tolerance")->check(CLI::PositiveNumber);
  gs_lsrk->add_option("--rho-factor", gsl.rho_factor, "Scale on the diffusion Gershgorin bound")
      ->check(CLI::PositiveNumber);
  gs_lsrk->add_option("--ref-tol", gsl.ref_tol, "Reference tolerance")
      ->check(CLI::PositiveNumber);

  LotkaVolterraConfig lvc;
  auto* lv = app.add_subcommand("lotka-volterra", "Forward and adjoint convergence");
  add_common(lv, common);
  lv->add_option("--t-end", lvc.t_end, "Final time")->check(CLI::PositiveNumber);
  lv->add_option("--tables", lvc.tables, "ERK tables")->delimiter(',');
  lv->add_option("--steps", lvc.steps, "Step sizes")->delimiter(',');
  lv->add_option("--checkpoint-interval", lvc.checkpoint_interval, "Steps between checkpoints")
      ->check(CLI::PositiveNumber);

  SprkDemoConfig spc;
  auto* sp = app.add_subcommand("sprk-demo", "Energy behaviour of the symplectic methods");
  add_common(sp, common);
  sp->add_option("--step-size", spc.h, "Step size")->check(CLI::PositiveNumber);
  sp->add_option("--num-steps", spc.steps, "Number of steps")->check(CLI::PositiveNumber);

  AaDemoConfig aac;
  auto* aa = app.add_subcommand("aa-demo", "Anderson acceleration variants");
  add_common(aa, common);
  aa->add_option("--n", aac.n, "Problem size")->check(CLI::PositiveNumber);
  aa->add_option("--depth", aac.max_depth, "History depth")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    const Logger logger = make_logger(common.log_level);
    const bool timing = !common.no_timing;
    if (gs_split->parsed()) {
      if (!gss_exponents.empty()) {
        gss.steps.clear();
        for (int i : gss_exponents) gss.steps.push_back(std::ldexp(1.0, -i));
      }
      gss.record_timing = timing;
      gss.logger = &logger;
      const std::string path = output_path(common, "gray-scott-splitting");
      const auto r = run_gray_scott_splitting(gss);
      for (const auto& [name, slope] : r.slopes()) std::printf("%-12s slope %.3f\n", name.c_str(), slope);
      finish(r.table(), path);
    } else if (gs_lsrk->parsed()) {
      gsl.record_timing = timing;
      gsl.logger = &logger;
      const std::string path = output_path(common, "gray-scott-lsrk");
      const auto r = run_gray_scott_lsrk(gsl);
      for (const auto& row : r.rows) {
        std::printf("%-5s reltol %.0e  error %.3e  time %.3fs  stages %d\n", row.method.c_str(),
                    row.reltol, row.error, row.wall_time, row.max_stages);
      }
      finish(r.table(), path);
    } else if (lv->parsed()) {
      lvc.record_timing = timing;
      const std::string path = output_path(common, "lotka-volterra");
      finish(run_lotka_volterra(lvc).table(), path);
    } else if (sp->parsed()) {
      const std::string path = output_path(common, "sprk-demo");
      finish(run_sprk_demo(spc).table(), path);
    } else if (aa->parsed()) {
      aac.seed = common.seed;
      const std::string path = output_path(common, "aa-demo");
      finish(run_aa_demo(aac).table(), path);
    }
  } catch (const Error& e) {
    std::cerr << to_string(e.err()) << "\n";
    return -e.code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

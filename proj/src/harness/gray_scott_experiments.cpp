#include <chrono>
#include <cmath>

#include "chronos/erk.hpp"
#include "chronos/harness/experiments.hpp"
#include "chronos/harness/gray_scott.hpp"
#include "chronos/lsrk.hpp"
#include "chronos/splitting.hpp"

namespace chronos::harness {

namespace {
constexpr const char* kModule = "harness";

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double relative_error(const StateVector& y, const StateVector& ref) {
  return (y - ref).norm() / ref.norm();
}

StateVector reference_solution(const GrayScottProblem& gs, double t_end, double tol, long* steps) {
  ToleranceSpec ts;
  ts.reltol = tol;
  ts.abstol = tol;
  const auto r = erk::erk_evolve(erk::builtin_table("dopri5"), gs.full(),
                                 StepController::i_controller(), ts, 0.0, t_end,
                                 gs.initial_state());
  if (steps != nullptr) *steps = r.stats.steps;
  return r.y;
}
}  // namespace

GrayScottProblem with_grid(int N) {
  GrayScottProblem p;
  p.N = N;
  return p;
}

std::string diffusion_table_for_order(int order) {
  switch (order) {
    case 1: return "euler";
    case 2: return "heun";
    case 3: return "bs3";
    case 4: return "rk4";
    case 5:
    case 6: return "butcher6";
    default: break;
  }
  raise(errc::kUnsupported, "no diffusion table for order " + std::to_string(order), __func__,
        kModule);
}

SplittingExperimentResult run_gray_scott_splitting(const SplittingExperimentConfig& cfg) {
  const GrayScottProblem& gs = cfg.problem;
  gs.validate();
  CHRONOS_REQUIRE(cfg.t_end > 0.0, errc::kIllegalInput, "t_end must be positive");
  CHRONOS_REQUIRE(!cfg.steps.empty() && !cfg.methods.empty(), errc::kIllegalInput,
                  "need at least one step size and one method");
  for (double h : cfg.steps) {
    CHRONOS_REQUIRE(h > 0.0, errc::kIllegalInput, "step sizes must be positive");
  }

  SplittingExperimentResult res;
  const StateVector y0 = gs.initial_state();
  const StateVector ref = reference_solution(gs, cfg.t_end, cfg.ref_tol, &res.reference_steps);
  const OdeSystem diffusion = gs.diffusion();

  for (const auto& name : cfg.methods) {
    const auto coef = splitting::splitting_by_name(name, 3);
    const auto table = erk::builtin_table(diffusion_table_for_order(coef.order));
    for (double h : cfg.steps) {
      SplittingRow row;
      row.method = name;
      row.order = coef.order;
      row.h = h;
      auto s1 = exact_stepper_linear(gs);
      auto s2 = exact_stepper_riccati(gs);
      auto s3 = splitting::stepper_from_erk(table, diffusion, 1);
      const auto start = Clock::now();
      try {
        const StateVector y =
            splitting::splitting_evolve(coef, {&s1, &s2, &s3}, 0.0, cfg.t_end, h, y0, &row.steps);
        row.blowup = !all_finite(y);
        row.error = row.blowup ? std::nan("") : relative_error(y, ref);
      } catch (const splitting::SplittingError& e) {
        row.blowup = true;
        row.error = std::nan("");
        if (cfg.logger != nullptr && cfg.logger->enabled(LogLevel::kWarning)) {
          cfg.logger->log({LogLevel::kWarning, "run_gray_scott_splitting", "blow-up",
                           {{"method", name}, {"h", h}, {"reason", e.err().message}}});
        }
      }
      if (cfg.record_timing) row.wall_time = seconds_since(start);
      if (cfg.logger != nullptr && cfg.logger->enabled(LogLevel::kInfo)) {
        cfg.logger->log({LogLevel::kInfo, "run_gray_scott_splitting", "point",
                         {{"method", name}, {"h", h}, {"error", row.error}}});
      }
      res.rows.push_back(row);
    }
  }
  return res;
}

CsvTable SplittingExperimentResult::table() const {
  CsvTable t({"method", "order", "h", "error", "wall_time_s", "steps", "blowup"});
  for (const auto& r : rows) {
    t.add_row({r.method, csv_int(r.order), csv_real(r.h), csv_real(r.error),
               csv_real(r.wall_time), csv_int(r.steps), csv_int(r.blowup ? 1 : 0)});
  }
  return t;
}

std::vector<std::pair<std::string, double>> SplittingExperimentResult::slopes() const {
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < rows.size();) {
    std::vector<double> h, e;
    std::size_t j = i;
    for (; j < rows.size() && rows[j].method == rows[i].method; ++j) {
      if (rows[j].blowup) continue;
      h.push_back(rows[j].h);
      e.push_back(rows[j].error);
    }
    out.emplace_back(rows[i].method, loglog_slope_floored(h, e));
    i = j;
  }
  return out;
}

LsrkExperimentResult run_gray_scott_lsrk(const LsrkExperimentConfig& cfg) {
  const GrayScottProblem& gs = cfg.problem;
  gs.validate();
  CHRONOS_REQUIRE(cfg.t_end > 0.0, errc::kIllegalInput, "t_end must be positive");
  CHRONOS_REQUIRE(cfg.rho_factor > 0.0, errc::kIllegalInput, "rho_factor must be positive");

  const OdeSystem sys = gs.full();
  const StateVector y0 = gs.initial_state();
  const StateVector ref = reference_solution(gs, cfg.t_end, cfg.ref_tol, nullptr);
  const double rho = cfg.rho_factor * gs.diffusion_gershgorin();
  const auto erk_table = erk::builtin_table(cfg.erk_table);

  EvolveOptions opts;
  opts.logger = cfg.logger;

  LsrkExperimentResult res;
  for (double rt : cfg.reltols) {
    ToleranceSpec tol;
    tol.reltol = rt;
    tol.abstol = cfg.abstol;

    lsrk::StsConfig sts;
    sts.method = lsrk::StsMethod::kRKC;
    sts.rho_estimator = [rho](double, const StateVector&) { return rho; };
    auto start = Clock::now();
    const auto r = lsrk::sts_evolve(sts, sys, StepController::i_controller(), tol, 0.0,
                                    cfg.t_end, y0, opts);
    LsrkRow rkc{"rkc", rt, cfg.abstol, relative_error(r.y, ref), 0.0, r.stats.steps,
                r.stats.attempts, r.stats.rhs_evals, r.sts.max_stages_used};
    if (cfg.record_timing) rkc.wall_time = seconds_since(start);
    res.rows.push_back(rkc);

    start = Clock::now();
    const auto e = erk::erk_evolve(erk_table, sys, StepController::i_controller(), tol, 0.0,
                                   cfg.t_end, y0, opts);
    LsrkRow erk2{"erk2", rt, cfg.abstol, relative_error(e.y, ref), 0.0, e.stats.steps,
                 e.stats.attempts, e.stats.rhs_evals, erk_table.stages()};
    if (cfg.record_timing) erk2.wall_time = seconds_since(start);
    res.rows.push_back(erk2);

    if (cfg.logger != nullptr && cfg.logger->enabled(LogLevel::kInfo)) {
      cfg.logger->log({LogLevel::kInfo, "run_gray_scott_lsrk", "point",
                       {{"reltol", rt},
                        {"rkc_error", rkc.error},
                        {"rkc_stages", rkc.max_stages},
                        {"erk_error", erk2.error}}});
    }
  }
  return res;
}

CsvTable LsrkExperimentResult::table() const {
  CsvTable t({"method", "reltol", "abstol", "error", "wall_time_s", "steps", "attempts",
              "rhs_evals", "max_stages"});
  for (const auto& r : rows) {
    t.add_row({r.method, csv_real(r.reltol), csv_real(r.abstol), csv_real(r.error),
               csv_real(r.wall_time), csv_int(r.steps), csv_int(r.attempts), csv_int(r.rhs_evals),
               csv_int(r.max_stages)});
  }
  return t;
}

}  // namespace chronos::harness

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "chronos/core.hpp"
#include "chronos/erk.hpp"

namespace chronos::multirate {

enum class ControlKind { kDecoupled, kStepsizeTolerance };

StepController default_tolfac_controller();

/// Slow/fast splitting with an adaptive inner stepper. The slow partition is
/// advanced with one step of slow_table per sub-flow.
struct MultirateConfig {
  ControlKind kind = ControlKind::kStepsizeTolerance;
  StepController slow_controller;
  /// Decoupled family: proposes the inner initial step.
  StepController fast_controller;
  /// Stepsize-tolerance family: adjusts tolfac.
  StepController tolfac_controller = default_tolfac_controller();
  /// Decoupled family only; the outer tolerance when unset.
  std::optional<ToleranceSpec> inner_tol;
  double tolfac = 1.0;
  double tolfac_min = 1e-5;
  /// Exponent order of the tolfac law: tolfac' = tolfac * safety * est^(-1/k).
  int tolfac_order = 1;
  /// 1: Lie-Trotter (slow then fast), 2: Strang (slow/2, fast, slow/2).
  int splitting_order = 2;
  /// Controller order for the fast estimate in the decoupled family.
  int fast_order = 2;
  std::string slow_table = "rk4";
  double H0 = 0.0;     ///< 0: 1e-2 of the first interval
  double H_min = 0.0;  ///< 0: 1e-12 of the first interval
  double H_max = 0.0;  ///< 0: unbounded
  long max_steps = 1'000'000;
  /// Consecutive inner failures tolerated before the error propagates.
  int max_inner_retries = 5;
  const Logger* logger = nullptr;

  void validate() const;
};

struct SlowErrorEstimate {
  StateVector est_vector;
  double est_wrms = 0.0;
};

/// Advances y in place over [t, t + H] with one slow step.
using SlowStepFn = std::function<void(double t, double H, StateVector& y)>;

/// Step-doubling estimate: y_n from two half steps, the one-step result as
/// the comparison, est = y_n - y~_n. Returns y_n through y_out when non-null.
SlowErrorEstimate slow_error_estimate(const SlowStepFn& step, double t, const StateVector& y,
                                      double H, const ToleranceSpec& tol,
                                      StateVector* y_out = nullptr);

struct DecoupledUpdate {
  double H_next = 0.0;
  double h_next = 0.0;
};

/// Independent slow and fast controller proposals.
DecoupledUpdate decoupled_update(const MultirateConfig& cfg, double H, double h,
                                 double est_slow, double est_fast, int slow_order);

struct HtolUpdate {
  double H_next = 0.0;
  double tolfac_next = 0.0;
  bool clamped_low = false;
  bool clamped_high = false;
};

/// H from the slow controller; tolfac scaled by the tolfac law and clamped to
/// [tolfac_min, 1]. A clamp at tolfac_min is logged as a warning.
HtolUpdate htol_update(const MultirateConfig& cfg, double H, double tolfac, double est_slow,
                       double est_fast_accum, int slow_order);

struct MultirateStats {
  long slow_steps = 0;
  long slow_attempts = 0;
  long rejections = 0;
  long inner_failures = 0;
  long inner_steps = 0;      ///< accepted inner steps on the kept (two half-step) path
  double inner_span = 0.0;   ///< time covered by those inner steps
  long tolfac_clamps = 0;
  double max_accepted_est = 0.0;
  std::vector<double> H_history;       ///< accepted slow steps
  std::vector<double> tolfac_history;  ///< tolfac after every attempt

  [[nodiscard]] double mean_H() const;
  [[nodiscard]] double mean_inner_h() const;
};

/// Multirate integrator, itself an AdaptiveStepper so it can serve as the
/// fast stepper of an enclosing instance. Forward in time only.
class MultirateStepper : public AdaptiveStepper {
 public:
  /// fast must outlive this object.
  MultirateStepper(MultirateConfig cfg, OdeSystem slow, AdaptiveStepper& fast,
                   ToleranceSpec tol);

  void reset(double t, const StateVector& y) override;

  void set_tolerance(const ToleranceSpec& tol) override;
  const ToleranceSpec& tolerance() const override { return tol_; }
  void set_initial_step(double H) override { H_init_ = H; }
  const Report& report() const override { return report_; }
  void clear_report() override;

  [[nodiscard]] const MultirateStats& stats() const { return stats_; }
  [[nodiscard]] double tolfac() const { return tolfac_; }

 protected:
  void do_evolve(double t_start, double t_end, StateVector& y) override;

 private:
  void slow_step(double t, double H, StateVector& y);

  MultirateConfig cfg_;
  OdeSystem slow_;
  erk::ErkStepper slow_stepper_;
  AdaptiveStepper* fast_;
  ToleranceSpec tol_;
  double tolfac_;
  double H_ = 0.0;
  double H_init_ = 0.0;
  double h_fast_ = 0.0;
  MultirateStats stats_;
  Report report_;
};

struct MultirateResult {
  StateVector y;
  MultirateStats stats;
};

MultirateResult multirate_evolve(const MultirateConfig& cfg, const OdeSystem& slow,
                                 AdaptiveStepper& fast, double t0, double tf,
                                 const StateVector& y0, const ToleranceSpec& tol);

}  // namespace chronos::multirate

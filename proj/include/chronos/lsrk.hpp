#pragma once

#include <functional>
#include <vector>

#include "chronos/core.hpp"
#include "chronos/erk.hpp"

namespace chronos::lsrk {

// ---------------------------------------------------------------------------
// Super time stepping: RKC and RKL, both second order.

enum class StsMethod { kRKC, kRKL };

/// Spectral radius estimate of df/dy at (t, y).
using RhoFn = std::function<double(double t, const StateVector& y)>;

struct StsConfig {
  StsMethod method = StsMethod::kRKC;
  int max_stages = 200;
  /// Multiplies h*rho before it is compared against the extent. Zero picks
  /// the method default (see default_stage_safety).
  double stage_safety = 0.0;
  int rho_recompute_period = 25;
  RhoFn rho_estimator;

  void validate() const;
  [[nodiscard]] double effective_safety() const;
};

/// 1.01 for RKL. For RKC the nominal extent 0.81 s^2 overstates the real
/// stability interval of the damped Chebyshev polynomial (about 0.65 s^2,
/// and 2.0 at s = 2), so the default is 1.65, which keeps every s stable.
double default_stage_safety(StsMethod method);

/// Nominal extent of the real stability interval: 0.81 s^2 (RKC) or
/// (s^2 + s - 2)/2 (RKL).
double stability_extent(StsMethod method, int s);

struct StageChoice {
  int stages = 2;
  /// The requested h needs more than max_stages; stages is capped and the
  /// caller should shrink h.
  bool reduce_step = false;
};

/// Smallest s >= 2 with extent(s) >= stage_safety * h * rho.
StageChoice select_stage_count(const StsConfig& cfg, double h, double rho);

/// Largest h whose stage count fits in max_stages (infinity when rho == 0).
double max_stable_step(const StsConfig& cfg, double rho);

/// Recurrence coefficients, indexed by stage j = 0..s (entry 0 unused).
struct StsCoefficients {
  int s = 0;
  std::vector<double> mu, nu, mu_tilde, gamma_tilde, c;
};

StsCoefficients sts_coefficients(StsMethod method, int s);

/// Work vectors for sts_step: f(t, z_0), z_{j-1}, z_{j-2} and one rhs buffer.
/// The count does not depend on s.
struct StsWorkspace {
  StateVector f0, zjm1, zjm2, fj;
  void resize(Index n);
  static constexpr int kVectorCount = 4;
};

/// One step with s stages. If f0_known is set, ws.f0 already holds f(t, y).
/// On return, ws.fj holds f(t + h, y_next) when est is requested.
void sts_step(const StsCoefficients& coef, const RhsFn& rhs, double t, const StateVector& y,
              double h, StsWorkspace& ws, StateVector& y_next, StateVector* est,
              bool f0_known = false);

struct StsStepResult {
  StateVector y_next;
  StateVector est;
};

StsStepResult sts_step(const StsConfig& cfg, const OdeSystem& system, double t,
                       const StateVector& y, double h, int s);

struct StsStats {
  long rho_evaluations = 0;
  long stage_total = 0;
  int max_stages_used = 0;
  int min_stages_used = 0;
  double last_rho = 0.0;
};

struct StsResult : AdaptiveResult {
  StsStats sts;
};

/// Adaptive integration. rho is recomputed every rho_recompute_period accepted
/// steps and after every rejected step, and s is reselected for each attempt.
StsResult sts_evolve(const StsConfig& cfg, const OdeSystem& system,
                     const StepController& controller, const ToleranceSpec& tol, double t0,
                     double tf, const StateVector& y0, const EvolveOptions& options = {});

// ---------------------------------------------------------------------------
// Low-storage SSP methods

enum class SspFamily { kSSP2, kSSP3, kSSP4 };

struct SspConfig {
  SspFamily family = SspFamily::kSSP2;
  int stages = 2;

  void validate() const;
  [[nodiscard]] int order() const;
};

/// One register operation of a low-storage SSP scheme. Registers: 0 = input
/// y (read only), 1 = q1, 2 = q2.
struct SspOp {
  enum Kind { kEval, kAddF, kComb, kCopy } kind;
  int dst = 0;
  int src = 0;
  int src2 = 0;
  double a = 0.0;
  double b = 0.0;
};

struct SspProgram {
  std::vector<SspOp> ops;
  int output = 1;
  int stages = 0;
  std::vector<double> c;      ///< stage abscissae
  std::vector<double> delta;  ///< embedding weights: est = h sum_i delta_i f_i
};

/// Register program for cfg, with abscissae and embedding weights filled in.
SspProgram ssp_program(const SspConfig& cfg);

/// Butcher form of the program; b_embed = b - delta.
erk::ButcherTable ssp_butcher_table(const SspConfig& cfg);

/// Two stage registers plus the rhs buffer and the estimate accumulator.
struct SspWorkspace {
  StateVector q1, q2, f, e;
  void resize(Index n);
  static constexpr int kVectorCount = 4;
};

void ssp_step(const SspProgram& prog, const RhsFn& rhs, double t, const StateVector& y,
              double h, SspWorkspace& ws, StateVector& y_next, StateVector* est);

struct SspStepResult {
  StateVector y_next;
  StateVector est;
};

SspStepResult ssp_step(const SspConfig& cfg, const OdeSystem& system, double t,
                       const StateVector& y, double h);

AdaptiveResult ssp_evolve(const SspConfig& cfg, const OdeSystem& system,
                          const StepController& controller, const ToleranceSpec& tol, double t0,
                          double tf, const StateVector& y0, const EvolveOptions& options = {});

}  // namespace chronos::lsrk

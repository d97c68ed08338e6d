#pragma once

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chronos/diagnostics.hpp"

namespace chronos {

/// Dense solution state. Dimension is fixed for the life of an integration.
using StateVector = Eigen::VectorXd;
using Index = Eigen::Index;

/// ydot = f(t, y). Implementations write into ydot, which is already sized.
using RhsFn = std::function<void(double t, const StateVector& y, StateVector& ydot)>;

struct OdeSystem {
  Index dimension = 0;
  RhsFn rhs;

  void validate() const;
};

/// y' = f_1(t, y) + ... + f_P(t, y), P >= 2.
struct PartitionedOdeSystem {
  Index dimension = 0;
  std::vector<RhsFn> partitions;

  void validate() const;
  [[nodiscard]] std::size_t partition_count() const { return partitions.size(); }
  /// The unsplit right-hand side (sum of all partitions).
  [[nodiscard]] OdeSystem combined() const;
};

bool all_finite(const StateVector& v);

/// Advances a state over [t_start, t_end]. Any solution procedure qualifies:
/// an integrator, an exact flow, a nested splitting. Intervals may run
/// backward (t_end < t_start).
class Stepper {
 public:
  virtual ~Stepper() = default;

  /// In-place evolve. A zero-width interval leaves y untouched.
  void evolve(double t_start, double t_end, StateVector& y);

  /// Discards any memory of earlier subintervals (step-size history, FSAL data).
  virtual void reset(double t, const StateVector& y);

  [[nodiscard]] virtual bool supports_forcing() const { return false; }
  /// Adds a constant vector to the right-hand side for subsequent evolves.
  virtual void set_forcing(const StateVector& forcing);
  virtual void clear_forcing() {}

 protected:
  virtual void do_evolve(double t_start, double t_end, StateVector& y) = 0;
};

struct ToleranceSpec {
  double reltol = 1e-6;
  double abstol = 1e-9;
  /// Per-component absolute tolerances; overrides abstol when non-empty.
  StateVector abstol_vector;

  void validate(Index dimension) const;
  [[nodiscard]] double abs_weight(Index i) const {
    return abstol_vector.size() > 0 ? abstol_vector[i] : abstol;
  }
  /// Same relative/absolute ratio, scaled by factor.
  [[nodiscard]] ToleranceSpec scaled(double factor) const;
};

/// sqrt( (1/n) sum_i ( e_i / (reltol*|y_i| + abstol_i) )^2 )
double wrms_norm(const StateVector& e, const StateVector& y, const ToleranceSpec& tol);
/// Same, but a failure is recorded in ctx (and NaN returned) instead of thrown.
double wrms_norm(ErrorContext& ctx, const StateVector& e, const StateVector& y,
                 const ToleranceSpec& tol);

/// Elementwise a*x + b*y; on a dimension mismatch the error is recorded in ctx
/// and an empty vector is returned.
StateVector linear_sum(ErrorContext& ctx, double a, const StateVector& x, double b,
                       const StateVector& y);

// ---------------------------------------------------------------------------
// Step-size control

enum class ControllerKind { kI, kPI };

/// Elementary step-size controller. est is the WRMS-normalized error, so
/// est == 1 means "exactly on target".
///
///   I:  h' = safety * h * est^(-1/(order+1))
///   PI: h' = safety * h * est^(-k1/(order+1)) * est_prev^(k2/(order+1))
///
/// The result is always clamped to [shrink_min*h, growth*h], where growth is
/// first_growth_max on the first step after reset() and growth_max afterwards.
class StepController {
 public:
  ControllerKind kind = ControllerKind::kI;
  double safety = 0.9;
  double growth_max = 10.0;
  double first_growth_max = 1e4;
  double shrink_min = 0.1;
  double k1 = 0.8;
  double k2 = 0.31;

  static StepController i_controller(double safety = 0.9);
  static StepController pi_controller(double safety = 0.9);

  void validate() const;

  /// Proposes the next step. Stateful only for the PI variant (previous est)
  /// and for the first-step growth bound.
  double next_step(double h, double est, int order);
  void reset();

 private:
  bool first_step_ = true;
  double prev_est_ = 1.0;
};

/// Stateless evaluation of the controller formula (no first-step bound, no PI
/// history).
double controller_next_step(const StepController& ctrl, double h, double est, int order);

// ---------------------------------------------------------------------------
// Adaptive driver

struct StepStats {
  long steps = 0;             ///< accepted steps
  long attempts = 0;
  long error_rejections = 0;  ///< est > 1
  long failed_steps = 0;      ///< non-finite candidate or estimate
  long rhs_evals = 0;
  double h_min = 0.0;
  double h_max = 0.0;
  double h_last = 0.0;
};

/// One embedded-error step method, driven by evolve_adaptive.
class SingleStepMethod {
 public:
  virtual ~SingleStepMethod() = default;

  [[nodiscard]] virtual std::string_view name() const = 0;
  /// Order fed to the controller exponent.
  [[nodiscard]] virtual int controller_order() const = 0;
  [[nodiscard]] virtual Index dimension() const = 0;

  /// Attempt (t, y) -> t + h. Writes the candidate solution and the local
  /// error estimate (unweighted) into the output vectors, which are sized.
  virtual void attempt(double t, const StateVector& y, double h, StateVector& y_next,
                       StateVector& error) = 0;

  /// Largest admissible step at (t, y) given the proposal h (e.g. a stage
  /// limit). Must be positive.
  virtual double limit_step(double /*t*/, const StateVector& /*y*/, double h) { return h; }
  virtual void on_accept(double /*t_new*/, const StateVector& /*y_new*/, double /*h*/) {}
  virtual void on_reject(double /*h*/) {}
  /// Drops state carried between steps (cached derivatives, spectral estimates).
  virtual void restart() {}

  [[nodiscard]] virtual long rhs_evaluations() const = 0;
};

struct EvolveOptions {
  double h0 = 0.0;     ///< 0: 1e-4 * (tf - t0)
  double h_min = 0.0;  ///< 0: 10 * eps * |tf - t0|
  double h_max = 0.0;  ///< 0: unbounded
  long max_steps = 5'000'000;
  const Logger* logger = nullptr;
};

struct AdaptiveResult {
  StateVector y;
  double t = 0.0;
  StepStats stats;
};

/// Accept/reject loop: a step is accepted when its WRMS error is <= 1,
/// otherwise it is retried with the controller's smaller proposal. The last
/// step is truncated to land exactly on tf. Throws Error(kStepTooSmall) when
/// h falls below h_min and Error(kTooMuchWork) past max_steps.
AdaptiveResult evolve_adaptive(SingleStepMethod& method, StepController controller,
                               const ToleranceSpec& tol, double t0, double tf,
                               const StateVector& y0, const EvolveOptions& options = {});

/// Stepper with a per-call tolerance and a report of its accumulated error,
/// the contract an inner integrator needs for multirate control.
class AdaptiveStepper : public Stepper {
 public:
  virtual void set_tolerance(const ToleranceSpec& tol) = 0;
  [[nodiscard]] virtual const ToleranceSpec& tolerance() const = 0;
  /// Initial step size for the next evolve (0 = the stepper's default).
  virtual void set_initial_step(double h) = 0;

  struct Report {
    long steps = 0;
    double span = 0.0;            ///< |t_end - t_start| covered
    double last_step = 0.0;       ///< magnitude of the last accepted step
    double last_error_wrms = 0.0; ///< WRMS error of the last accepted step
    StateVector accumulated_error;  ///< componentwise sum of |local error|
  };
  /// Statistics since the last clear_report().
  [[nodiscard]] virtual const Report& report() const = 0;
  virtual void clear_report() = 0;
};

}  // namespace chronos

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "chronos/core.hpp"

namespace chronos::sprk {

/// dp/dt = f1(t, q), dq/dt = f2(t, p).
struct HamiltonianSystem {
  Index n_p = 0;
  Index n_q = 0;
  /// Force -dV/dq, written into f (length n_p).
  std::function<void(double t, const StateVector& q, StateVector& f)> f1;
  /// Velocity dT/dp, written into f (length n_q).
  std::function<void(double t, const StateVector& p, StateVector& f)> f2;

  void validate() const;
};

struct SprkCoefficients {
  std::string name;
  int order = 0;
  std::vector<double> a;      ///< drift weights (q update)
  std::vector<double> a_hat;  ///< kick weights (p update)

  [[nodiscard]] int stages() const { return static_cast<int>(a.size()); }
  /// Equal lengths and both weight sums equal to one.
  void validate() const;
};

/// Orders 1 to 4: symplectic Euler, velocity Verlet, Ruth's three-stage
/// method, and the Yoshida/Candy-Rozmus composition.
SprkCoefficients builtin_sprk(int order);

/// How stage times are derived from the weights.
///   kStageConsistent: the force in stage i is evaluated at the time Q_i has
///     reached (sum_{j<i} a_j), the velocity at the time P_i has reached
///     (sum_{j<=i} a_hat_j). Exact time dependence is recovered.
///   kInclusive: chat_i = sum_{j<=i} a_hat_j and c_i = sum_{j<=i} a_j
///     used directly as written. Identical for autonomous problems.
enum class TimeConvention { kStageConsistent, kInclusive };

struct StageTimes {
  std::vector<double> c_hat;  ///< force evaluation times, in units of h
  std::vector<double> c;      ///< velocity evaluation times, in units of h
};

StageTimes stage_times(const SprkCoefficients& coef, TimeConvention conv);

/// Running compensated sum. total() is the best estimate of the exact sum.
/// Uses the Kahan-Babuska (Neumaier) update so that large terms entering
/// after small ones are also compensated.
struct CompensatedAccumulator {
  StateVector value;
  StateVector compensation;

  CompensatedAccumulator() = default;
  explicit CompensatedAccumulator(const StateVector& initial);

  void reset(const StateVector& initial);
  void add(const StateVector& delta);
  [[nodiscard]] StateVector total() const;
};

/// Scalar compensated sum of a sequence.
double compensated_sum(const std::vector<double>& terms);

struct SprkWorkspace {
  StateVector fp, fq, dp, dq, base_p, base_q, arg_p, arg_q;
  void resize(Index n_p, Index n_q);
};

/// Standard form, in place on (p, q).
void sprk_step_standard(const SprkCoefficients& coef, const HamiltonianSystem& sys, double t,
                        double h, StateVector& p, StateVector& q, SprkWorkspace& ws,
                        TimeConvention conv = TimeConvention::kStageConsistent);

/// Increment form. The current state is acc_p.total(), acc_q.total(); the
/// step increments are folded into the accumulators.
void sprk_step_increment(const SprkCoefficients& coef, const HamiltonianSystem& sys, double t,
                         double h, CompensatedAccumulator& acc_p, CompensatedAccumulator& acc_q,
                         SprkWorkspace& ws,
                         TimeConvention conv = TimeConvention::kStageConsistent);

struct PhaseState {
  StateVector p;
  StateVector q;
};

PhaseState sprk_step_standard(const SprkCoefficients& coef, const HamiltonianSystem& sys,
                              double t, const StateVector& p, const StateVector& q, double h);

PhaseState sprk_step_increment(const SprkCoefficients& coef, const HamiltonianSystem& sys,
                               double t, const StateVector& p, const StateVector& q, double h,
                               CompensatedAccumulator& acc_p, CompensatedAccumulator& acc_q);

enum class SprkAlgorithm { kStandard, kIncrement };

/// Called after every step with the step index (1-based), time and state.
using SprkObserver =
    std::function<void(long step, double t, const StateVector& p, const StateVector& q)>;

struct SprkOptions {
  SprkAlgorithm algorithm = SprkAlgorithm::kStandard;
  TimeConvention convention = TimeConvention::kStageConsistent;
  SprkObserver observer;
};

struct SprkResult {
  PhaseState state;
  double t = 0.0;
  long steps = 0;
  long f1_evals = 0;
  long f2_evals = 0;
};

/// `steps` fixed steps of size h from t0.
SprkResult sprk_evolve(const SprkCoefficients& coef, const HamiltonianSystem& sys, double t0,
                       double h, long steps, const StateVector& p0, const StateVector& q0,
                       const SprkOptions& options = {});

/// Fixed-step SPRK behind the Stepper contract on y = [p; q]. Each evolve
/// call takes `substeps` equal steps.
class SprkStepper : public Stepper {
 public:
  SprkStepper(SprkCoefficients coef, HamiltonianSystem sys, int substeps = 1,
              SprkAlgorithm algorithm = SprkAlgorithm::kStandard);

 protected:
  void do_evolve(double t_start, double t_end, StateVector& y) override;

 private:
  SprkCoefficients coef_;
  HamiltonianSystem sys_;
  int substeps_;
  SprkAlgorithm algorithm_;
  SprkWorkspace ws_;
};

}  // namespace chronos::sprk

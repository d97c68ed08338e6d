#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "chronos/core.hpp"
#include "chronos/erk.hpp"

namespace chronos::splitting {

/// alpha has r entries. beta is stored row-major over (i, j, k) with
/// i < r, j <= s, k < P (all zero-based).
struct SplittingCoefficients {
  std::string name;
  int r = 0;
  int s = 0;
  int P = 0;
  int order = 0;
  std::vector<double> alpha;
  std::vector<double> beta;

  static SplittingCoefficients zeros(int r, int s, int P);

  [[nodiscard]] double beta_at(int i, int j, int k) const {
    return beta[static_cast<std::size_t>((i * (s + 1) + j) * P + k)];
  }
  double& beta_at(int i, int j, int k) {
    return beta[static_cast<std::size_t>((i * (s + 1) + j) * P + k)];
  }
  /// Fraction of the step taken by partition k in stage j of method i.
  [[nodiscard]] double gamma(int i, int j, int k) const {
    return beta_at(i, j + 1, k) - beta_at(i, j, k);
  }

  /// Sizes, beta_{i,0,k} = 0, sum alpha = 1 and sum_i alpha_i beta_{i,s,k} = 1.
  void validate(double tol = 1e-12) const;
};

/// A sub-flow of partition k over a fraction of the step.
struct SubFlow {
  int partition = 0;
  double fraction = 0.0;
};

/// Single sequential method from an ordered list of sub-flows, first applied
/// first. Adjacent flows of one partition are merged, zero flows dropped, and
/// the rest packed greedily into stages (a new stage starts whenever the
/// partition index does not increase).
SplittingCoefficients from_sequence(std::string name, std::vector<SubFlow> seq, int P, int order);

/// The sub-flows of sequential method i in execution order.
std::vector<SubFlow> to_sequence(const SplittingCoefficients& c, int i);

SplittingCoefficients lie_trotter(int P);
/// phi^1_{h/2} o ... o phi^P_h o ... o phi^1_{h/2}, with P stages.
SplittingCoefficients strang(int P);
/// r = P + 1: method i evolves partition i alone, the last does nothing.
SplittingCoefficients parallel(int P);
/// Third-order real composition of Lie-Trotter and its adjoint. For P = 2
/// it is Ruth's method.
SplittingCoefficients third_order(int P);

enum class CompositionScheme { kTripleJump, kQuintupleJump };

/// Symmetric composition raising an even order p to p + 2. The base must
/// have a single sequential method.
SplittingCoefficients compose(const SplittingCoefficients& base, CompositionScheme scheme);

/// Step fractions of the composition for a base of order p.
std::vector<double> composition_weights(CompositionScheme scheme, int p);

/// The default method of each order: 1 Lie-Trotter, 2 Strang, 3 third_order,
/// 4 triple jump of Strang, 6 triple jump of that.
SplittingCoefficients default_method(int order, int P);

/// "lie-trotter", "strang", "parallel", "third-order", "yoshida-4",
/// "suzuki-4" (quintuple jump), "yoshida-6".
SplittingCoefficients splitting_by_name(const std::string& name, int P);
std::vector<std::string> splitting_names();

/// Text format: "r s P order", then alpha, then beta in (i, j, k) order.
/// Lines starting with '#' are ignored.
SplittingCoefficients read_coefficients(std::istream& in);
void write_coefficients(std::ostream& out, const SplittingCoefficients& c);
SplittingCoefficients load_coefficients(const std::string& path);
void save_coefficients(const std::string& path, const SplittingCoefficients& c);

/// Raised when a partition stepper fails; carries the sequential method,
/// stage and partition (zero-based) of the failing subintegration.
class SplittingError : public Error {
 public:
  SplittingError(ErrCode err, int method, int stage, int partition)
      : Error(std::move(err)), method_(method), stage_(stage), partition_(partition) {}
  [[nodiscard]] int method() const { return method_; }
  [[nodiscard]] int stage() const { return stage_; }
  [[nodiscard]] int partition() const { return partition_; }

 private:
  int method_, stage_, partition_;
};

/// Non-owning list of one stepper per partition.
using PartitionSteppers = std::vector<Stepper*>;

/// One step of size h in place. Each subintegration resets its stepper to
/// (t_start, state) first; zero-width subintegrations are skipped.
void splitting_step(const SplittingCoefficients& c, const PartitionSteppers& steppers, double t,
                    double h, StateVector& y);

StateVector splitting_step(const SplittingCoefficients& c, const PartitionSteppers& steppers,
                           double t, const StateVector& y, double h);

/// Fixed steps from t0 to tf; the last step is truncated.
StateVector splitting_evolve(const SplittingCoefficients& c, const PartitionSteppers& steppers,
                             double t0, double tf, double h, const StateVector& y0,
                             long* steps = nullptr);

/// Exact or user-supplied flow. The flow advances y from t0 to t1 in place;
/// forcing, when non-null, is a constant added to the rhs.
using FlowFn = std::function<void(double t0, double t1, StateVector& y, const StateVector* forcing)>;

class FlowStepper : public Stepper {
 public:
  /// supports_forcing() reports whether the flow honours the forcing argument.
  explicit FlowStepper(FlowFn flow, bool handles_forcing = false);
  /// A flow without forcing support.
  static FlowStepper plain(std::function<void(double t0, double t1, StateVector& y)> flow);

  bool supports_forcing() const override { return handles_forcing_; }
  void set_forcing(const StateVector& forcing) override;
  void clear_forcing() override { has_forcing_ = false; }

  [[nodiscard]] long calls() const { return calls_; }

 protected:
  void do_evolve(double t_start, double t_end, StateVector& y) override;

 private:
  FlowFn flow_;
  bool handles_forcing_;
  StateVector forcing_;
  bool has_forcing_ = false;
  long calls_ = 0;
};

/// A splitting method as a Stepper: each evolve call takes `substeps` equal steps.
class SplittingStepper : public Stepper {
 public:
  SplittingStepper(SplittingCoefficients c, PartitionSteppers steppers, int substeps = 1);

 protected:
  void do_evolve(double t_start, double t_end, StateVector& y) override;

 private:
  SplittingCoefficients coef_;
  PartitionSteppers steppers_;
  int substeps_;
};

/// One forcing-method step: evolve partition 1 from y, form
/// f1* = (v1(t + h) - y) / h, then evolve partition 2 from y with f1* added.
void forcing_step(Stepper& first, Stepper& second, double t, double h, StateVector& y);

StateVector forcing_step(Stepper& first, Stepper& second, double t, const StateVector& y,
                         double h);

StateVector forcing_evolve(Stepper& first, Stepper& second, double t0, double tf, double h,
                           const StateVector& y0, long* steps = nullptr);

/// The forcing method as a Stepper. Rejects a second stepper without
/// forcing support at construction.
class ForcingStepper : public Stepper {
 public:
  ForcingStepper(Stepper& first, Stepper& second, int substeps = 1);

 protected:
  void do_evolve(double t_start, double t_end, StateVector& y) override;

 private:
  Stepper* first_;
  Stepper* second_;
  int substeps_;
};

/// ERK subintegrators: a fixed number of equal steps per subinterval, or
/// adaptive at the given tolerance.
erk::ErkStepper stepper_from_erk(const erk::ButcherTable& table, const OdeSystem& system,
                                 int substeps = 1);
erk::ErkStepper stepper_from_erk(const erk::ButcherTable& table, const OdeSystem& system,
                                 const ToleranceSpec& tol);

}  // namespace chronos::splitting

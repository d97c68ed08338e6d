#pragma once

#include "chronos/core.hpp"
#include "chronos/splitting.hpp"

namespace chronos::harness {

/// u_t = eps1 lap u - u v^2 + a (1 - u),  v_t = eps2 lap v + u v^2 - (a + b) v
/// on the periodic square [-1, 1]^2, N x N points, x_i = -1 + i dx.
/// State layout: the u field then the v field, each row-major (index j N + i
/// for x_i, y_j).
struct GrayScottProblem {
  int N = 64;
  double eps1 = 2e-5;
  double eps2 = 1e-5;
  double a = 0.04;
  double b = 0.06;

  void validate() const;
  [[nodiscard]] Index cells() const { return static_cast<Index>(N) * N; }
  [[nodiscard]] Index dimension() const { return 2 * cells(); }
  [[nodiscard]] double dx() const { return 2.0 / N; }

  [[nodiscard]] StateVector initial_state() const;

  /// out = D field, the periodic 5-point Laplacian. Both have length N^2.
  void laplacian(const Eigen::Ref<const StateVector>& field, Eigen::Ref<StateVector> out) const;

  /// Diffusion of both species.
  [[nodiscard]] OdeSystem diffusion() const;
  /// Reaction terms of u only (v unchanged).
  [[nodiscard]] OdeSystem reaction_u() const;
  /// Reaction terms of v only (u unchanged).
  [[nodiscard]] OdeSystem reaction_v() const;
  /// reaction_u, reaction_v, diffusion.
  [[nodiscard]] PartitionedOdeSystem partitioned() const;
  [[nodiscard]] OdeSystem full() const;

  /// Gershgorin bound of the diffusion operator, 8 max(eps) / dx^2.
  [[nodiscard]] double diffusion_gershgorin() const;
};

/// Exact solution of u' = -(v^2 + a) u + a with v held fixed.
double linear_flow(double u0, double v, double a, double tau);

/// Exact solution of v' = u v^2 - (a + b) v with u held fixed, through
/// w = 1/v. Throws BlowUpError when w reaches zero within tau.
double riccati_flow(double v0, double u, double a, double b, double tau);

/// Time at which the Riccati solution from v0 becomes unbounded; infinity
/// when it never does.
double riccati_blowup_time(double v0, double u, double a, double b);

class BlowUpError : public Error {
 public:
  BlowUpError(ErrCode err, double blowup_time) : Error(std::move(err)), time_(blowup_time) {}
  /// Measured from the start of the subinterval.
  [[nodiscard]] double blowup_time() const { return time_; }

 private:
  double time_;
};

/// Partition 1 solved exactly, cell by cell.
splitting::FlowStepper exact_stepper_linear(const GrayScottProblem& problem);
/// Partition 2 solved exactly, cell by cell.
splitting::FlowStepper exact_stepper_riccati(const GrayScottProblem& problem);

}  // namespace chronos::harness

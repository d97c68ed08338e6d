#pragma once

#include "chronos/adjoint.hpp"
#include "chronos/core.hpp"

namespace chronos::harness {

/// y1' = p0 y1 - p1 y1 y2,  y2' = -p2 y2 + p3 y1 y2,  g = 0.5 |1 - y(tf)|^2.
struct LotkaVolterraProblem {
  StateVector p = (StateVector(4) << 1.5, 1.0, 3.0, 1.0).finished();
  StateVector y0 = StateVector::Ones(2);
  double t0 = 0.0;
  double tf = 10.0;

  [[nodiscard]] adjoint::ParameterizedOdeSystem system() const;
  [[nodiscard]] adjoint::CostFunction cost() const;
  /// Linear and bilinear terms as separate partitions, with p fixed.
  [[nodiscard]] PartitionedOdeSystem split() const;
};

/// (|x| - |x_ref|) / |x_ref|, 2-norms.
double norm_difference_error(const StateVector& x, const StateVector& x_ref);

struct FdCheck {
  double max_rel_error_y0 = 0.0;
  double max_rel_error_p = 0.0;
};

/// Central differences of g(y(tf)) through the discrete forward map with step
/// delta, against the discrete adjoint gradients. Errors are relative to the
/// 2-norm of each gradient.
FdCheck adjoint_fd_check(const LotkaVolterraProblem& lv, const erk::ButcherTable& table, double h,
                         double delta);

}  // namespace chronos::harness

#include "chronos/harness/lotka_volterra.hpp"

#include <cmath>

namespace chronos::harness {

namespace {
constexpr const char* kModule = "harness";

Eigen::Matrix2d jac_y(const StateVector& y, const StateVector& p) {
  Eigen::Matrix2d J;
  J << p[0] - p[1] * y[1], -p[1] * y[0],
       p[3] * y[1], -p[2] + p[3] * y[0];
  return J;
}

Eigen::Matrix<double, 2, 4> jac_p(const StateVector& y) {
  Eigen::Matrix<double, 2, 4> J;
  J << y[0], -y[0] * y[1], 0.0, 0.0,
       0.0, 0.0, -y[1], y[0] * y[1];
  return J;
}
}  // namespace

adjoint::ParameterizedOdeSystem LotkaVolterraProblem::system() const {
  adjoint::ParameterizedOdeSystem s;
  s.dimension = 2;
  s.n_params = 4;
  s.rhs = [](double, const StateVector& y, const StateVector& p, StateVector& d) {
    d[0] = p[0] * y[0] - p[1] * y[0] * y[1];
    d[1] = -p[2] * y[1] + p[3] * y[0] * y[1];
  };
  s.vjp_y = [](double, const StateVector& y, const StateVector& p, const StateVector& v,
               StateVector& out) { out = jac_y(y, p).transpose() * v; };
  s.vjp_p = [](double, const StateVector& y, const StateVector&, const StateVector& v,
               StateVector& out) { out = jac_p(y).transpose() * v; };
  return s;
}

adjoint::CostFunction LotkaVolterraProblem::cost() const {
  adjoint::CostFunction c;
  c.g = [](double, const StateVector& y, const StateVector&) {
    return 0.5 * (StateVector::Ones(y.size()) - y).squaredNorm();
  };
  c.dg_dy = [](double, const StateVector& y, const StateVector&) {
    return StateVector(y - StateVector::Ones(y.size()));
  };
  return c;
}

PartitionedOdeSystem LotkaVolterraProblem::split() const {
  const StateVector pp = p;
  RhsFn linear = [pp](double, const StateVector& y, StateVector& d) {
    d[0] = pp[0] * y[0];
    d[1] = -pp[2] * y[1];
  };
  RhsFn bilinear = [pp](double, const StateVector& y, StateVector& d) {
    d[0] = -pp[1] * y[0] * y[1];
    d[1] = pp[3] * y[0] * y[1];
  };
  return {2, {linear, bilinear}};
}

double norm_difference_error(const StateVector& x, const StateVector& x_ref) {
  const double r = x_ref.norm();
  CHRONOS_REQUIRE(r > 0.0, errc::kIllegalInput, "reference has zero norm");
  return (x.norm() - r) / r;
}

FdCheck adjoint_fd_check(const LotkaVolterraProblem& lv, const erk::ButcherTable& table, double h,
                         double delta) {
  CHRONOS_REQUIRE(delta > 0.0, errc::kIllegalInput, "delta must be positive");
  const auto sys = lv.system();
  const auto cost = lv.cost();
  const auto r = adjoint::adjoint_solve(table, sys, lv.p, cost, lv.t0, lv.tf, h, lv.y0, 2);
  auto g_at = [&](const StateVector& p, const StateVector& y0) {
    adjoint::CheckpointStore store(1L << 40);
    const auto f = adjoint::forward_with_checkpoints(table, sys, p, lv.t0, lv.tf, h, y0, store);
    return cost.g(lv.tf, f.y_final, p);
  };
  StateVector fd_y0(lv.y0.size()), fd_p(lv.p.size());
  for (Index i = 0; i < lv.y0.size(); ++i) {
    StateVector e = StateVector::Zero(lv.y0.size());
    e[i] = delta;
    fd_y0[i] = (g_at(lv.p, lv.y0 + e) - g_at(lv.p, lv.y0 - e)) / (2 * delta);
  }
  for (Index i = 0; i < lv.p.size(); ++i) {
    StateVector e = StateVector::Zero(lv.p.size());
    e[i] = delta;
    fd_p[i] = (g_at(lv.p + e, lv.y0) - g_at(lv.p - e, lv.y0)) / (2 * delta);
  }
  return {(r.dg_dy0 - fd_y0).norm() / fd_y0.norm(), (r.dg_dp - fd_p).norm() / fd_p.norm()};
}

}  // namespace chronos::harness

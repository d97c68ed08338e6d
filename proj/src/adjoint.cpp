#include "chronos/adjoint.hpp"

#include <cmath>

namespace chronos::adjoint {

namespace {
constexpr const char* kModule = "adjoint";

RhsFn bound_rhs(const ParameterizedOdeSystem& sys, const StateVector& p) {
  return [&sys, &p](double t, const StateVector& y, StateVector& ydot) { sys.rhs(t, y, p, ydot); };
}
}  // namespace

void ParameterizedOdeSystem::validate() const {
  CHRONOS_REQUIRE(dimension > 0, errc::kIllegalInput, "dimension must be positive");
  CHRONOS_REQUIRE(n_params >= 0, errc::kIllegalInput, "n_params must be non-negative");
  CHRONOS_REQUIRE(static_cast<bool>(rhs), errc::kIllegalInput, "rhs is not set");
  CHRONOS_REQUIRE(static_cast<bool>(vjp_y), errc::kIllegalInput, "vjp_y is not set");
  CHRONOS_REQUIRE(n_params == 0 || static_cast<bool>(vjp_p), errc::kIllegalInput,
                  "vjp_p is not set");
}

OdeSystem ParameterizedOdeSystem::bind(const StateVector& p) const {
  OdeSystem s;
  s.dimension = dimension;
  s.rhs = [f = rhs, p](double t, const StateVector& y, StateVector& ydot) { f(t, y, p, ydot); };
  return s;
}

CheckpointStore::CheckpointStore(long interval) : interval_(interval) {
  CHRONOS_REQUIRE(interval >= 1, errc::kIllegalInput, "checkpoint interval must be positive");
}

bool CheckpointStore::wants(long step, long final_step) const {
  return step % interval_ == 0 || step == final_step;
}

void CheckpointStore::store(long step, double t, const StateVector& y) {
  points_[step] = Checkpoint{step, t, y};
}

const Checkpoint& CheckpointStore::at(long step) const {
  auto it = points_.find(step);
  CHRONOS_REQUIRE(it != points_.end(), errc::kOutOfRange, "no checkpoint at that step");
  return it->second;
}

const Checkpoint& CheckpointStore::at_or_before(long step) const {
  auto it = points_.upper_bound(step);
  CHRONOS_REQUIRE(it != points_.begin(), errc::kOutOfRange, "no checkpoint at or before step");
  return std::prev(it)->second;
}

std::vector<long> CheckpointStore::indices() const {
  std::vector<long> out;
  out.reserve(points_.size());
  for (const auto& kv : points_) out.push_back(kv.first);
  return out;
}

StepGrid::StepGrid(double t0_, double tf_, double h_) : t0(t0_), tf(tf_), h(h_) {
  CHRONOS_REQUIRE(h > 0.0 && std::isfinite(h), errc::kIllegalInput, "h must be positive");
  CHRONOS_REQUIRE(tf > t0, errc::kIllegalInput, "need tf > t0");
  steps = static_cast<long>(std::ceil((tf - t0) / h * (1.0 - 1e-12)));
  if (steps < 1) steps = 1;
}

double StepGrid::time(long n) const {
  return n >= steps ? tf : t0 + static_cast<double>(n) * h;
}

ForwardResult forward_with_checkpoints(const erk::ButcherTable& table,
                                       const ParameterizedOdeSystem& system,
                                       const StateVector& p, double t0, double tf, double h,
                                       const StateVector& y0, CheckpointStore& store) {
  table.validate();
  system.validate();
  CHRONOS_REQUIRE(y0.size() == system.dimension, errc::kDimensionMismatch,
                  "y0 length differs from the system dimension");
  CHRONOS_REQUIRE(p.size() == system.n_params, errc::kDimensionMismatch,
                  "parameter length differs from n_params");
  const StepGrid grid(t0, tf, h);
  const RhsFn rhs = bound_rhs(system, p);
  erk::ErkWorkspace ws;
  store.clear();
  ForwardResult r;
  r.y_final = y0;
  StateVector y_next(y0.size());
  store.store(0, t0, y0);
  for (long n = 0; n < grid.steps; ++n) {
    erk::erk_step(table, rhs, grid.time(n), r.y_final, grid.width(n), ws, y_next);
    r.y_final.swap(y_next);
    if (store.wants(n + 1, grid.steps)) store.store(n + 1, grid.time(n + 1), r.y_final);
  }
  r.steps = grid.steps;
  return r;
}

void adjoint_step(const erk::ButcherTable& table, const ParameterizedOdeSystem& system,
                  const StateVector& p, double t, const StateVector& y_start, double h,
                  AdjointState& state, AdjointWorkspace& ws) {
  const int s = table.stages();
  const Index n = system.dimension;
  const Index np = system.n_params;
  CHRONOS_REQUIRE(state.lambda.size() == n && state.mu.size() == np, errc::kDimensionMismatch,
                  "adjoint state has the wrong size");

  ws.erk.keep_stages = true;
  erk::erk_step(table, bound_rhs(system, p), t, y_start, h, ws.erk, ws.y_next);

  ws.Lambda.setZero(n, s);
  StateVector dmu = StateVector::Zero(np);
  for (int i = s - 1; i >= 0; --i) {
    const double ti = t + table.c[i] * h;
    const StateVector zi = ws.erk.stages.col(i);
    // b_i lambda_{n+1} + sum_{j>i} a_{j,i} Lambda_j
    ws.w = table.b[i] * state.lambda;
    for (int j = i + 1; j < s; ++j) {
      if (table.A(j, i) != 0.0) ws.w.noalias() += table.A(j, i) * ws.Lambda.col(j);
    }
    system.vjp_y(ti, zi, p, ws.w, ws.out_y);
    CHRONOS_CHECK_FULL(ws.out_y.size() == n, errc::kDimensionMismatch,
                       "vjp_y returned a vector of the wrong length");
    ws.Lambda.col(i) = h * ws.out_y;
    if (np > 0) {
      // the parameter sum starts at j = i; a_{i,i} is zero for explicit tables
      ws.w.noalias() += table.A(i, i) * ws.Lambda.col(i);
      system.vjp_p(ti, zi, p, ws.w, ws.out_p);
      CHRONOS_CHECK_FULL(ws.out_p.size() == np, errc::kDimensionMismatch,
                         "vjp_p returned a vector of the wrong length");
      dmu.noalias() += h * ws.out_p;
    }
  }
  state.lambda.noalias() += ws.Lambda.rowwise().sum();
  state.mu += dmu;
}

AdjointState adjoint_step(const erk::ButcherTable& table, const ParameterizedOdeSystem& system,
                          const StateVector& p, double t, const StateVector& y_start,
                          const StateVector& lambda_in, const StateVector& mu_in, double h) {
  table.validate();
  system.validate();
  CHRONOS_REQUIRE(h > 0.0, errc::kIllegalInput, "h must be positive");
  CHRONOS_REQUIRE(y_start.size() == system.dimension, errc::kDimensionMismatch,
                  "state length differs from the system dimension");
  AdjointState st{lambda_in, mu_in};
  AdjointWorkspace ws;
  adjoint_step(table, system, p, t, y_start, h, st, ws);
  return st;
}

AdjointResult adjoint_solve(const erk::ButcherTable& table, const ParameterizedOdeSystem& system,
                            const StateVector& p, const CostFunction& cost, double t0, double tf,
                            double h, const StateVector& y0, long store_interval) {
  CHRONOS_REQUIRE(cost.g && cost.dg_dy, errc::kIllegalInput, "cost function is incomplete");
  CheckpointStore store(store_interval);
  const ForwardResult fwd = forward_with_checkpoints(table, system, p, t0, tf, h, y0, store);
  const StepGrid grid(t0, tf, h);

  AdjointResult r;
  r.y_final = fwd.y_final;
  r.steps = fwd.steps;
  r.checkpoints = store.size();
  r.g = cost.g(tf, fwd.y_final, p);

  AdjointState st;
  st.lambda = cost.dg_dy(tf, fwd.y_final, p);
  st.mu = cost.dg_dp ? cost.dg_dp(tf, fwd.y_final, p) : StateVector::Zero(system.n_params);
  CHRONOS_REQUIRE(st.lambda.size() == system.dimension && st.mu.size() == system.n_params,
                  errc::kDimensionMismatch, "cost gradient has the wrong size");

  const RhsFn rhs = bound_rhs(system, p);
  AdjointWorkspace ws;
  erk::ErkWorkspace fws;
  std::vector<StateVector> segment;  // states segment_start .. segment_start + size - 1
  long segment_start = -1;
  for (long n = grid.steps - 1; n >= 0; --n) {
    if (segment_start < 0 || n < segment_start) {
      const Checkpoint& cp = store.at_or_before(n);
      segment_start = cp.step;
      segment.resize(static_cast<std::size_t>(n - cp.step + 1));
      segment[0] = cp.y;
      for (long m = cp.step; m < n; ++m) {
        auto& next = segment[static_cast<std::size_t>(m - cp.step + 1)];
        erk::erk_step(table, rhs, grid.time(m), segment[static_cast<std::size_t>(m - cp.step)],
                      grid.width(m), fws, next);
        ++r.recomputed_steps;
      }
    }
    const StateVector& y_n = segment[static_cast<std::size_t>(n - segment_start)];
    adjoint_step(table, system, p, grid.time(n), y_n, grid.width(n), st, ws);
  }
  r.dg_dy0 = std::move(st.lambda);
  r.dg_dp = std::move(st.mu);
  return r;
}

}  // namespace chronos::adjoint

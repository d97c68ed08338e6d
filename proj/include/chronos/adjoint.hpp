#pragma once

#include <functional>
#include <map>
#include <vector>

#include "chronos/core.hpp"
#include "chronos/erk.hpp"

namespace chronos::adjoint {

/// y' = f(t, y, p). The vjp callbacks write (df/dy)^T v and (df/dp)^T v.
struct ParameterizedOdeSystem {
  using Rhs = std::function<void(double t, const StateVector& y, const StateVector& p,
                                 StateVector& ydot)>;
  using Vjp = std::function<void(double t, const StateVector& y, const StateVector& p,
                                 const StateVector& v, StateVector& out)>;

  Index dimension = 0;
  Index n_params = 0;
  Rhs rhs;
  Vjp vjp_y;
  Vjp vjp_p;

  void validate() const;
  /// The rhs with p fixed; p is copied.
  [[nodiscard]] OdeSystem bind(const StateVector& p) const;
};

struct AdjointState {
  StateVector lambda;
  StateVector mu;
};

struct Checkpoint {
  long step = 0;
  double t = 0.0;
  StateVector y;
};

/// In-memory snapshots of step-start states at every interval-th step, plus
/// step 0 and the final step.
class CheckpointStore {
 public:
  explicit CheckpointStore(long interval = 1);

  [[nodiscard]] long interval() const { return interval_; }
  [[nodiscard]] bool wants(long step, long final_step) const;
  void store(long step, double t, const StateVector& y);
  void clear() { points_.clear(); }

  [[nodiscard]] std::size_t size() const { return points_.size(); }
  [[nodiscard]] bool contains(long step) const { return points_.count(step) != 0; }
  [[nodiscard]] const Checkpoint& at(long step) const;
  /// The checkpoint with the largest index not above step.
  [[nodiscard]] const Checkpoint& at_or_before(long step) const;
  [[nodiscard]] std::vector<long> indices() const;

 private:
  long interval_;
  std::map<long, Checkpoint> points_;
};

/// g(t_f, y, p) and its gradients.
struct CostFunction {
  std::function<double(double t, const StateVector& y, const StateVector& p)> g;
  std::function<StateVector(double t, const StateVector& y, const StateVector& p)> dg_dy;
  std::function<StateVector(double t, const StateVector& y, const StateVector& p)> dg_dp;
};

/// Fixed step grid: N = ceil((tf - t0) / h) steps (within roundoff), step n
/// ends at t0 + n h except the last, which ends at tf.
struct StepGrid {
  double t0 = 0.0;
  double tf = 0.0;
  double h = 0.0;
  long steps = 0;

  StepGrid(double t0, double tf, double h);
  [[nodiscard]] double time(long n) const;
  [[nodiscard]] double width(long n) const { return n + 1 < steps ? h : tf - time(n); }
};

struct ForwardResult {
  StateVector y_final;
  long steps = 0;
};

ForwardResult forward_with_checkpoints(const erk::ButcherTable& table,
                                       const ParameterizedOdeSystem& system,
                                       const StateVector& p, double t0, double tf, double h,
                                       const StateVector& y0, CheckpointStore& store);

/// Scratch space for adjoint_step.
struct AdjointWorkspace {
  erk::ErkWorkspace erk;
  StateVector y_next;
  Eigen::MatrixXd Lambda;  ///< one column per stage
  StateVector w;
  StateVector out_y;
  StateVector out_p;
};

/// Reverse sweep over one step starting at (t, y_start) of width h. Stage
/// values are regenerated from y_start.
void adjoint_step(const erk::ButcherTable& table, const ParameterizedOdeSystem& system,
                  const StateVector& p, double t, const StateVector& y_start, double h,
                  AdjointState& state, AdjointWorkspace& ws);

AdjointState adjoint_step(const erk::ButcherTable& table, const ParameterizedOdeSystem& system,
                          const StateVector& p, double t, const StateVector& y_start,
                          const StateVector& lambda_in, const StateVector& mu_in, double h);

struct AdjointResult {
  double g = 0.0;
  StateVector y_final;
  StateVector dg_dy0;
  StateVector dg_dp;
  long steps = 0;
  long recomputed_steps = 0;
  std::size_t checkpoints = 0;
};

/// Forward pass with checkpoints every store_interval steps, then the
/// backward sweep. Missing step-start states are recomputed one checkpoint
/// segment at a time.
AdjointResult adjoint_solve(const erk::ButcherTable& table, const ParameterizedOdeSystem& system,
                            const StateVector& p, const CostFunction& cost, double t0, double tf,
                            double h, const StateVector& y0, long store_interval = 1);

}  // namespace chronos::adjoint

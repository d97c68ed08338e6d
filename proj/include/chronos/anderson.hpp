#pragma once

#include <Eigen/Core>

#include <functional>
#include <vector>

#include "chronos/core.hpp"

namespace chronos::anderson {

struct FixedPointProblem {
  Index dimension = 0;
  std::function<void(const StateVector& u, StateVector& g)> G;

  void validate() const;
};

/// Thin QR factors of the residual-difference matrix, columns oldest first.
struct QrFactors {
  Eigen::MatrixXd Q;  ///< n x k
  Eigen::MatrixXd R;  ///< k x k, upper triangular

  [[nodiscard]] Index cols() const { return R.cols(); }
};

/// Appends a column: modified Gram-Schmidt with one reorthogonalization pass.
void qr_insert(QrFactors& qr, const StateVector& column);
/// Deletes column index and restores the triangle with Givens rotations.
void qr_remove(QrFactors& qr, Index index);

/// Difference histories and the QR factors of dF, kept in step.
struct AaWorkspace {
  Index n = 0;
  QrFactors qr;
  Eigen::MatrixXd dU;
  Eigen::MatrixXd dG;
  Eigen::MatrixXd dF;

  void reset(Index n);
  [[nodiscard]] Index depth() const { return qr.cols(); }
  void insert(const StateVector& df, const StateVector& du, const StateVector& dg);
  void remove(Index index);
};

/// Q^T f, one entry per history column. ||f||^2 - ||Q^T f||^2 is the squared
/// residual of the least-squares problem.
StateVector aa_gain_inputs(const AaWorkspace& ws, const StateVector& f);

/// Returns the damping factor in (0, 1] for this iteration. qt_f is Q^T f_k.
/// User data is carried by the closure.
using DampingFn = std::function<double(long iter, const StateVector& u, const StateVector& g,
                                       const StateVector& qt_f, long depth)>;

struct DepthDecision {
  long new_depth = 0;
  /// One flag per history column (oldest first); empty means none flagged.
  std::vector<bool> remove;
};

/// df holds the residual differences column-wise, oldest first, and R the
/// matching triangular factor.
using DepthFn = std::function<DepthDecision(
    long iter, const StateVector& u, const StateVector& g, const StateVector& f,
    const Eigen::MatrixXd& df, const Eigen::MatrixXd& R, long depth)>;

struct AndersonConfig {
  long max_depth = 0;
  /// Iterations of plain damped fixed-point before acceleration starts.
  long delay = 0;
  double damping = 1.0;
  DampingFn damping_fn;
  DepthFn depth_fn;
  long max_iters = 100;
  /// On the 2-norm of G(u) - u.
  double stop_tol = 1e-10;
  /// Oldest columns are dropped while max|R_ii| / min|R_ii| exceeds this.
  double cond_limit = 1e14;
  const Logger* logger = nullptr;

  void validate() const;
};

struct FixedPointResult {
  StateVector u;
  long iterations = 0;
  std::vector<double> residual_history;  ///< ||f_k|| for k = 0 .. iterations
  std::vector<double> damping_history;   ///< beta used by each update
  std::vector<long> depth_history;       ///< history columns used by each update
};

/// Raised when max_iters updates do not reach stop_tol. Carries the iterate
/// with the smallest residual.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(ErrCode err, StateVector best, double best_residual)
      : Error(std::move(err)), best_(std::move(best)), best_residual_(best_residual) {}
  [[nodiscard]] const StateVector& best_iterate() const { return best_; }
  [[nodiscard]] double best_residual() const { return best_residual_; }

 private:
  StateVector best_;
  double best_residual_;
};

/// u_{k+1} = beta (g_k - dG gamma) + (1 - beta)(u_k - dU gamma), with gamma
/// minimizing ||f_k - dF gamma||. Without history this is the damped
/// fixed-point update.
FixedPointResult fixed_point_solve(const FixedPointProblem& problem, const StateVector& u0,
                                   const AndersonConfig& cfg);

}  // namespace chronos::anderson

#include "chronos/anderson.hpp"

#include <cmath>
#include <limits>

namespace chronos::anderson {

namespace {
constexpr const char* kModule = "anderson";

void drop_column(Eigen::MatrixXd& M, Index j) {
  const Index k = M.cols();
  if (j < k - 1) M.middleCols(j, k - 1 - j) = M.rightCols(k - 1 - j).eval();
  M.conservativeResize(Eigen::NoChange, k - 1);
}

void append_column(Eigen::MatrixXd& M, Index rows, const StateVector& v) {
  M.conservativeResize(rows, M.cols() + 1);
  M.col(M.cols() - 1) = v;
}

bool ill_conditioned(const QrFactors& qr, double limit) {
  if (qr.cols() == 0) return false;
  const Eigen::VectorXd d = qr.R.diagonal().cwiseAbs();
  const double lo = d.minCoeff();
  return lo == 0.0 || d.maxCoeff() / lo > limit;
}
}  // namespace

void FixedPointProblem::validate() const {
  CHRONOS_REQUIRE(dimension > 0, errc::kIllegalInput, "dimension must be positive");
  CHRONOS_REQUIRE(static_cast<bool>(G), errc::kIllegalInput, "G is not set");
}

void qr_insert(QrFactors& qr, const StateVector& column) {
  const Index k = qr.cols();
  const Index n = column.size();
  CHRONOS_REQUIRE(k == 0 || qr.Q.rows() == n, errc::kDimensionMismatch,
                  "column length differs from the factor rows");
  StateVector v = column;
  StateVector r = StateVector::Zero(k);
  for (int pass = 0; pass < 2; ++pass) {
    for (Index j = 0; j < k; ++j) {
      const double c = qr.Q.col(j).dot(v);
      v.noalias() -= c * qr.Q.col(j);
      r[j] += c;
    }
  }
  const double nrm = v.norm();
  if (nrm > 0.0) v /= nrm;
  append_column(qr.Q, n, v);
  qr.R.conservativeResize(k + 1, k + 1);
  qr.R.row(k).setZero();
  qr.R.col(k).head(k) = r;
  qr.R(k, k) = nrm;
}

void qr_remove(QrFactors& qr, Index index) {
  const Index k = qr.cols();
  CHRONOS_REQUIRE(index >= 0 && index < k, errc::kOutOfRange, "column index out of range");
  drop_column(qr.R, index);  // k x (k-1), Hessenberg from column index on
  for (Index j = index; j < k - 1; ++j) {
    const double a = qr.R(j, j);
    const double b = qr.R(j + 1, j);
    const double rr = std::hypot(a, b);
    if (rr == 0.0) continue;
    const double c = a / rr;
    const double s = b / rr;
    for (Index col = j; col < k - 1; ++col) {
      const double x = qr.R(j, col);
      const double y = qr.R(j + 1, col);
      qr.R(j, col) = c * x + s * y;
      qr.R(j + 1, col) = -s * x + c * y;
    }
    qr.R(j + 1, j) = 0.0;
    for (Index row = 0; row < qr.Q.rows(); ++row) {
      const double x = qr.Q(row, j);
      const double y = qr.Q(row, j + 1);
      qr.Q(row, j) = c * x + s * y;
      qr.Q(row, j + 1) = -s * x + c * y;
    }
  }
  qr.R.conservativeResize(k - 1, k - 1);
  qr.Q.conservativeResize(Eigen::NoChange, k - 1);
}

void AaWorkspace::reset(Index n_) {
  n = n_;
  qr.Q.resize(n, 0);
  qr.R.resize(0, 0);
  dU.resize(n, 0);
  dG.resize(n, 0);
  dF.resize(n, 0);
}

void AaWorkspace::insert(const StateVector& df, const StateVector& du, const StateVector& dg) {
  CHRONOS_REQUIRE(df.size() == n && du.size() == n && dg.size() == n, errc::kDimensionMismatch,
                  "history column has the wrong length");
  qr_insert(qr, df);
  append_column(dF, n, df);
  append_column(dU, n, du);
  append_column(dG, n, dg);
}

void AaWorkspace::remove(Index index) {
  qr_remove(qr, index);
  drop_column(dF, index);
  drop_column(dU, index);
  drop_column(dG, index);
}

StateVector aa_gain_inputs(const AaWorkspace& ws, const StateVector& f) {
  if (ws.depth() == 0) return StateVector(0);
  return ws.qr.Q.transpose() * f;
}

void AndersonConfig::validate() const {
  CHRONOS_REQUIRE(max_depth >= 0 && delay >= 0, errc::kIllegalInput,
                  "max_depth and delay must be non-negative");
  CHRONOS_REQUIRE(damping > 0.0 && damping <= 1.0, errc::kIllegalInput,
                  "damping must lie in (0, 1]");
  CHRONOS_REQUIRE(max_iters > 0, errc::kIllegalInput, "max_iters must be positive");
  CHRONOS_REQUIRE(stop_tol >= 0.0, errc::kIllegalInput, "stop_tol must be non-negative");
  CHRONOS_REQUIRE(cond_limit > 1.0, errc::kIllegalInput, "cond_limit must exceed 1");
}

FixedPointResult fixed_point_solve(const FixedPointProblem& problem, const StateVector& u0,
                                   const AndersonConfig& cfg) {
  problem.validate();
  cfg.validate();
  const Index n = problem.dimension;
  CHRONOS_REQUIRE(u0.size() == n, errc::kDimensionMismatch, "u0 length differs from dimension");
  if (cfg.max_depth > n && cfg.logger != nullptr && cfg.logger->enabled(LogLevel::kWarning)) {
    cfg.logger->log({LogLevel::kWarning, "fixed_point_solve", "depth-exceeds-dimension",
                     {{"max_depth", cfg.max_depth}, {"n", static_cast<long long>(n)}}});
  }

  AaWorkspace ws;
  ws.reset(n);
  FixedPointResult res;
  StateVector u = u0, g(n), f(n), u_prev, g_prev, f_prev, gamma;
  StateVector best = u0;
  double best_res = std::numeric_limits<double>::infinity();

  for (long k = 0;; ++k) {
    problem.G(u, g);
    CHRONOS_CHECK_FULL(g.size() == n, errc::kDimensionMismatch, "G returned the wrong length");
    f = g - u;
    const double fn = f.norm();
    CHRONOS_REQUIRE(std::isfinite(fn), errc::kNonFinite, "non-finite residual");
    res.residual_history.push_back(fn);
    if (fn < best_res) {
      best_res = fn;
      best = u;
    }
    if (fn <= cfg.stop_tol) {
      res.u = u;
      res.iterations = k;
      return res;
    }
    if (k == cfg.max_iters) {
      throw NonConvergenceError(
          ErrCode{errc::kConvergenceFailure, "fixed-point iteration did not converge",
                  "fixed_point_solve", kModule},
          best, best_res);
    }

    const long iter = k + 1;
    const bool accelerating = cfg.max_depth > 0 && k >= cfg.delay;
    if (accelerating && k > 0) {
      if (ws.depth() == cfg.max_depth) ws.remove(0);
      ws.insert(f - f_prev, u - u_prev, g - g_prev);
      while (ill_conditioned(ws.qr, cfg.cond_limit)) {
        if (cfg.logger != nullptr && cfg.logger->enabled(LogLevel::kDebug)) {
          cfg.logger->log({LogLevel::kDebug, "fixed_point_solve", "drop-oldest",
                           {{"iter", iter}, {"depth", static_cast<long long>(ws.depth())}}});
        }
        ws.remove(0);
      }
    }
    if (accelerating && cfg.depth_fn && ws.depth() > 0) {
      const long depth = static_cast<long>(ws.depth());
      const DepthDecision d = cfg.depth_fn(iter, u, g, f, ws.dF, ws.qr.R, depth);
      CHRONOS_REQUIRE(d.new_depth >= 0 && d.new_depth <= depth, errc::kIllegalInput,
                      "depth callback returned a depth outside [0, depth]");
      CHRONOS_REQUIRE(d.remove.empty() || static_cast<long>(d.remove.size()) == depth,
                      errc::kIllegalInput, "removal flags must cover every history column");
      long flagged = 0;
      for (bool b : d.remove) flagged += b ? 1 : 0;
      CHRONOS_REQUIRE(depth - flagged >= d.new_depth, errc::kIllegalInput,
                      "removal flags leave fewer columns than new_depth");
      for (long j = static_cast<long>(d.remove.size()) - 1; j >= 0; --j) {
        if (d.remove[static_cast<std::size_t>(j)]) ws.remove(j);
      }
      while (ws.depth() > d.new_depth) ws.remove(0);
    }

    double beta = cfg.damping;
    const StateVector qt_f = aa_gain_inputs(ws, f);
    if (accelerating && cfg.damping_fn) {
      beta = cfg.damping_fn(iter, u, g, qt_f, static_cast<long>(ws.depth()));
      CHRONOS_REQUIRE(beta > 0.0 && beta <= 1.0 && std::isfinite(beta), errc::kIllegalInput,
                      "damping callback returned a factor outside (0, 1]");
    }
    res.damping_history.push_back(beta);
    res.depth_history.push_back(static_cast<long>(ws.depth()));

    u_prev = u;
    g_prev = g;
    f_prev = f;
    if (ws.depth() > 0) {
      gamma = ws.qr.R.triangularView<Eigen::Upper>().solve(qt_f);
      if (beta == 1.0) {
        u = g - ws.dG * gamma;
      } else {
        u = beta * (g - ws.dG * gamma) + (1.0 - beta) * (u_prev - ws.dU * gamma);
      }
    } else if (beta == 1.0) {
      u = g;
    } else {
      u = beta * g + (1.0 - beta) * u_prev;
    }
  }
}

}  // namespace chronos::anderson

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <random>

#include "chronos/harness/experiments.hpp"
#include "chronos/sprk.hpp"

namespace chronos::harness {

namespace {
constexpr const char* kModule = "harness";

sprk::HamiltonianSystem oscillator() {
  sprk::HamiltonianSystem s;
  s.n_p = 1;
  s.n_q = 1;
  s.f1 = [](double, const StateVector& q, StateVector& f) { f[0] = -q[0]; };
  s.f2 = [](double, const StateVector& p, StateVector& f) { f[0] = p[0]; };
  return s;
}

double energy(const StateVector& p, const StateVector& q) {
  return 0.5 * (p[0] * p[0] + q[0] * q[0]);
}
}  // namespace

SprkDemoResult run_sprk_demo(const SprkDemoConfig& cfg) {
  CHRONOS_REQUIRE(cfg.h > 0.0 && cfg.steps > 0 && cfg.early_steps > 0, errc::kIllegalInput,
                  "h, steps and early_steps must be positive");
  const auto sys = oscillator();
  const StateVector p0 = StateVector::Zero(1);
  const StateVector q0 = StateVector::Ones(1);
  const double h0 = energy(p0, q0);

  SprkDemoResult res;
  for (int order : cfg.orders) {
    const auto coef = sprk::builtin_sprk(order);
    for (auto alg : {sprk::SprkAlgorithm::kStandard, sprk::SprkAlgorithm::kIncrement}) {
      SprkDemoRow row;
      row.order = order;
      row.algorithm = alg == sprk::SprkAlgorithm::kStandard ? "standard" : "increment";
      row.h = cfg.h;
      row.steps = cfg.steps;
      sprk::SprkOptions opts;
      opts.algorithm = alg;
      opts.observer = [&](long n, double, const StateVector& p, const StateVector& q) {
        const double d = std::abs(energy(p, q) - h0);
        row.max_dev = std::max(row.max_dev, d);
        if (n <= cfg.early_steps) row.max_dev_early = std::max(row.max_dev_early, d);
      };
      const auto r = sprk::sprk_evolve(coef, sys, 0.0, cfg.h, cfg.steps, p0, q0, opts);
      row.final_p = r.state.p[0];
      row.final_q = r.state.q[0];

      // The one-step map is linear here; its columns are the images of the unit vectors.
      sprk::SprkOptions plain;
      plain.algorithm = alg;
      const StateVector e1 = StateVector::Ones(1), z = StateVector::Zero(1);
      const auto a = sprk::sprk_evolve(coef, sys, 0.0, cfg.h, 1, e1, z, plain).state;
      const auto b = sprk::sprk_evolve(coef, sys, 0.0, cfg.h, 1, z, e1, plain).state;
      row.det_error = std::abs(a.p[0] * b.q[0] - b.p[0] * a.q[0] - 1.0);
      res.rows.push_back(row);
    }
  }
  return res;
}

CsvTable SprkDemoResult::table() const {
  CsvTable t({"order", "algorithm", "h", "steps", "max_dev_early", "max_dev", "det_error",
              "final_p", "final_q"});
  for (const auto& r : rows) {
    t.add_row({csv_int(r.order), r.algorithm, csv_real(r.h), csv_int(r.steps),
               csv_real(r.max_dev_early), csv_real(r.max_dev), csv_real(r.det_error),
               csv_real(r.final_p), csv_real(r.final_q)});
  }
  return t;
}

anderson::DampingFn gain_based_damping(double beta_min) {
  CHRONOS_REQUIRE(beta_min > 0.0 && beta_min <= 1.0, errc::kIllegalInput,
                  "beta_min must lie in (0, 1]");
  return [beta_min](long, const StateVector& u, const StateVector& g, const StateVector& qt_f,
                    long) {
    const double f2 = (g - u).squaredNorm();
    if (f2 == 0.0) return 1.0;
    const double theta = std::sqrt(std::max(0.0, 1.0 - qt_f.squaredNorm() / f2));
    return std::clamp(1.0 - 0.5 * theta, beta_min, 1.0);
  };
}

anderson::DepthFn diagonal_filter_depth(double rel_tol) {
  CHRONOS_REQUIRE(rel_tol >= 0.0, errc::kIllegalInput, "rel_tol must be non-negative");
  return [rel_tol](long, const StateVector&, const StateVector&, const StateVector&,
                   const Eigen::MatrixXd&, const Eigen::MatrixXd& R, long depth) {
    anderson::DepthDecision d;
    d.remove.assign(static_cast<std::size_t>(depth), false);
    const double top = R.diagonal().cwiseAbs().maxCoeff();
    long kept = depth;
    for (long j = 0; j < depth; ++j) {
      if (std::abs(R(j, j)) < rel_tol * top) {
        d.remove[static_cast<std::size_t>(j)] = true;
        --kept;
      }
    }
    d.new_depth = kept;
    return d;
  };
}

AaDemoResult run_aa_demo(const AaDemoConfig& cfg) {
  CHRONOS_REQUIRE(cfg.n > 0, errc::kIllegalInput, "n must be positive");
  std::mt19937_64 gen(cfg.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform(-0.95, 0.95);
  Eigen::MatrixXd X(cfg.n, cfg.n);
  for (Index i = 0; i < X.rows(); ++i)
    for (Index j = 0; j < X.cols(); ++j) X(i, j) = normal(gen);
  const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(X).householderQ();
  StateVector lambda(cfg.n), c(cfg.n);
  for (Index i = 0; i < lambda.size(); ++i) lambda[i] = uniform(gen);
  for (Index i = 0; i < c.size(); ++i) c[i] = normal(gen);
  const Eigen::MatrixXd A = Q * lambda.asDiagonal() * Q.transpose();

  anderson::FixedPointProblem prob;
  prob.dimension = cfg.n;
  prob.G = [A, c](const StateVector& u, StateVector& g) {
    g = A * u + 0.04 * u.array().tanh().matrix() + c;
  };
  const StateVector u0 = StateVector::Zero(cfg.n);

  struct Variant {
    const char* name;
    long depth;
    anderson::DampingFn damping;
    anderson::DepthFn depth_fn;
  };
  const std::vector<Variant> variants = {
      {"fixed-point", 0, {}, {}},
      {"anderson", cfg.max_depth, {}, {}},
      {"anderson-gain-damping", cfg.max_depth, gain_based_damping(), {}},
      {"anderson-diagonal-filter", cfg.max_depth, {}, diagonal_filter_depth()},
  };
  AaDemoResult res;
  for (const auto& v : variants) {
    anderson::AndersonConfig ac;
    ac.max_depth = v.depth;
    ac.damping_fn = v.damping;
    ac.depth_fn = v.depth_fn;
    ac.max_iters = cfg.max_iters;
    ac.stop_tol = cfg.stop_tol;
    AaDemoRow row;
    row.variant = v.name;
    try {
      const auto r = anderson::fixed_point_solve(prob, u0, ac);
      row.iterations = r.iterations;
      row.residual = r.residual_history.back();
      row.converged = true;
    } catch (const anderson::NonConvergenceError& e) {
      row.iterations = cfg.max_iters;
      row.residual = e.best_residual();
    }
    res.rows.push_back(row);
  }
  return res;
}

CsvTable AaDemoResult::table() const {
  CsvTable t({"variant", "iterations", "residual", "converged"});
  for (const auto& r : rows) {
    t.add_row({r.variant, csv_int(r.iterations), csv_real(r.residual),
               csv_int(r.converged ? 1 : 0)});
  }
  return t;
}

}  // namespace chronos::harness

#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "chronos/adjoint.hpp"
#include "convergence.hpp"

using namespace chronos;
using namespace chronos::adjoint;

namespace {

// y' = p y, scalar
ParameterizedOdeSystem growth() {
  ParameterizedOdeSystem s;
  s.dimension = 1;
  s.n_params = 1;
  s.rhs = [](double, const StateVector& y, const StateVector& p, StateVector& d) {
    d.resize(1);
    d[0] = p[0] * y[0];
  };
  s.vjp_y = [](double, const StateVector&, const StateVector& p, const StateVector& v,
               StateVector& o) {
    o.resize(1);
    o[0] = p[0] * v[0];
  };
  s.vjp_p = [](double, const StateVector& y, const StateVector&, const StateVector& v,
               StateVector& o) {
    o.resize(1);
    o[0] = y[0] * v[0];
  };
  return s;
}

CostFunction half_square() {
  CostFunction c;
  c.g = [](double, const StateVector& y, const StateVector&) { return 0.5 * y.squaredNorm(); };
  c.dg_dy = [](double, const StateVector& y, const StateVector&) { return StateVector(y); };
  c.dg_dp = [](double, const StateVector&, const StateVector& p) {
    return StateVector(StateVector::Zero(p.size()));
  };
  return c;
}

Eigen::Matrix2d lv_jac_y(const StateVector& y, const StateVector& p) {
  Eigen::Matrix2d J;
  J << p[0] - p[1] * y[1], -p[1] * y[0], p[3] * y[1], -p[2] + p[3] * y[0];
  return J;
}

Eigen::Matrix<double, 2, 4> lv_jac_p(const StateVector& y) {
  Eigen::Matrix<double, 2, 4> J;
  J << y[0], -y[0] * y[1], 0.0, 0.0, 0.0, 0.0, -y[1], y[0] * y[1];
  return J;
}

ParameterizedOdeSystem lotka_volterra() {
  ParameterizedOdeSystem s;
  s.dimension = 2;
  s.n_params = 4;
  s.rhs = [](double, const StateVector& y, const StateVector& p, StateVector& d) {
    d.resize(2);
    d << p[0] * y[0] - p[1] * y[0] * y[1], -p[2] * y[1] + p[3] * y[0] * y[1];
  };
  s.vjp_y = [](double, const StateVector& y, const StateVector& p, const StateVector& v,
               StateVector& o) { o = lv_jac_y(y, p).transpose() * v; };
  s.vjp_p = [](double, const StateVector& y, const StateVector&, const StateVector& v,
               StateVector& o) { o = lv_jac_p(y).transpose() * v; };
  return s;
}

CostFunction lv_cost() {
  CostFunction c;
  c.g = [](double, const StateVector& y, const StateVector&) {
    return 0.5 * (StateVector::Ones(2) - y).squaredNorm();
  };
  c.dg_dy = [](double, const StateVector& y, const StateVector&) {
    return StateVector(y - StateVector::Ones(2));
  };
  c.dg_dp = [](double, const StateVector&, const StateVector&) {
    return StateVector(StateVector::Zero(4));
  };
  return c;
}

StateVector lv_params() {
  StateVector p(4);
  p << 1.5, 1.0, 3.0, 1.0;
  return p;
}

// Forward-mode sensitivities of the discrete map: S = d y_N / d [y0, p].
struct Tangent {
  StateVector y;
  Eigen::Matrix<double, 2, 6> S;
};

Tangent tangent_linear(const erk::ButcherTable& tb, const StateVector& p, double tf, double h) {
  Tangent r;
  r.y = StateVector::Ones(2);
  r.S.setZero();
  r.S.block<2, 2>(0, 0).setIdentity();
  const long N = static_cast<long>(std::ceil(tf / h * (1.0 - 1e-12)));
  const int s = tb.stages();
  const auto sys = lotka_volterra();
  for (long n = 0; n < N; ++n) {
    const double hs = (n == N - 1) ? tf - n * h : h;
    std::vector<StateVector> k(s);
    std::vector<Eigen::Matrix<double, 2, 6>> dk(s);
    for (int i = 0; i < s; ++i) {
      StateVector z = r.y;
      Eigen::Matrix<double, 2, 6> dz = r.S;
      for (int j = 0; j < i; ++j) {
        z += hs * tb.A(i, j) * k[j];
        dz += hs * tb.A(i, j) * dk[j];
      }
      sys.rhs(0.0, z, p, k[i]);
      dk[i] = lv_jac_y(z, p) * dz;
      dk[i].block<2, 4>(0, 2) += lv_jac_p(z);
    }
    for (int i = 0; i < s; ++i) {
      r.y += hs * tb.b[i] * k[i];
      r.S += hs * tb.b[i] * dk[i];
    }
  }
  return r;
}

double paper_metric(const StateVector& x, const StateVector& ref) {
  return std::abs((x.norm() - ref.norm()) / ref.norm());
}

}  // namespace

TEST_CASE("forward Euler hand example") {
  const auto sys = growth();
  StateVector p(1), y0(1), lam(1), mu(1);
  p << 0.5;
  y0 << 2.0;
  const auto euler = erk::builtin_table("euler");
  CheckpointStore store(1);
  const auto fwd = forward_with_checkpoints(euler, sys, p, 0.0, 0.1, 0.1, y0, store);
  CHECK(fwd.steps == 1);
  CHECK(fwd.y_final[0] == doctest::Approx(2.1).epsilon(1e-15));

  lam << fwd.y_final[0];
  mu << 0.0;
  const auto st = adjoint_step(euler, sys, p, 0.0, y0, lam, mu, 0.1);
  CHECK(st.lambda[0] == doctest::Approx(2.205).epsilon(1e-15));
  CHECK(st.mu[0] == doctest::Approx(0.42).epsilon(1e-15));

  const auto r = adjoint_solve(euler, sys, p, half_square(), 0.0, 0.1, 0.1, y0);
  CHECK(r.g == doctest::Approx(0.5 * 2.1 * 2.1).epsilon(1e-15));
  CHECK(r.dg_dy0[0] == doctest::Approx(2.205).epsilon(1e-15));
  CHECK(r.dg_dp[0] == doctest::Approx(0.42).epsilon(1e-15));
}

TEST_CASE("adjoint step linearity and parameter independence") {
  const auto sys = lotka_volterra();
  const StateVector p = lv_params();
  const StateVector y = StateVector::Constant(2, 0.7);
  const auto rk4 = erk::builtin_table("rk4");
  const auto zero = adjoint_step(rk4, sys, p, 0.0, y, StateVector::Zero(2), StateVector::Zero(4), 0.1);
  CHECK(zero.lambda.cwiseAbs().maxCoeff() == 0.0);
  CHECK(zero.mu.cwiseAbs().maxCoeff() == 0.0);

  StateVector l1(2), l2(2);
  l1 << 1.0, -2.0;
  l2 << 0.3, 0.5;
  const auto a = adjoint_step(rk4, sys, p, 0.0, y, l1, StateVector::Zero(4), 0.1);
  const auto b = adjoint_step(rk4, sys, p, 0.0, y, l2, StateVector::Zero(4), 0.1);
  const auto ab = adjoint_step(rk4, sys, p, 0.0, y, 2.0 * l1 + l2, StateVector::Zero(4), 0.1);
  CHECK((ab.lambda - 2.0 * a.lambda - b.lambda).norm() <= 1e-14);
  CHECK((ab.mu - 2.0 * a.mu - b.mu).norm() <= 1e-14);

  // f independent of p: nu = 0, mu passes through
  ParameterizedOdeSystem free = sys;
  free.vjp_p = [](double, const StateVector&, const StateVector&, const StateVector&,
                  StateVector& o) { o = StateVector::Zero(4); };
  StateVector mu_in(4);
  mu_in << 1.0, 2.0, 3.0, 4.0;
  const auto c = adjoint_step(rk4, free, p, 0.0, y, l1, mu_in, 0.1);
  CHECK(c.mu == mu_in);
}

TEST_CASE("zero gradient at the cost minimum") {
  // p = 0 keeps y = 1 exactly, where g = 1/2 |1 - y|^2 is minimal
  auto sys = growth();
  CostFunction c;
  c.g = [](double, const StateVector& y, const StateVector&) {
    return 0.5 * (StateVector::Ones(1) - y).squaredNorm();
  };
  c.dg_dy = [](double, const StateVector& y, const StateVector&) {
    return StateVector(y - StateVector::Ones(1));
  };
  StateVector p = StateVector::Zero(1), y0 = StateVector::Ones(1);
  const auto r = adjoint_solve(erk::builtin_table("rk4"), sys, p, c, 0.0, 2.0, 0.1, y0, 3);
  CHECK(r.y_final[0] == 1.0);
  CHECK(r.g == 0.0);
  CHECK(r.dg_dy0.norm() == 0.0);
  CHECK(r.dg_dp.norm() == 0.0);
}

TEST_CASE("two Euler steps match the closed-form discrete map") {
  const auto sys = growth();
  StateVector p(1), y0(1);
  p << 0.7;
  y0 << 1.3;
  const double h = 0.25;
  const auto r = adjoint_solve(erk::builtin_table("euler"), sys, p, half_square(), 0.0, 0.5, h, y0);
  const double yN = y0[0] * (1 + h * p[0]) * (1 + h * p[0]);
  CHECK(r.steps == 2);
  CHECK(std::abs(r.y_final[0] - yN) <= 1e-14);
  CHECK(std::abs(r.dg_dy0[0] - yN * (1 + h * p[0]) * (1 + h * p[0])) <= 1e-14);
  // d yN / dp = 2 y0 h (1 + h p)
  CHECK(std::abs(r.dg_dp[0] - yN * 2 * y0[0] * h * (1 + h * p[0])) <= 1e-14);
}

TEST_CASE("checkpoint store policy") {
  const auto sys = growth();
  StateVector p(1), y0(1);
  p << -0.5;
  y0 << 1.0;
  const auto rk4 = erk::builtin_table("rk4");
  CheckpointStore every(1);
  auto f = forward_with_checkpoints(rk4, sys, p, 0.0, 1.0, 0.1, y0, every);
  CHECK(f.steps == 10);
  CHECK(every.size() == 11);

  CheckpointStore two(2);
  forward_with_checkpoints(rk4, sys, p, 0.0, 1.0, 0.1, y0, two);
  CHECK(two.indices() == std::vector<long>{0, 2, 4, 6, 8, 10});

  CheckpointStore three(3);
  f = forward_with_checkpoints(rk4, sys, p, 0.0, 1.0, 0.1, y0, three);
  CHECK(three.indices() == std::vector<long>{0, 3, 6, 9, 10});
  CHECK(three.at(0).y == y0);
  CHECK(three.at(10).y == f.y_final);
  CHECK(three.at(6).t == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(three.at_or_before(8).step == 6);
  CHECK_THROWS_AS((void)three.at(5), Error);
  CHECK_THROWS_AS(CheckpointStore(0), Error);

  // forward pass equals the plain fixed-step integrator, truncated last step included
  long n = 0;
  const StateVector plain = erk::erk_fixed(rk4, sys.bind(p), 0.0, 1.05, 0.1, y0, &n);
  CheckpointStore s(4);
  f = forward_with_checkpoints(rk4, sys, p, 0.0, 1.05, 0.1, y0, s);
  CHECK(f.steps == n);
  CHECK(f.y_final == plain);
}

TEST_CASE("checkpoint interval does not change the result") {
  const auto sys = lotka_volterra();
  const StateVector p = lv_params();
  const StateVector y0 = StateVector::Ones(2);
  const auto tb = erk::builtin_table("rk4");
  const auto ref = adjoint_solve(tb, sys, p, lv_cost(), 0.0, 10.0, 0.01, y0, 1);
  CHECK(ref.recomputed_steps == 0);
  for (long k : {2L, 5L, 7L}) {
    const auto r = adjoint_solve(tb, sys, p, lv_cost(), 0.0, 10.0, 0.01, y0, k);
    CHECK((r.dg_dy0 - ref.dg_dy0).norm() <= 1e-13 * ref.dg_dy0.norm());
    CHECK((r.dg_dp - ref.dg_dp).norm() <= 1e-13 * ref.dg_dp.norm());
    CHECK(r.y_final == ref.y_final);
    CHECK(r.recomputed_steps > 0);
    CHECK(r.recomputed_steps < r.steps);
  }
}

TEST_CASE("gradients are exact for the discrete map") {
  const auto sys = lotka_volterra();
  const StateVector p = lv_params();
  const auto cost = lv_cost();
  for (const char* name : {"heun", "bs3", "rk4", "dopri5"}) {
    const auto tb = erk::builtin_table(name);
    // the parameter sum in the adjoint starts at the diagonal, which is zero
    CHECK(tb.A.diagonal().cwiseAbs().maxCoeff() == 0.0);
    const auto r = adjoint_solve(tb, sys, p, cost, 0.0, 3.0, 0.03, StateVector::Ones(2), 2);
    const Tangent tl = tangent_linear(tb, p, 3.0, 0.03);
    CHECK((r.y_final - tl.y).norm() <= 1e-13);
    const Eigen::Matrix<double, 1, 6> grad = (tl.y - StateVector::Ones(2)).transpose() * tl.S;
    for (int i = 0; i < 2; ++i) CHECK(r.dg_dy0[i] == doctest::Approx(grad(i)).epsilon(1e-12));
    for (int i = 0; i < 4; ++i) CHECK(r.dg_dp[i] == doctest::Approx(grad(2 + i)).epsilon(1e-12));
  }
}

TEST_CASE("vjp callbacks are transposes of finite-difference jvps") {
  const auto sys = lotka_volterra();
  const StateVector p = lv_params();
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    StateVector y(2), v(2), w(2), wp(4);
    y << 1.0 + U(rng), 1.0 + U(rng);
    v << U(rng), U(rng);
    w << U(rng), U(rng);
    for (int i = 0; i < 4; ++i) wp[i] = U(rng);
    const double d = 1e-7;
    StateVector fp, fm, vjy, vjp;
    sys.rhs(0.0, y + d * w, p, fp);
    sys.rhs(0.0, y - d * w, p, fm);
    const StateVector jvp_y = (fp - fm) / (2 * d);
    sys.rhs(0.0, y, p + d * wp, fp);
    sys.rhs(0.0, y, p - d * wp, fm);
    const StateVector jvp_p = (fp - fm) / (2 * d);
    sys.vjp_y(0.0, y, p, v, vjy);
    sys.vjp_p(0.0, y, p, v, vjp);
    CHECK(vjy.dot(w) == doctest::Approx(v.dot(jvp_y)).epsilon(1e-6));
    CHECK(vjp.dot(wp) == doctest::Approx(v.dot(jvp_p)).epsilon(1e-6));
  }
}

TEST_CASE("Lotka-Volterra gradients match finite differences at h = 0.005") {
  const auto sys = lotka_volterra();
  const StateVector p = lv_params();
  const StateVector y0 = StateVector::Ones(2);
  const auto cost = lv_cost();
  const auto tb = erk::builtin_table("rk4");
  const auto r = adjoint_solve(tb, sys, p, cost, 0.0, 10.0, 0.005, y0, 2);
  const double d = 1e-6;
  auto g_at = [&](const StateVector& pp, const StateVector& yy) {
    CheckpointStore s(1000000);
    const auto f = forward_with_checkpoints(tb, sys, pp, 0.0, 10.0, 0.005, yy, s);
    return cost.g(10.0, f.y_final, pp);
  };
  for (int i = 0; i < 4; ++i) {
    StateVector e = StateVector::Zero(4);
    e[i] = d;
    const double fd = (g_at(p + e, y0) - g_at(p - e, y0)) / (2 * d);
    CHECK(std::abs(r.dg_dp[i] - fd) <= 1e-5 * std::abs(fd));
  }
  for (int i = 0; i < 2; ++i) {
    StateVector e = StateVector::Zero(2);
    e[i] = d;
    const double fd = (g_at(p, y0 + e) - g_at(p, y0 - e)) / (2 * d);
    CHECK(std::abs(r.dg_dy0[i] - fd) <= 1e-5 * std::abs(fd));
  }
}

TEST_CASE("adjoint quantities converge at the method order") {
  const auto sys = lotka_volterra();
  const StateVector p = lv_params();
  const StateVector y0 = StateVector::Ones(2);
  const auto cost = lv_cost();
  const auto ref = adjoint_solve(erk::builtin_table("butcher6"), sys, p, cost, 0.0, 10.0, 1e-4, y0, 2);
  // the decade points of the experiment that lie in the asymptotic range
  const std::vector<double> hs = {0.05, 0.005};
  for (auto [name, order] : {std::pair{"bs3", 3}, std::pair{"rk4", 4}, std::pair{"dopri5", 5}}) {
    std::vector<double> ey, ey_full, ed0, edp;
    for (double h : hs) {
      const auto r = adjoint_solve(erk::builtin_table(name), sys, p, cost, 0.0, 10.0, h, y0, 2);
      ey.push_back(paper_metric(r.y_final, ref.y_final));
      ey_full.push_back((r.y_final - ref.y_final).norm() / ref.y_final.norm());
      ed0.push_back(paper_metric(r.dg_dy0, ref.dg_dy0));
      edp.push_back(paper_metric(r.dg_dp, ref.dg_dp));
    }
    const double sy = testsupport::fitted_slope(hs, ey);
    const double sy_full = testsupport::fitted_slope(hs, ey_full);
    const double s0 = testsupport::fitted_slope(hs, ed0);
    const double sp = testsupport::fitted_slope(hs, edp);
    MESSAGE(std::string(name), ": y ", sy, " (full ", sy_full, "), dg/dy0 ", s0, ", dg/dp ", sp);
    CHECK(std::abs(s0 - order) <= 0.3);
    CHECK(std::abs(sp - order) <= 0.3);
    CHECK(std::abs(sy_full - order) <= 0.3);
    if (order > 3) {
      CHECK(std::abs(sy - order) <= 0.3);
    } else {
      // The norm difference of the forward state loses its leading term for
      // order 3 here and decays about one order faster; see the acceptance
      // report.
      CHECK(sy >= order - 0.3);
    }
  }
}

TEST_CASE("input errors") {
  const auto sys = lotka_volterra();
  const StateVector p = lv_params();
  const auto tb = erk::builtin_table("rk4");
  CheckpointStore s(1);
  CHECK_THROWS_AS(forward_with_checkpoints(tb, sys, p, 0.0, 1.0, 0.1, StateVector::Ones(3), s), Error);
  CHECK_THROWS_AS(forward_with_checkpoints(tb, sys, StateVector::Ones(2), 0.0, 1.0, 0.1,
                                           StateVector::Ones(2), s),
                  Error);
  CHECK_THROWS_AS(forward_with_checkpoints(tb, sys, p, 0.0, 1.0, -0.1, StateVector::Ones(2), s), Error);
  ParameterizedOdeSystem bad = sys;
  bad.vjp_y = nullptr;
  CHECK_THROWS_AS(bad.validate(), Error);
  ParameterizedOdeSystem wrong = sys;
  wrong.vjp_p = [](double, const StateVector&, const StateVector&, const StateVector&,
                   StateVector& o) { o = StateVector::Zero(3); };
  CHECK_THROWS_AS(adjoint_solve(tb, wrong, p, lv_cost(), 0.0, 1.0, 0.1, StateVector::Ones(2)), Error);
}

#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>
#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <vector>

#include "chronos/multirate.hpp"
#include "chronos/splitting.hpp"
#include "convergence.hpp"

using namespace chronos;
using namespace chronos::multirate;

namespace {

OdeSystem linear(const Eigen::MatrixXd& A) {
  OdeSystem s;
  s.dimension = static_cast<int>(A.rows());
  s.rhs = [A](double, const StateVector& y, StateVector& ydot) { ydot.noalias() = A * y; };
  return s;
}

ToleranceSpec tolerance(double rt) {
  ToleranceSpec tol;
  tol.reltol = rt;
  tol.abstol = 1e-2 * rt;
  return tol;
}

// y1 decays at -100 and drives y2, which relaxes at -1.
struct TwoScale {
  Eigen::MatrixXd fast = Eigen::MatrixXd::Zero(2, 2);
  Eigen::MatrixXd slow = Eigen::MatrixXd::Zero(2, 2);
  TwoScale() {
    fast(0, 0) = -100.0;
    slow(1, 0) = 1.0;
    slow(1, 1) = -1.0;
  }
  StateVector exact(double t, const StateVector& y0) const { return ((fast + slow) * t).exp() * y0; }
};

}  // namespace

TEST_CASE("decoupled update examples") {
  MultirateConfig cfg;
  cfg.slow_controller = StepController::i_controller(1.0);
  cfg.fast_controller = StepController::i_controller(1.0);
  auto u = decoupled_update(cfg, 0.4, 0.01, 1.0, 1.0, 1);
  CHECK(u.H_next == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(u.h_next == doctest::Approx(0.01).epsilon(1e-15));

  u = decoupled_update(cfg, 0.4, 0.01, 16.0, 1.0, 1);
  CHECK(u.H_next == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(u.h_next == doctest::Approx(0.01).epsilon(1e-15));

  u = decoupled_update(cfg, 0.4, 0.01, 1.0, 16.0, 1);
  CHECK(u.H_next == doctest::Approx(0.4).epsilon(1e-15));
  const double expect = 0.01 * std::pow(16.0, -1.0 / (cfg.fast_order + 1));
  CHECK(u.h_next == doctest::Approx(expect).epsilon(1e-14));
  CHECK(u.h_next < 0.01);
}

TEST_CASE("htol update examples and clamp") {
  MultirateConfig cfg;
  cfg.slow_controller = StepController::i_controller(1.0);
  auto u = htol_update(cfg, 0.3, 0.5, 1.0, 1.0, 1);
  CHECK(u.H_next == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(u.tolfac_next == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_FALSE(u.clamped_low);

  u = htol_update(cfg, 0.3, 0.5, 1.0, 16.0, 1);
  CHECK(u.tolfac_next == doctest::Approx(0.5 / 16.0).epsilon(1e-14));
  CHECK(u.H_next == doctest::Approx(0.3).epsilon(1e-15));

  // 16x shrink from 1e-4 lands below tolfac_min
  u = htol_update(cfg, 0.3, 1e-4, 1.0, 16.0, 1);
  CHECK(u.tolfac_next == cfg.tolfac_min);
  CHECK(u.clamped_low);

  auto sink = std::make_shared<std::ostringstream>();
  Logger logger;
  logger.set_max_level(LogLevel::kWarning);
  logger.set_sink(LogLevel::kWarning, sink);
  cfg.logger = &logger;
  u = htol_update(cfg, 0.3, cfg.tolfac_min, 1.0, 4.0, 1);
  CHECK(u.tolfac_next == cfg.tolfac_min);
  CHECK(sink->str().find("[WARNING]") != std::string::npos);
  CHECK(sink->str().find("tolfac-clamped") != std::string::npos);

  // growth is capped at 1
  u = htol_update(cfg, 0.3, 0.5, 1.0, 0.01, 1);
  CHECK(u.tolfac_next == 1.0);
  CHECK(u.clamped_high);
}

TEST_CASE("config validation") {
  MultirateConfig cfg;
  cfg.tolfac = 2.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = MultirateConfig{};
  cfg.splitting_order = 3;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = MultirateConfig{};
  cfg.tolfac_min = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK_NOTHROW(MultirateConfig{}.validate());
}

TEST_CASE("slow estimate: zero rhs and step-doubling slope") {
  const ToleranceSpec tol = tolerance(1e-6);
  SlowStepFn zero = [](double, double, StateVector&) {};
  StateVector y = StateVector::Constant(3, 2.0);
  const auto z = slow_error_estimate(zero, 0.0, y, 0.5, tol);
  CHECK(z.est_vector.cwiseAbs().maxCoeff() == 0.0);
  CHECK(z.est_wrms == 0.0);

  // Lie-Trotter of a forward Euler slow flow for y' = -y and a null fast flow
  OdeSystem decay = linear(-Eigen::MatrixXd::Identity(1, 1));
  auto slow = erk::ErkStepper::fixed(erk::builtin_table("euler"), decay);
  auto null = splitting::FlowStepper::plain([](double, double, StateVector&) {});
  const auto lie = splitting::lie_trotter(2);
  SlowStepFn step = [&](double t, double H, StateVector& v) {
    splitting::splitting_step(lie, {&slow, &null}, t, H, v);
  };
  std::vector<double> hs, errs;
  for (double H = 0.1; H > 0.005; H *= 0.5) {
    StateVector y0 = StateVector::Ones(1);
    StateVector kept;
    const auto e = slow_error_estimate(step, 0.0, y0, H, tol, &kept);
    CHECK(e.est_wrms >= 0.0);
    CHECK(kept(0) == doctest::Approx((1 - H / 2) * (1 - H / 2)).epsilon(1e-14));
    hs.push_back(H);
    errs.push_back(std::abs(e.est_vector(0)));
  }
  CHECK(testsupport::fitted_slope(hs, errs) >= 1.95);
}

TEST_CASE("zero fast partition reduces to single-rate integration") {
  OdeSystem slow = linear(-Eigen::MatrixXd::Identity(2, 2));
  OdeSystem fast = linear(Eigen::MatrixXd::Zero(2, 2));
  const ToleranceSpec tol = tolerance(1e-6);
  auto inner = erk::ErkStepper::adaptive(erk::builtin_table("dopri5"), fast, tol);
  MultirateConfig cfg;
  cfg.splitting_order = 1;
  StateVector y0(2);
  y0 << 1.0, -2.0;
  const auto r = multirate_evolve(cfg, slow, inner, 0.0, 3.0, y0, tol);

  // replay the accepted steps with two rk4 half steps each
  auto rk4 = erk::ErkStepper::fixed(erk::builtin_table("rk4"), slow, 2);
  StateVector y = y0;
  double t = 0.0;
  for (double H : r.stats.H_history) {
    rk4.evolve(t, t + H, y);
    t += H;
  }
  CHECK(t == doctest::Approx(3.0).epsilon(1e-12));
  CHECK((r.y - y).cwiseAbs().maxCoeff() <= 1e-13);
  CHECK(wrms_norm(r.y - y0 * std::exp(-3.0), y0 * std::exp(-3.0), tol) <= 10.0);
}

TEST_CASE("two-scale linear test meets tolerance with large slow steps") {
  const TwoScale p;
  StateVector y0 = StateVector::Ones(2);
  const double tf = 10.0;
  const StateVector ex = p.exact(tf, y0);
  const ToleranceSpec tol = tolerance(1e-4);

  std::vector<MultirateStats> stats;
  for (ControlKind kind : {ControlKind::kDecoupled, ControlKind::kStepsizeTolerance}) {
    auto inner = erk::ErkStepper::adaptive(erk::builtin_table("dopri5"), linear(p.fast), tol);
    MultirateConfig cfg;
    cfg.kind = kind;
    const auto r = multirate_evolve(cfg, linear(p.slow), inner, 0.0, tf, y0, tol);
    const double err = wrms_norm(r.y - ex, ex, tol);
    MESSAGE("kind ", static_cast<int>(kind), ": err ", err, ", mean H ", r.stats.mean_H(),
            ", mean h ", r.stats.mean_inner_h());
    CHECK(err <= 10.0);
    CHECK(r.stats.mean_H() >= 10.0 * r.stats.mean_inner_h());
    CHECK(r.stats.max_accepted_est <= 1.0);
    CHECK(r.stats.H_history.size() == static_cast<std::size_t>(r.stats.slow_steps));
    stats.push_back(r.stats);
  }
  // decoupled leaves tolfac at 1; the stepsize-tolerance family moves it
  const auto& dec = stats[0].tolfac_history;
  const auto& htol = stats[1].tolfac_history;
  CHECK(std::all_of(dec.begin(), dec.end(), [](double f) { return f == 1.0; }));
  CHECK(*std::min_element(htol.begin(), htol.end()) < 1.0);
  CHECK(stats[0].inner_steps != stats[1].inner_steps);
}

TEST_CASE("error decreases with the requested tolerance") {
  const TwoScale p;
  StateVector y0 = StateVector::Ones(2);
  const StateVector ex = p.exact(5.0, y0);
  double prev = 1e300;
  for (double rt : {1e-3, 1e-5, 1e-7}) {
    const ToleranceSpec tol = tolerance(rt);
    auto inner = erk::ErkStepper::adaptive(erk::builtin_table("dopri5"), linear(p.fast), tol);
    const auto r = multirate_evolve(MultirateConfig{}, linear(p.slow), inner, 0.0, 5.0, y0, tol);
    const double err = (r.y - ex).norm();
    CHECK(err < prev);
    CHECK(wrms_norm(r.y - ex, ex, tol) <= 10.0);
    prev = err;
  }
}

TEST_CASE("telescoping three-scale configuration converges") {
  Eigen::MatrixXd A1 = Eigen::MatrixXd::Zero(3, 3), A2 = A1, A3 = A1;
  A1(0, 0) = -100.0;
  A2(1, 0) = 1.0;
  A2(1, 1) = -10.0;
  A3(2, 1) = 1.0;
  A3(2, 2) = -1.0;
  StateVector y0 = StateVector::Ones(3);
  const double tf = 10.0;
  const StateVector ex = ((A1 + A2 + A3) * tf).exp() * y0;

  for (ControlKind kind : {ControlKind::kDecoupled, ControlKind::kStepsizeTolerance}) {
    double prev = 1e300;
    for (double rt : {1e-3, 1e-5}) {
      const ToleranceSpec tol = tolerance(rt);
      auto inner = erk::ErkStepper::adaptive(erk::builtin_table("dopri5"), linear(A1), tol);
      MultirateConfig cfg;
      cfg.kind = kind;
      MultirateStepper mid(cfg, linear(A2), inner, tol);
      const auto r = multirate_evolve(cfg, linear(A3), mid, 0.0, tf, y0, tol);
      const double err = (r.y - ex).norm();
      CHECK(wrms_norm(r.y - ex, ex, tol) <= 10.0);
      CHECK(err < prev);
      CHECK(r.stats.mean_H() > mid.stats().mean_H());
      CHECK(mid.stats().mean_H() > mid.stats().mean_inner_h());
      prev = err;
    }
  }
}

TEST_CASE("tolfac stays in range over a long run") {
  const TwoScale p;
  const ToleranceSpec tol = tolerance(1e-4);
  auto inner = erk::ErkStepper::adaptive(erk::builtin_table("dopri5"), linear(p.fast), tol);
  auto sink = std::make_shared<std::ostringstream>();
  Logger logger;
  logger.set_max_level(LogLevel::kWarning);
  logger.set_sink(LogLevel::kWarning, sink);
  MultirateConfig cfg;
  cfg.tolfac_min = 0.05;
  cfg.H_max = 1e-3;
  cfg.logger = &logger;
  const auto r = multirate_evolve(cfg, linear(p.slow), inner, 0.0, 10.0, StateVector::Ones(2), tol);
  CHECK(r.stats.slow_steps >= 10000);
  const auto& hist = r.stats.tolfac_history;
  CHECK(hist.size() == static_cast<std::size_t>(r.stats.slow_attempts));
  CHECK(std::all_of(hist.begin(), hist.end(),
                    [&](double f) { return f >= cfg.tolfac_min && f <= 1.0; }));
  CHECK(r.stats.max_accepted_est <= 1.0);
  if (r.stats.tolfac_clamps > 0) CHECK(sink->str().find("tolfac-clamped") != std::string::npos);
}

TEST_CASE("errors") {
  const TwoScale p;
  const ToleranceSpec tol = tolerance(1e-4);
  auto inner = erk::ErkStepper::adaptive(erk::builtin_table("dopri5"), linear(p.fast), tol);
  MultirateStepper mr(MultirateConfig{}, linear(p.slow), inner, tol);
  StateVector y = StateVector::Ones(2);
  CHECK_THROWS_AS(mr.evolve(1.0, 0.0, y), Error);
  StateVector bad = StateVector::Ones(3);
  CHECK_THROWS_AS(mr.evolve(0.0, 1.0, bad), Error);

  // an inner stepper that always fails propagates after the retry limit
  OdeSystem failing;
  failing.dimension = 2;
  failing.rhs = [](double, const StateVector&, StateVector&) {
    raise(errc::kRhsFailure, "boom", __func__, "test");
  };
  auto broken = erk::ErkStepper::adaptive(erk::builtin_table("dopri5"), failing, tol);
  MultirateConfig cfg;
  cfg.max_inner_retries = 2;
  MultirateStepper mr2(cfg, linear(p.slow), broken, tol);
  CHECK_THROWS_AS(mr2.evolve(0.0, 1.0, y), Error);
  CHECK(mr2.stats().inner_failures == 3);

  MultirateConfig tiny;
  tiny.max_steps = 3;
  MultirateStepper mr3(tiny, linear(p.slow), inner, tol);
  StateVector y3 = StateVector::Ones(2);
  try {
    mr3.evolve(0.0, 10.0, y3);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == errc::kTooMuchWork);
  }
}

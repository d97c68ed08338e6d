#include <doctest.h>

#include <cmath>

#include "chronos/core.hpp"

using namespace chronos;

namespace {

StateVector vec(std::initializer_list<double> v) {
  StateVector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// Forward Euler with a Heun companion; a tiny embedded pair for driver tests.
class EulerHeun : public SingleStepMethod {
 public:
  explicit EulerHeun(OdeSystem sys) : sys_(std::move(sys)), k1_(sys_.dimension), k2_(sys_.dimension) {}
  std::string_view name() const override { return "euler-heun"; }
  int controller_order() const override { return 1; }
  Index dimension() const override { return sys_.dimension; }
  void attempt(double t, const StateVector& y, double h, StateVector& y_next,
               StateVector& err) override {
    sys_.rhs(t, y, k1_);
    y_next = y + h * k1_;
    sys_.rhs(t + h, y_next, k2_);
    evals_ += 2;
    err = 0.5 * h * (k2_ - k1_);
    y_next += err;  // local extrapolation: advance with Heun
  }
  long rhs_evaluations() const override { return evals_; }

 private:
  OdeSystem sys_;
  StateVector k1_, k2_;
  long evals_ = 0;
};

OdeSystem scalar(std::function<double(double, double)> f) {
  OdeSystem s;
  s.dimension = 1;
  s.rhs = [f](double t, const StateVector& y, StateVector& dy) { dy[0] = f(t, y[0]); };
  return s;
}

}  // namespace

TEST_CASE("wrms_norm") {
  ToleranceSpec tol;
  tol.reltol = 1e-3;
  tol.abstol = 1e-3;
  CHECK(wrms_norm(StateVector::Zero(3), vec({1, 2, 3}), tol) == 0.0);
  CHECK(wrms_norm(vec({2e-3}), vec({1.0}), tol) == doctest::Approx(1.0).epsilon(1e-15));
  tol.reltol = 123.0;
  CHECK(wrms_norm(vec({1e-3, 1e-3}), vec({0, 0}), tol) == doctest::Approx(1.0).epsilon(1e-15));

  ToleranceSpec per;
  per.reltol = 1e-6;
  per.abstol_vector = vec({1.0, 2.0});
  // sqrt((1 + 1)/2)
  CHECK(wrms_norm(vec({1.0, 2.0}), vec({0, 0}), per) == doctest::Approx(1.0));
  CHECK_THROWS_AS(wrms_norm(vec({1.0}), vec({0, 0}), tol), Error);
}

TEST_CASE("controller_next_step formula") {
  StepController c = StepController::i_controller(1.0);
  CHECK(controller_next_step(c, 0.1, 1.0, 3) == doctest::Approx(0.1));
  CHECK(controller_next_step(c, 0.1, 16.0, 1) == doctest::Approx(0.025));
  CHECK(controller_next_step(c, 0.1, 0.0, 2) == doctest::Approx(c.growth_max * 0.1));
  // Huge error: clamped at shrink_min.
  CHECK(controller_next_step(c, 1.0, 1e30, 1) == doctest::Approx(c.shrink_min));
}

TEST_CASE("controller output stays inside [shrink_min h, growth_max h]") {
  for (auto kind : {ControllerKind::kI, ControllerKind::kPI}) {
    StepController c;
    c.kind = kind;
    for (int order = 1; order <= 6; ++order) {
      for (double est : {0.0, 1e-300, 1e-12, 1e-3, 0.5, 1.0, 2.0, 1e3, 1e12, 1e300}) {
        for (double h : {1e-8, 0.3, 10.0}) {
          const double hn = controller_next_step(c, h, est, order);
          CHECK(hn >= c.shrink_min * h * (1 - 1e-15));
          CHECK(hn <= c.growth_max * h * (1 + 1e-15));
        }
      }
    }
    StepController stateful = c;
    double h = 1.0;
    stateful.next_step(h, 1e-8, 2);  // first step may use first_growth_max
    for (double est : {1e-9, 0.3, 7.0, 1e-20, 1.0, 50.0}) {
      const double hn = stateful.next_step(h, est, 2);
      CHECK(hn >= c.shrink_min * h * (1 - 1e-15));
      CHECK(hn <= c.growth_max * h * (1 + 1e-15));
      h = hn;
    }
  }
}

TEST_CASE("first step may grow by first_growth_max") {
  StepController c = StepController::i_controller(0.9);
  CHECK(c.next_step(1e-6, 0.0, 2) == doctest::Approx(1e-2));
  CHECK(c.next_step(1e-2, 0.0, 2) == doctest::Approx(1e-1));
  c.reset();
  CHECK(c.next_step(1e-6, 0.0, 2) == doctest::Approx(1e-2));
}

TEST_CASE("evolve_adaptive on y' = 0") {
  EulerHeun m(scalar([](double, double) { return 0.0; }));
  auto r = evolve_adaptive(m, StepController{}, ToleranceSpec{}, 0.0, 3.0, vec({2.5}));
  CHECK(r.y[0] == 2.5);
  CHECK(r.t == 3.0);
  CHECK(r.stats.error_rejections == 0);
}

TEST_CASE("evolve_adaptive on y' = y") {
  EulerHeun m(scalar([](double, double y) { return y; }));
  ToleranceSpec tol;
  tol.reltol = 1e-8;
  tol.abstol = 1e-12;
  auto r = evolve_adaptive(m, StepController{}, tol, 0.0, 1.0, vec({1.0}));
  CHECK(std::abs(r.y[0] - std::exp(1.0)) / std::exp(1.0) <= 1e-6);
  CHECK(r.t == 1.0);
  CHECK(r.stats.rhs_evals == 2 * r.stats.attempts);
}

TEST_CASE("stiff scalar: rejections happen and the answer stays accurate") {
  EulerHeun m(scalar([](double, double y) { return -1e6 * y; }));
  ToleranceSpec tol;
  tol.reltol = 1e-6;
  tol.abstol = 1e-10;
  EvolveOptions opts;
  opts.h0 = 1e-2;  // far above the explicit stability limit 2e-6
  auto r = evolve_adaptive(m, StepController{}, tol, 0.0, 1e-4, vec({1.0}), opts);
  CHECK(r.stats.error_rejections + r.stats.failed_steps > 0);
  CHECK(std::abs(r.y[0] - std::exp(-100.0)) <= 1e-6);
}

TEST_CASE("accepted steps never exceed the tolerance") {
  // Wrap the method to re-check every accepted candidate.
  struct Checking : EulerHeun {
    using EulerHeun::EulerHeun;
    ToleranceSpec tol;
    StateVector last_y, last_err;
    double worst = 0.0;
    void attempt(double t, const StateVector& y, double h, StateVector& yn,
                 StateVector& err) override {
      EulerHeun::attempt(t, y, h, yn, err);
      last_y = yn;
      last_err = err;
    }
    void on_accept(double, const StateVector& y, double) override {
      CHECK(y == last_y);
      worst = std::max(worst, wrms_norm(last_err, last_y, tol));
    }
  };
  Checking m(scalar([](double t, double y) { return -y + std::sin(10 * t); }));
  m.tol.reltol = 1e-5;
  m.tol.abstol = 1e-8;
  auto r = evolve_adaptive(m, StepController::pi_controller(), m.tol, 0.0, 5.0, vec({1.0}));
  CHECK(r.stats.steps > 10);
  CHECK(m.worst <= 1.0);
}

TEST_CASE("h underflow is reported") {
  // The embedded error never shrinks: est stays above 1 for every h.
  struct Hopeless : EulerHeun {
    using EulerHeun::EulerHeun;
    void attempt(double t, const StateVector& y, double h, StateVector& yn,
                 StateVector& err) override {
      EulerHeun::attempt(t, y, h, yn, err);
      err.setConstant(1.0);
    }
  };
  Hopeless m(scalar([](double, double y) { return y; }));
  try {
    evolve_adaptive(m, StepController{}, ToleranceSpec{}, 0.0, 1.0, vec({1.0}));
    FAIL("expected a step-size failure");
  } catch (const Error& e) {
    CHECK(e.code() == errc::kStepTooSmall);
  }
}

TEST_CASE("step attempts are logged at INFO") {
  auto sink = std::make_shared<std::ostringstream>();
  Logger logger;
  logger.set_max_level(LogLevel::kInfo);
  logger.set_sink(LogLevel::kInfo, sink);
  EulerHeun m(scalar([](double, double y) { return y; }));
  EvolveOptions opts;
  opts.logger = &logger;
  auto r = evolve_adaptive(m, StepController{}, ToleranceSpec{}, 0.0, 1.0, vec({1.0}), opts);
  const std::string text = sink->str();
  CHECK(text.rfind("[INFO][rank 0][evolve_adaptive][begin-step-attempt] step = 1, tn = 0, h = 0.0001\n", 0) == 0);
  long begins = 0, ends = 0;
  for (std::size_t pos = 0; (pos = text.find("begin-step-attempt", pos)) != std::string::npos; ++pos) ++begins;
  for (std::size_t pos = 0; (pos = text.find("end-step-attempt", pos)) != std::string::npos; ++pos) ++ends;
  CHECK(begins == r.stats.attempts);
  CHECK(ends == r.stats.attempts);
}

TEST_CASE("partitioned system combines partitions") {
  PartitionedOdeSystem ps;
  ps.dimension = 2;
  ps.partitions.push_back([](double, const StateVector& y, StateVector& d) { d = 2.0 * y; });
  ps.partitions.push_back([](double t, const StateVector&, StateVector& d) { d.setConstant(t); });
  OdeSystem all = ps.combined();
  StateVector d(2);
  all.rhs(3.0, vec({1.0, -1.0}), d);
  CHECK(d[0] == 5.0);
  CHECK(d[1] == 1.0);

  PartitionedOdeSystem one;
  one.dimension = 2;
  one.partitions.resize(1, ps.partitions[0]);
  CHECK_THROWS_AS(one.validate(), Error);
}

TEST_CASE("tolerance validation") {
  ToleranceSpec t;
  t.reltol = 0.0;
  CHECK_THROWS_AS(t.validate(1), Error);
  t.reltol = 1e-3;
  t.abstol = -1.0;
  CHECK_THROWS_AS(t.validate(1), Error);
  t.abstol_vector = vec({1e-3, 1e-3});
  CHECK_NOTHROW(t.validate(2));
  CHECK_THROWS_AS(t.validate(3), Error);
}

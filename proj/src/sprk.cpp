#include "chronos/sprk.hpp"

#include <cmath>

namespace chronos::sprk {

namespace {
constexpr const char* kModule = "sprk";

void check_state(const HamiltonianSystem& sys, const StateVector& p, const StateVector& q) {
  CHRONOS_REQUIRE(p.size() == sys.n_p && q.size() == sys.n_q, errc::kDimensionMismatch,
                  "p or q length differs from the system dimensions");
}
}  // namespace

void HamiltonianSystem::validate() const {
  CHRONOS_REQUIRE(n_p > 0 && n_q > 0, errc::kIllegalInput, "empty partition");
  CHRONOS_REQUIRE(static_cast<bool>(f1) && static_cast<bool>(f2), errc::kIllegalInput,
                  "f1 and f2 must both be set");
}

void SprkCoefficients::validate() const {
  CHRONOS_REQUIRE(!a.empty() && a.size() == a_hat.size(), errc::kIllegalInput,
                  "a and a_hat must be non-empty and of equal length");
  double sa = 0.0, sh = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHRONOS_REQUIRE(std::isfinite(a[i]) && std::isfinite(a_hat[i]), errc::kNonFinite,
                    "non-finite coefficient");
    sa += a[i];
    sh += a_hat[i];
  }
  CHRONOS_REQUIRE(std::abs(sa - 1.0) < 1e-12 && std::abs(sh - 1.0) < 1e-12, errc::kIllegalInput,
                  "weights must sum to one");
}

SprkCoefficients builtin_sprk(int order) {
  SprkCoefficients c;
  c.order = order;
  switch (order) {
    case 1:
      c.name = "symplectic-euler";
      c.a = {1.0};
      c.a_hat = {1.0};
      break;
    case 2:
      // kick-drift-kick
      c.name = "velocity-verlet";
      c.a = {1.0, 0.0};
      c.a_hat = {0.5, 0.5};
      break;
    case 3:
      c.name = "ruth-3";
      c.a = {2.0 / 3.0, -2.0 / 3.0, 1.0};
      c.a_hat = {7.0 / 24.0, 3.0 / 4.0, -1.0 / 24.0};
      break;
    case 4: {
      c.name = "candy-rozmus-4";
      const double cbrt2 = std::cbrt(2.0);
      const double w1 = 1.0 / (2.0 - cbrt2);
      const double w0 = -cbrt2 / (2.0 - cbrt2);
      c.a = {0.5 * w1, 0.5 * (w0 + w1), 0.5 * (w0 + w1), 0.5 * w1};
      c.a_hat = {0.0, w1, w0, w1};
      break;
    }
    default:
      raise(errc::kUnsupported, "built-in SPRK methods cover orders 1 to 4", __func__, kModule);
  }
  return c;
}

StageTimes stage_times(const SprkCoefficients& coef, TimeConvention conv) {
  const int s = coef.stages();
  StageTimes st;
  st.c_hat.resize(static_cast<std::size_t>(s));
  st.c.resize(static_cast<std::size_t>(s));
  double sum_a = 0.0, sum_ah = 0.0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(s); ++i) {
    const double exclusive_a = sum_a;
    sum_a += coef.a[i];
    sum_ah += coef.a_hat[i];
    st.c_hat[i] = conv == TimeConvention::kInclusive ? sum_ah : exclusive_a;
    st.c[i] = conv == TimeConvention::kInclusive ? sum_a : sum_ah;
  }
  return st;
}

CompensatedAccumulator::CompensatedAccumulator(const StateVector& initial) { reset(initial); }

void CompensatedAccumulator::reset(const StateVector& initial) {
  value = initial;
  compensation = StateVector::Zero(initial.size());
}

void CompensatedAccumulator::add(const StateVector& delta) {
  CHRONOS_CHECK_FULL(delta.size() == value.size(), errc::kDimensionMismatch,
                     "increment length differs from the accumulator");
  for (Index i = 0; i < value.size(); ++i) {
    const double s = value[i];
    const double x = delta[i];
    const double t = s + x;
    compensation[i] += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
    value[i] = t;
  }
}

StateVector CompensatedAccumulator::total() const { return value + compensation; }

double compensated_sum(const std::vector<double>& terms) {
  CompensatedAccumulator acc(StateVector::Zero(1));
  StateVector x(1);
  for (double v : terms) {
    x[0] = v;
    acc.add(x);
  }
  return acc.total()[0];
}

void SprkWorkspace::resize(Index n_p, Index n_q) {
  for (StateVector* v : {&fp, &dp, &base_p, &arg_p}) {
    if (v->size() != n_p) v->resize(n_p);
  }
  for (StateVector* v : {&fq, &dq, &base_q, &arg_q}) {
    if (v->size() != n_q) v->resize(n_q);
  }
}

void sprk_step_standard(const SprkCoefficients& coef, const HamiltonianSystem& sys, double t,
                        double h, StateVector& p, StateVector& q, SprkWorkspace& ws,
                        TimeConvention conv) {
  ws.resize(sys.n_p, sys.n_q);
  const StageTimes st = stage_times(coef, conv);
  for (std::size_t i = 0; i < coef.a.size(); ++i) {
    if (coef.a_hat[i] != 0.0) {
      sys.f1(t + st.c_hat[i] * h, q, ws.fp);
      p += (h * coef.a_hat[i]) * ws.fp;
    }
    if (coef.a[i] != 0.0) {
      sys.f2(t + st.c[i] * h, p, ws.fq);
      q += (h * coef.a[i]) * ws.fq;
    }
  }
  CHRONOS_CHECK_FULL(p.allFinite() && q.allFinite(), errc::kNonFinite, "non-finite SPRK state");
}

void sprk_step_increment(const SprkCoefficients& coef, const HamiltonianSystem& sys, double t,
                         double h, CompensatedAccumulator& acc_p, CompensatedAccumulator& acc_q,
                         SprkWorkspace& ws, TimeConvention conv) {
  ws.resize(sys.n_p, sys.n_q);
  const StageTimes st = stage_times(coef, conv);
  ws.base_p = acc_p.total();
  ws.base_q = acc_q.total();
  ws.dp.setZero();
  ws.dq.setZero();
  for (std::size_t i = 0; i < coef.a.size(); ++i) {
    if (coef.a_hat[i] != 0.0) {
      ws.arg_q = ws.base_q + ws.dq;
      sys.f1(t + st.c_hat[i] * h, ws.arg_q, ws.fp);
      ws.dp += (h * coef.a_hat[i]) * ws.fp;
    }
    if (coef.a[i] != 0.0) {
      ws.arg_p = ws.base_p + ws.dp;
      sys.f2(t + st.c[i] * h, ws.arg_p, ws.fq);
      ws.dq += (h * coef.a[i]) * ws.fq;
    }
  }
  CHRONOS_CHECK_FULL(ws.dp.allFinite() && ws.dq.allFinite(), errc::kNonFinite,
                     "non-finite SPRK increment");
  acc_p.add(ws.dp);
  acc_q.add(ws.dq);
}

PhaseState sprk_step_standard(const SprkCoefficients& coef, const HamiltonianSystem& sys,
                              double t, const StateVector& p, const StateVector& q, double h) {
  coef.validate();
  sys.validate();
  check_state(sys, p, q);
  SprkWorkspace ws;
  PhaseState out{p, q};
  sprk_step_standard(coef, sys, t, h, out.p, out.q, ws);
  return out;
}

PhaseState sprk_step_increment(const SprkCoefficients& coef, const HamiltonianSystem& sys,
                               double t, const StateVector& p, const StateVector& q, double h,
                               CompensatedAccumulator& acc_p, CompensatedAccumulator& acc_q) {
  coef.validate();
  sys.validate();
  check_state(sys, p, q);
  if (acc_p.value.size() != p.size()) acc_p.reset(p);
  if (acc_q.value.size() != q.size()) acc_q.reset(q);
  SprkWorkspace ws;
  sprk_step_increment(coef, sys, t, h, acc_p, acc_q, ws);
  return {acc_p.total(), acc_q.total()};
}

SprkResult sprk_evolve(const SprkCoefficients& coef, const HamiltonianSystem& sys, double t0,
                       double h, long steps, const StateVector& p0, const StateVector& q0,
                       const SprkOptions& options) {
  coef.validate();
  sys.validate();
  check_state(sys, p0, q0);
  CHRONOS_REQUIRE(steps >= 0, errc::kIllegalInput, "negative step count");
  CHRONOS_REQUIRE(std::isfinite(h) && h != 0.0, errc::kIllegalInput, "h must be finite and nonzero");

  long n1 = 0, n2 = 0;
  HamiltonianSystem counted = sys;
  counted.f1 = [&](double t, const StateVector& q, StateVector& f) {
    ++n1;
    sys.f1(t, q, f);
  };
  counted.f2 = [&](double t, const StateVector& p, StateVector& f) {
    ++n2;
    sys.f2(t, p, f);
  };

  SprkWorkspace ws;
  SprkResult r;
  r.state = {p0, q0};
  CompensatedAccumulator acc_p(p0), acc_q(q0);
  for (long n = 0; n < steps; ++n) {
    // t from the step index keeps the time grid free of accumulated roundoff.
    const double t = t0 + static_cast<double>(n) * h;
    if (options.algorithm == SprkAlgorithm::kStandard) {
      sprk_step_standard(coef, counted, t, h, r.state.p, r.state.q, ws, options.convention);
    } else {
      sprk_step_increment(coef, counted, t, h, acc_p, acc_q, ws, options.convention);
      r.state.p = acc_p.total();
      r.state.q = acc_q.total();
    }
    if (options.observer) options.observer(n + 1, t0 + static_cast<double>(n + 1) * h, r.state.p, r.state.q);
  }
  r.t = t0 + static_cast<double>(steps) * h;
  r.steps = steps;
  r.f1_evals = n1;
  r.f2_evals = n2;
  return r;
}

SprkStepper::SprkStepper(SprkCoefficients coef, HamiltonianSystem sys, int substeps,
                         SprkAlgorithm algorithm)
    : coef_(std::move(coef)), sys_(std::move(sys)), substeps_(substeps), algorithm_(algorithm) {
  coef_.validate();
  sys_.validate();
  CHRONOS_REQUIRE(substeps_ >= 1, errc::kIllegalInput, "substeps must be at least 1");
}

void SprkStepper::do_evolve(double t_start, double t_end, StateVector& y) {
  CHRONOS_REQUIRE(y.size() == sys_.n_p + sys_.n_q, errc::kDimensionMismatch,
                  "state length differs from n_p + n_q");
  const double h = (t_end - t_start) / substeps_;
  StateVector p = y.head(sys_.n_p);
  StateVector q = y.tail(sys_.n_q);
  CompensatedAccumulator acc_p(p), acc_q(q);
  for (int n = 0; n < substeps_; ++n) {
    const double t = t_start + n * h;
    if (algorithm_ == SprkAlgorithm::kStandard) {
      sprk_step_standard(coef_, sys_, t, h, p, q, ws_);
    } else {
      sprk_step_increment(coef_, sys_, t, h, acc_p, acc_q, ws_);
    }
  }
  if (algorithm_ == SprkAlgorithm::kIncrement) {
    p = acc_p.total();
    q = acc_q.total();
  }
  y.head(sys_.n_p) = p;
  y.tail(sys_.n_q) = q;
}

}  // namespace chronos::sprk

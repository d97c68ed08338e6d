#include "chronos/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace chronos {

namespace {
constexpr const char* kModule = "core";
}

void OdeSystem::validate() const {
  CHRONOS_REQUIRE(dimension > 0, errc::kIllegalInput, "system dimension must be positive");
  CHRONOS_REQUIRE(static_cast<bool>(rhs), errc::kIllegalInput, "rhs callback is empty");
}

void PartitionedOdeSystem::validate() const {
  CHRONOS_REQUIRE(dimension > 0, errc::kIllegalInput, "system dimension must be positive");
  CHRONOS_REQUIRE(partitions.size() >= 2, errc::kIllegalInput,
                  "a partitioned system needs at least two partitions");
  for (const auto& f : partitions) {
    CHRONOS_REQUIRE(static_cast<bool>(f), errc::kIllegalInput, "partition callback is empty");
  }
}

OdeSystem PartitionedOdeSystem::combined() const {
  validate();
  OdeSystem out;
  out.dimension = dimension;
  out.rhs = [parts = partitions, tmp = StateVector(dimension)](
                double t, const StateVector& y, StateVector& ydot) mutable {
    parts.front()(t, y, ydot);
    for (std::size_t k = 1; k < parts.size(); ++k) {
      parts[k](t, y, tmp);
      ydot += tmp;
    }
  };
  return out;
}

bool all_finite(const StateVector& v) { return v.allFinite(); }

// ---------------------------------------------------------------------------

void Stepper::evolve(double t_start, double t_end, StateVector& y) {
  CHRONOS_REQUIRE(std::isfinite(t_start) && std::isfinite(t_end), errc::kIllegalInput,
                  "non-finite interval endpoint");
  if (t_end == t_start) return;
  do_evolve(t_start, t_end, y);
}

void Stepper::reset(double /*t*/, const StateVector& /*y*/) {}

void Stepper::set_forcing(const StateVector& /*forcing*/) {
  raise(errc::kUnsupported, "this stepper does not accept a forcing term", __func__, kModule);
}

// ---------------------------------------------------------------------------

void ToleranceSpec::validate(Index dimension) const {
  CHRONOS_REQUIRE(reltol > 0.0 && std::isfinite(reltol), errc::kIllegalInput,
                  "reltol must be positive");
  if (abstol_vector.size() > 0) {
    CHRONOS_REQUIRE(abstol_vector.size() == dimension, errc::kDimensionMismatch,
                    "abstol vector length differs from the state dimension");
    CHRONOS_REQUIRE((abstol_vector.array() > 0.0).all(), errc::kIllegalInput,
                    "abstol entries must be positive");
  } else {
    CHRONOS_REQUIRE(abstol > 0.0 && std::isfinite(abstol), errc::kIllegalInput,
                    "abstol must be positive");
  }
}

ToleranceSpec ToleranceSpec::scaled(double factor) const {
  ToleranceSpec out = *this;
  out.reltol *= factor;
  out.abstol *= factor;
  if (out.abstol_vector.size() > 0) out.abstol_vector *= factor;
  return out;
}

double wrms_norm(const StateVector& e, const StateVector& y, const ToleranceSpec& tol) {
  CHRONOS_REQUIRE(e.size() == y.size(), errc::kDimensionMismatch,
                  "error and state vectors differ in length");
  CHRONOS_REQUIRE(e.size() > 0, errc::kIllegalInput, "empty vector");
  CHRONOS_REQUIRE(tol.abstol_vector.size() == 0 || tol.abstol_vector.size() == e.size(),
                  errc::kDimensionMismatch, "abstol vector length differs from the state");
  double sum = 0.0;
  for (Index i = 0; i < e.size(); ++i) {
    const double w = tol.reltol * std::abs(y[i]) + tol.abs_weight(i);
    const double r = e[i] / w;
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(e.size()));
}

double wrms_norm(ErrorContext& ctx, const StateVector& e, const StateVector& y,
                 const ToleranceSpec& tol) {
  double out = std::numeric_limits<double>::quiet_NaN();
  ctx.checked([&] { out = wrms_norm(e, y, tol); });
  return out;
}

StateVector linear_sum(ErrorContext& ctx, double a, const StateVector& x, double b,
                       const StateVector& y) {
  StateVector out;
  ctx.checked([&] {
    CHRONOS_REQUIRE(x.size() == y.size(), errc::kDimensionMismatch,
                    "operands differ in length");
    out = a * x + b * y;
  });
  return out;
}

// ---------------------------------------------------------------------------

StepController StepController::i_controller(double safety) {
  StepController c;
  c.kind = ControllerKind::kI;
  c.safety = safety;
  return c;
}

StepController StepController::pi_controller(double safety) {
  StepController c;
  c.kind = ControllerKind::kPI;
  c.safety = safety;
  return c;
}

void StepController::validate() const {
  CHRONOS_REQUIRE(safety > 0.0 && safety <= 1.0, errc::kIllegalInput, "safety must be in (0,1]");
  CHRONOS_REQUIRE(growth_max > 1.0 && first_growth_max >= 1.0, errc::kIllegalInput,
                  "growth bounds must exceed 1");
  CHRONOS_REQUIRE(shrink_min > 0.0 && shrink_min < 1.0, errc::kIllegalInput,
                  "shrink_min must be in (0,1)");
}

namespace {

double raw_factor(const StepController& ctrl, double est, double prev_est, int order) {
  const double k = static_cast<double>(order + 1);
  if (ctrl.kind == ControllerKind::kPI) {
    return ctrl.safety * std::pow(est, -ctrl.k1 / k) * std::pow(prev_est, ctrl.k2 / k);
  }
  return ctrl.safety * std::pow(est, -1.0 / k);
}

double clamp_factor(double factor, double lo, double hi) {
  if (!std::isfinite(factor)) return std::isnan(factor) ? lo : hi;
  return std::clamp(factor, lo, hi);
}

}  // namespace

double controller_next_step(const StepController& ctrl, double h, double est, int order) {
  if (est <= 0.0) return ctrl.growth_max * h;
  return h * clamp_factor(raw_factor(ctrl, est, 1.0, order), ctrl.shrink_min, ctrl.growth_max);
}

double StepController::next_step(double h, double est, int order) {
  const double growth = first_step_ ? first_growth_max : growth_max;
  first_step_ = false;
  if (est <= 0.0) {
    prev_est_ = 1e-10;
    return growth * h;
  }
  const double factor = clamp_factor(raw_factor(*this, est, prev_est_, order), shrink_min, growth);
  // The PI memory only tracks accepted steps.
  if (est <= 1.0) prev_est_ = std::max(est, 1e-10);
  return h * factor;
}

void StepController::reset() {
  first_step_ = true;
  prev_est_ = 1.0;
}

// ---------------------------------------------------------------------------

namespace {

void log_attempt(const Logger* logger, std::string_view label, long step, double t, double h,
                 const char* scope) {
  if (logger == nullptr || !logger->enabled(LogLevel::kInfo)) return;
  LogRecord rec{LogLevel::kInfo, scope, std::string(label), {}};
  rec.payload.emplace_back("step", step);
  rec.payload.emplace_back("tn", t);
  rec.payload.emplace_back("h", h);
  logger->log(rec);
}

void log_end(const Logger* logger, long step, double t, double h, const char* status,
             double dsm) {
  if (logger == nullptr || !logger->enabled(LogLevel::kInfo)) return;
  LogRecord rec{LogLevel::kInfo, "evolve_adaptive", "end-step-attempt", {}};
  rec.payload.emplace_back("step", step);
  rec.payload.emplace_back("tn", t);
  rec.payload.emplace_back("h", h);
  rec.payload.emplace_back("status", std::string(status));
  rec.payload.emplace_back("dsm", dsm);
  logger->log(rec);
}

}  // namespace

AdaptiveResult evolve_adaptive(SingleStepMethod& method, StepController controller,
                               const ToleranceSpec& tol, double t0, double tf,
                               const StateVector& y0, const EvolveOptions& options) {
  CHRONOS_REQUIRE(tf > t0, errc::kIllegalInput, "evolve_adaptive requires tf > t0");
  CHRONOS_REQUIRE(y0.size() == method.dimension(), errc::kDimensionMismatch,
                  "initial state length differs from the method dimension");
  CHRONOS_REQUIRE(all_finite(y0), errc::kNonFinite, "initial state is not finite");
  controller.validate();
  tol.validate(y0.size());

  const double span = tf - t0;
  const double h_min = options.h_min > 0.0
                           ? options.h_min
                           : 10.0 * std::numeric_limits<double>::epsilon() * std::abs(span);
  double h = options.h0 > 0.0 ? options.h0 : 1e-4 * span;
  const int order = method.controller_order();

  AdaptiveResult out;
  out.y = y0;
  out.t = t0;
  StepStats& stats = out.stats;
  stats.h_min = std::numeric_limits<double>::infinity();

  StateVector y_next(y0.size());
  StateVector err(y0.size());
  controller.reset();
  method.restart();
  const long evals_before = method.rhs_evaluations();
  bool after_reject = false;

  while (out.t < tf) {
    if (options.h_max > 0.0) h = std::min(h, options.h_max);
    h = method.limit_step(out.t, out.y, h);
    const double remaining = tf - out.t;
    // Stretch the step to the end point when we'd otherwise leave a sliver.
    const bool last = h >= remaining * (1.0 - 1e-12);
    const double h_try = last ? remaining : h;
    if (h_try < h_min && !last) {
      raise(errc::kStepTooSmall,
            "step size " + format_scalar(h_try) + " fell below h_min at t = " +
                format_scalar(out.t),
            __func__, kModule);
    }
    if (stats.steps >= options.max_steps) {
      raise(errc::kTooMuchWork, "maximum number of steps reached at t = " + format_scalar(out.t),
            __func__, kModule);
    }

    ++stats.attempts;
    log_attempt(options.logger, "begin-step-attempt", stats.steps + 1, out.t, h_try,
                "evolve_adaptive");
    method.attempt(out.t, out.y, h_try, y_next, err);

    double est = std::numeric_limits<double>::infinity();
    const bool finite = all_finite(y_next) && all_finite(err);
    if (finite) est = wrms_norm(err, y_next, tol);

    if (!finite || !(est <= 1.0)) {
      if (!finite) {
        ++stats.failed_steps;
        h = controller.shrink_min * h_try;
      } else {
        ++stats.error_rejections;
        h = std::min(controller.next_step(h_try, est, order), h_try);
      }
      log_end(options.logger, stats.steps + 1, out.t, h_try,
              finite ? "failed-error-test" : "failed-nonfinite", est);
      method.on_reject(h_try);
      after_reject = true;
      if (h < h_min) {
        raise(errc::kStepTooSmall,
              "step size " + format_scalar(h) + " fell below h_min at t = " + format_scalar(out.t),
              __func__, kModule);
      }
      continue;
    }

    double h_next = controller.next_step(h_try, est, order);
    if (after_reject) h_next = std::min(h_next, h_try);
    after_reject = false;

    out.t = last ? tf : out.t + h_try;
    out.y.swap(y_next);
    ++stats.steps;
    stats.h_last = h_try;
    stats.h_min = std::min(stats.h_min, h_try);
    stats.h_max = std::max(stats.h_max, h_try);
    log_end(options.logger, stats.steps, out.t, h_try, "success", est);
    method.on_accept(out.t, out.y, h_try);
    h = h_next;
  }
  if (stats.steps == 0) stats.h_min = 0.0;
  stats.rhs_evals = method.rhs_evaluations() - evals_before;
  return out;
}

}  // namespace chronos

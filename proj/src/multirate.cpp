#include "chronos/multirate.hpp"

#include <algorithm>
#include <cmath>

#include "chronos/splitting.hpp"

namespace chronos::multirate {

namespace {
constexpr const char* kModule = "multirate";
}

StepController default_tolfac_controller() {
  StepController c = StepController::i_controller(1.0);
  c.shrink_min = 1e-2;
  c.growth_max = 10.0;
  return c;
}

void MultirateConfig::validate() const {
  slow_controller.validate();
  fast_controller.validate();
  tolfac_controller.validate();
  CHRONOS_REQUIRE(tolfac_min > 0.0 && tolfac_min <= 1.0, errc::kIllegalInput,
                  "tolfac_min must lie in (0, 1]");
  CHRONOS_REQUIRE(tolfac >= tolfac_min && tolfac <= 1.0, errc::kIllegalInput,
                  "tolfac must lie in [tolfac_min, 1]");
  CHRONOS_REQUIRE(tolfac_order >= 1 && fast_order >= 1, errc::kIllegalInput,
                  "controller orders must be positive");
  CHRONOS_REQUIRE(splitting_order == 1 || splitting_order == 2, errc::kIllegalInput,
                  "splitting_order must be 1 or 2");
  CHRONOS_REQUIRE(H0 >= 0.0 && H_min >= 0.0 && H_max >= 0.0, errc::kIllegalInput,
                  "step bounds must be non-negative");
  CHRONOS_REQUIRE(max_steps > 0 && max_inner_retries >= 0, errc::kIllegalInput,
                  "max_steps must be positive");
}

SlowErrorEstimate slow_error_estimate(const SlowStepFn& step, double t, const StateVector& y,
                                      double H, const ToleranceSpec& tol, StateVector* y_out) {
  CHRONOS_REQUIRE(H > 0.0 && std::isfinite(H), errc::kIllegalInput, "H must be positive");
  StateVector big = y;
  step(t, H, big);
  StateVector small = y;
  step(t, 0.5 * H, small);
  step(t + 0.5 * H, 0.5 * H, small);
  SlowErrorEstimate out;
  out.est_vector = small - big;
  out.est_wrms = wrms_norm(out.est_vector, small, tol);
  if (y_out != nullptr) *y_out = std::move(small);
  return out;
}

DecoupledUpdate decoupled_update(const MultirateConfig& cfg, double H, double h,
                                 double est_slow, double est_fast, int slow_order) {
  CHRONOS_REQUIRE(H > 0.0 && h > 0.0, errc::kIllegalInput, "step sizes must be positive");
  DecoupledUpdate u;
  u.H_next = controller_next_step(cfg.slow_controller, H, est_slow, slow_order);
  u.h_next = controller_next_step(cfg.fast_controller, h, est_fast, cfg.fast_order);
  return u;
}

HtolUpdate htol_update(const MultirateConfig& cfg, double H, double tolfac, double est_slow,
                       double est_fast_accum, int slow_order) {
  CHRONOS_REQUIRE(H > 0.0 && tolfac > 0.0, errc::kIllegalInput,
                  "H and tolfac must be positive");
  HtolUpdate u;
  u.H_next = controller_next_step(cfg.slow_controller, H, est_slow, slow_order);

  const StepController& c = cfg.tolfac_controller;
  double factor = c.growth_max;
  if (est_fast_accum > 0.0) {
    factor = c.safety * std::pow(est_fast_accum, -1.0 / cfg.tolfac_order);
  }
  factor = std::clamp(factor, c.shrink_min, c.growth_max);
  const double requested = tolfac * factor;
  u.tolfac_next = std::clamp(requested, cfg.tolfac_min, 1.0);
  u.clamped_low = requested < cfg.tolfac_min;
  u.clamped_high = requested > 1.0;
  if (u.clamped_low && cfg.logger != nullptr && cfg.logger->enabled(LogLevel::kWarning)) {
    cfg.logger->log({LogLevel::kWarning,
                     "htol_update",
                     "tolfac-clamped",
                     {{"requested", requested}, {"tolfac", u.tolfac_next}}});
  }
  return u;
}

double MultirateStats::mean_H() const {
  if (H_history.empty()) return 0.0;
  double s = 0.0;
  for (double H : H_history) s += H;
  return s / static_cast<double>(H_history.size());
}

double MultirateStats::mean_inner_h() const {
  return inner_steps > 0 ? inner_span / static_cast<double>(inner_steps) : 0.0;
}

MultirateStepper::MultirateStepper(MultirateConfig cfg, OdeSystem slow, AdaptiveStepper& fast,
                                   ToleranceSpec tol)
    : cfg_(std::move(cfg)),
      slow_(std::move(slow)),
      slow_stepper_(erk::ErkStepper::fixed(erk::builtin_table(cfg_.slow_table), slow_)),
      fast_(&fast),
      tol_(std::move(tol)),
      tolfac_(cfg_.tolfac) {
  cfg_.validate();
  slow_.validate();
  tol_.validate(slow_.dimension);
  if (cfg_.inner_tol) cfg_.inner_tol->validate(slow_.dimension);
  clear_report();
}

void MultirateStepper::reset(double /*t*/, const StateVector& /*y*/) {
  // H, tolfac and the inner step proposal describe the problem rather than
  // the current point, so they survive a reset.
}

void MultirateStepper::set_tolerance(const ToleranceSpec& tol) {
  tol.validate(slow_.dimension);
  tol_ = tol;
}

void MultirateStepper::clear_report() {
  report_ = Report{};
  report_.accumulated_error = StateVector::Zero(slow_.dimension);
}

void MultirateStepper::slow_step(double t, double H, StateVector& y) {
  static const splitting::SplittingCoefficients lie = splitting::lie_trotter(2);
  static const splitting::SplittingCoefficients strang = splitting::strang(2);
  const splitting::PartitionSteppers steppers = {&slow_stepper_, fast_};
  if (cfg_.kind == ControlKind::kDecoupled && h_fast_ > 0.0) fast_->set_initial_step(h_fast_);
  splitting::splitting_step(cfg_.splitting_order == 1 ? lie : strang, steppers, t, H, y);
}

void MultirateStepper::do_evolve(double t_start, double t_end, StateVector& y) {
  CHRONOS_REQUIRE(t_end > t_start, errc::kUnsupported, "multirate evolves forward only");
  CHRONOS_REQUIRE(y.size() == slow_.dimension, errc::kDimensionMismatch,
                  "state length differs from the system dimension");
  const double span = t_end - t_start;
  const double H_min = cfg_.H_min > 0.0 ? cfg_.H_min : 1e-12 * span;
  double H = H_init_ > 0.0 ? H_init_ : (H_ > 0.0 ? H_ : (cfg_.H0 > 0.0 ? cfg_.H0 : 1e-2 * span));
  H = std::min(H, span);
  const int p = cfg_.splitting_order;
  report_.span += span;

  double t = t_start;
  int consecutive_failures = 0;
  StateVector y_big, y_small, est;
  while (t < t_end) {
    if (cfg_.H_max > 0.0) H = std::min(H, cfg_.H_max);
    const bool last = H >= (t_end - t) * (1.0 - 1e-12);
    const double Hs = last ? t_end - t : H;
    CHRONOS_REQUIRE(Hs >= H_min || last, errc::kStepTooSmall, "slow step size underflow");
    CHRONOS_REQUIRE(stats_.slow_attempts < cfg_.max_steps, errc::kTooMuchWork,
                    "maximum number of slow steps reached");

    if (cfg_.kind == ControlKind::kStepsizeTolerance) {
      fast_->set_tolerance(tol_.scaled(tolfac_));
    } else {
      fast_->set_tolerance(cfg_.inner_tol ? *cfg_.inner_tol : tol_);
    }
    ++stats_.slow_attempts;

    bool ok = true;
    try {
      y_big = y;
      slow_step(t, Hs, y_big);
      fast_->clear_report();
      y_small = y;
      slow_step(t, 0.5 * Hs, y_small);
      slow_step(t + 0.5 * Hs, 0.5 * Hs, y_small);
    } catch (const Error&) {
      ok = false;
      ++stats_.inner_failures;
      if (++consecutive_failures > cfg_.max_inner_retries) throw;
    }
    double e = 0.0;
    if (ok) {
      est = y_small - y_big;
      e = wrms_norm(est, y_small, tol_);
      ok = std::isfinite(e);
      if (!ok) {
        ++stats_.inner_failures;
        if (++consecutive_failures > cfg_.max_inner_retries) {
          raise(errc::kNonFinite, "non-finite slow step", __func__, kModule);
        }
      }
    }
    if (!ok) {
      H = 0.25 * Hs;
      stats_.tolfac_history.push_back(tolfac_);
      continue;
    }
    consecutive_failures = 0;

    const Report& rep = fast_->report();
    double H_next = Hs;
    if (cfg_.kind == ControlKind::kStepsizeTolerance) {
      const double fast_est = wrms_norm(rep.accumulated_error, y_small, tol_);
      const HtolUpdate u = htol_update(cfg_, Hs, tolfac_, e, fast_est, p);
      H_next = u.H_next;
      tolfac_ = u.tolfac_next;
      if (u.clamped_low) ++stats_.tolfac_clamps;
    } else {
      const double h_cur = h_fast_ > 0.0 ? h_fast_ : std::max(rep.last_step, 1e-300);
      const DecoupledUpdate u = decoupled_update(cfg_, Hs, h_cur, e, rep.last_error_wrms, p);
      H_next = u.H_next;
      h_fast_ = std::min(u.h_next, Hs);
    }
    stats_.tolfac_history.push_back(tolfac_);

    if (e <= 1.0) {
      y.swap(y_small);
      t = last ? t_end : t + Hs;
      ++stats_.slow_steps;
      stats_.inner_steps += rep.steps;
      stats_.inner_span += rep.span;
      stats_.max_accepted_est = std::max(stats_.max_accepted_est, e);
      stats_.H_history.push_back(Hs);
      report_.steps += 1;
      report_.last_step = Hs;
      report_.last_error_wrms = e;
      report_.accumulated_error += est.cwiseAbs() + rep.accumulated_error;
      H = H_next;
    } else {
      ++stats_.rejections;
      H = std::min(H_next, Hs);
    }
  }
  H_ = H;
  H_init_ = 0.0;
}

MultirateResult multirate_evolve(const MultirateConfig& cfg, const OdeSystem& slow,
                                 AdaptiveStepper& fast, double t0, double tf,
                                 const StateVector& y0, const ToleranceSpec& tol) {
  MultirateStepper stepper(cfg, slow, fast, tol);
  MultirateResult r;
  r.y = y0;
  stepper.evolve(t0, tf, r.y);
  r.stats = stepper.stats();
  return r;
}

}  // namespace chronos::multirate

#include "chronos/erk.hpp"

#include <cmath>
#include <map>

namespace chronos::erk {

namespace {
constexpr const char* kModule = "erk";

ButcherTable make_table(std::string name, std::vector<std::vector<double>> rows,
                        std::vector<double> b, std::vector<double> b_embed, int order,
                        int embed_order) {
  const int s = static_cast<int>(b.size());
  ButcherTable t;
  t.name = std::move(name);
  t.A = Eigen::MatrixXd::Zero(s, s);
  for (int i = 1; i < s; ++i) {
    for (int j = 0; j < i; ++j) t.A(i, j) = rows[i - 1][j];
  }
  t.b = Eigen::Map<Eigen::VectorXd>(b.data(), s);
  t.c = t.A.rowwise().sum();
  if (!b_embed.empty()) t.b_embed = Eigen::Map<Eigen::VectorXd>(b_embed.data(), s);
  t.order = order;
  t.embed_order = embed_order;
  return t;
}

using Factory = ButcherTable (*)();

const std::map<std::string, Factory>& registry() {
  static const std::map<std::string, Factory> tables = {
      {"euler", [] { return make_table("euler", {}, {1.0}, {}, 1, 0); }},
      {"heun", [] { return make_table("heun", {{1.0}}, {0.5, 0.5}, {1.0, 0.0}, 2, 1); }},
      // Ralston's second-order method, FSAL, with a first-order companion.
      {"erk2-3stage",
       [] {
         return make_table("erk2-3stage", {{2.0 / 3.0}, {0.25, 0.75}}, {0.25, 0.75, 0.0},
                           {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, 2, 1);
       }},
      {"bs3",
       [] {
         return make_table("bs3", {{0.5}, {0.0, 0.75}, {2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0}},
                           {2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0, 0.0},
                           {7.0 / 24.0, 0.25, 1.0 / 3.0, 0.125}, 3, 2);
       }},
      {"rk4",
       [] {
         return make_table("rk4", {{0.5}, {0.0, 0.5}, {0.0, 0.0, 1.0}},
                           {1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0}, {}, 4, 0);
       }},
      {"dopri5",
       [] {
         return make_table(
             "dopri5",
             {{1.0 / 5.0},
              {3.0 / 40.0, 9.0 / 40.0},
              {44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0},
              {19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0},
              {9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0,
               -5103.0 / 18656.0},
              {35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0,
               11.0 / 84.0}},
             {35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0,
              0.0},
             {5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0,
              187.0 / 2100.0, 1.0 / 40.0},
             5, 4);
       }},
      // Butcher's seven-stage sixth-order method.
      {"butcher6",
       [] {
         return make_table(
             "butcher6",
             {{1.0 / 3.0},
              {0.0, 2.0 / 3.0},
              {1.0 / 12.0, 1.0 / 3.0, -1.0 / 12.0},
              {-1.0 / 16.0, 9.0 / 8.0, -3.0 / 16.0, -3.0 / 8.0},
              {0.0, 9.0 / 8.0, -3.0 / 8.0, -3.0 / 4.0, 1.0 / 2.0},
              {9.0 / 44.0, -9.0 / 11.0, 63.0 / 44.0, 18.0 / 11.0, 0.0, -16.0 / 11.0}},
             {11.0 / 120.0, 0.0, 27.0 / 40.0, 27.0 / 40.0, -4.0 / 15.0, -4.0 / 15.0,
              11.0 / 120.0},
             {}, 6, 0);
       }},
  };
  return tables;
}

}  // namespace

void ButcherTable::validate() const {
  const Index s = b.size();
  CHRONOS_REQUIRE(s >= 1, errc::kIllegalInput, "table has no stages");
  CHRONOS_REQUIRE(A.rows() == s && A.cols() == s && c.size() == s, errc::kDimensionMismatch,
                  "inconsistent table shapes");
  CHRONOS_REQUIRE(b_embed.size() == 0 || b_embed.size() == s, errc::kDimensionMismatch,
                  "embedding length differs from the stage count");
  for (Index i = 0; i < s; ++i) {
    for (Index j = i; j < s; ++j) {
      CHRONOS_REQUIRE(A(i, j) == 0.0, errc::kIllegalInput, "A is not strictly lower triangular");
    }
    CHRONOS_REQUIRE(std::abs(A.row(i).sum() - c[i]) <= 1e-14 * (1.0 + std::abs(c[i])),
                    errc::kIllegalInput, "c does not equal the row sums of A");
  }
  CHRONOS_REQUIRE(order >= 1, errc::kIllegalInput, "order must be positive");
}

ButcherTable builtin_table(const std::string& name) {
  const auto& reg = registry();
  auto it = reg.find(name);
  CHRONOS_REQUIRE(it != reg.end(), errc::kUnknownName, "unknown Butcher table '" + name + "'");
  return it->second();
}

std::vector<std::string> builtin_table_names() {
  std::vector<std::string> out;
  for (const auto& [name, _] : registry()) out.push_back(name);
  return out;
}

void ErkWorkspace::resize(Index n, int s) {
  if (k.rows() != n || k.cols() != s || (keep_stages && stages.cols() != s)) {
    k.resize(n, s);
    if (keep_stages) stages.resize(n, s);
    tmp.resize(n);
    ki.resize(n);
  }
}

void erk_step(const ButcherTable& table, const RhsFn& rhs, double t, const StateVector& y,
              double h, ErkWorkspace& ws, StateVector& y_next, StateVector* est,
              const StateVector* forcing) {
  const int s = table.stages();
  const Index n = y.size();
  CHRONOS_REQUIRE(est == nullptr || table.has_embedding(), errc::kUnsupported,
                  "table '" + table.name + "' has no embedding");
  ws.resize(n, s);
  for (int i = 0; i < s; ++i) {
    ws.tmp = y;
    for (int j = 0; j < i; ++j) {
      const double a = table.A(i, j);
      if (a != 0.0) ws.tmp.noalias() += (h * a) * ws.k.col(j);
    }
    if (ws.keep_stages) ws.stages.col(i) = ws.tmp;
    // Callbacks write into a plain StateVector, then it moves into the block.
    rhs(t + table.c[i] * h, ws.tmp, ws.ki);
    CHRONOS_CHECK_FULL(ws.ki.size() == n, errc::kDimensionMismatch,
                       "rhs returned a vector of the wrong length");
    if (forcing != nullptr) ws.ki += *forcing;
    ws.k.col(i) = ws.ki;
  }
  y_next = y;
  y_next.noalias() += h * (ws.k * table.b);
  if (est != nullptr) {
    *est = h * (ws.k * (table.b - table.b_embed));
  }
}

ErkStepResult erk_step(const ButcherTable& table, const OdeSystem& system, double t,
                       const StateVector& y, double h) {
  table.validate();
  system.validate();
  CHRONOS_REQUIRE(h > 0.0, errc::kIllegalInput, "step size must be positive");
  CHRONOS_REQUIRE(y.size() == system.dimension, errc::kDimensionMismatch,
                  "state length differs from the system dimension");
  ErkWorkspace ws;
  ws.keep_stages = true;
  ErkStepResult out;
  if (table.has_embedding()) {
    out.est.emplace(y.size());
    erk_step(table, system.rhs, t, y, h, ws, out.y_next, &*out.est);
  } else {
    erk_step(table, system.rhs, t, y, h, ws, out.y_next);
  }
  for (int i = 0; i < table.stages(); ++i) out.stages.emplace_back(ws.stages.col(i));
  return out;
}

StateVector erk_fixed(const ButcherTable& table, const OdeSystem& system, double t0, double tf,
                      double h, const StateVector& y0, long* steps) {
  table.validate();
  system.validate();
  CHRONOS_REQUIRE(h > 0.0 && tf >= t0, errc::kIllegalInput, "need h > 0 and tf >= t0");
  ErkWorkspace ws;
  StateVector y = y0;
  StateVector y_next(y.size());
  const long n = static_cast<long>(std::ceil((tf - t0) / h * (1.0 - 1e-12)));
  for (long i = 0; i < n; ++i) {
    const double t = t0 + static_cast<double>(i) * h;
    const double hs = (i == n - 1) ? tf - t : h;
    erk_step(table, system.rhs, t, y, hs, ws, y_next);
    y.swap(y_next);
  }
  if (steps != nullptr) *steps = n;
  return y;
}

// ---------------------------------------------------------------------------

ErkMethod::ErkMethod(ButcherTable table, OdeSystem system)
    : table_(std::move(table)), system_(std::move(system)) {
  table_.validate();
  system_.validate();
  CHRONOS_REQUIRE(table_.has_embedding(), errc::kUnsupported,
                  "adaptive stepping needs an embedded table; '" + table_.name + "' has none");
}

int ErkMethod::controller_order() const { return std::max(1, table_.embed_order); }

void ErkMethod::attempt(double t, const StateVector& y, double h, StateVector& y_next,
                        StateVector& error) {
  erk_step(table_, system_.rhs, t, y, h, ws_, y_next, &error, forcing_);
  evals_ += table_.stages();
}

AdaptiveResult erk_evolve(const ButcherTable& table, const OdeSystem& system,
                          const StepController& controller, const ToleranceSpec& tol, double t0,
                          double tf, const StateVector& y0, const EvolveOptions& options) {
  ErkMethod method(table, system);
  return evolve_adaptive(method, controller, tol, t0, tf, y0, options);
}

// ---------------------------------------------------------------------------

namespace {

// Runs an ErkMethod over s in [0, span] with f(s, y) = dir * (rhs(t0 + dir*s, y) + forcing),
// and records accepted-step statistics into a report.
class ReportingMethod : public ErkMethod {
 public:
  ReportingMethod(ButcherTable table, OdeSystem system, AdaptiveStepper::Report& report)
      : ErkMethod(std::move(table), std::move(system)), report_(report) {}

  ToleranceSpec tol;
  StateVector last_err;

  void attempt(double t, const StateVector& y, double h, StateVector& y_next,
               StateVector& error) override {
    ErkMethod::attempt(t, y, h, y_next, error);
    last_err = error;
  }
  void on_accept(double, const StateVector& y_new, double h) override {
    report_.steps += 1;
    report_.last_step = h;
    report_.last_error_wrms = wrms_norm(last_err, y_new, tol);
    report_.accumulated_error += last_err.cwiseAbs();
  }

 private:
  AdaptiveStepper::Report& report_;
};

}  // namespace

ErkStepper::ErkStepper(ButcherTable table, OdeSystem system)
    : table_(std::move(table)), system_(std::move(system)) {
  table_.validate();
  system_.validate();
  clear_report();
}

ErkStepper ErkStepper::fixed(ButcherTable table, OdeSystem system, int substeps) {
  CHRONOS_REQUIRE(substeps >= 1, errc::kIllegalInput, "substeps must be at least 1");
  ErkStepper out(std::move(table), std::move(system));
  out.substeps_ = substeps;
  return out;
}

ErkStepper ErkStepper::adaptive(ButcherTable table, OdeSystem system, ToleranceSpec tol,
                                StepController controller) {
  CHRONOS_REQUIRE(table.has_embedding(), errc::kUnsupported,
                  "adaptive mode needs an embedded table");
  ErkStepper out(std::move(table), std::move(system));
  out.adaptive_ = true;
  out.set_tolerance(tol);
  controller.validate();
  out.controller_ = controller;
  return out;
}

void ErkStepper::reset(double /*t*/, const StateVector& /*y*/) {
  h_prev_ = 0.0;
  controller_.reset();
}

void ErkStepper::set_forcing(const StateVector& forcing) {
  CHRONOS_REQUIRE(forcing.size() == system_.dimension, errc::kDimensionMismatch,
                  "forcing length differs from the system dimension");
  forcing_ = forcing;
  has_forcing_ = true;
}

void ErkStepper::clear_forcing() {
  has_forcing_ = false;
  forcing_.resize(0);
}

void ErkStepper::set_tolerance(const ToleranceSpec& tol) {
  tol.validate(system_.dimension);
  tol_ = tol;
}

void ErkStepper::clear_report() {
  report_ = Report{};
  report_.accumulated_error = StateVector::Zero(system_.dimension);
}

void ErkStepper::do_evolve(double t_start, double t_end, StateVector& y) {
  CHRONOS_REQUIRE(y.size() == system_.dimension, errc::kDimensionMismatch,
                  "state length differs from the system dimension");
  const double span = std::abs(t_end - t_start);
  report_.span += span;
  const StateVector* forcing = has_forcing_ ? &forcing_ : nullptr;

  if (!adaptive_) {
    const double h = (t_end - t_start) / substeps_;
    StateVector y_next(y.size());
    StateVector est(y.size());
    for (int i = 0; i < substeps_; ++i) {
      const double t = t_start + i * h;
      const double hs = (i == substeps_ - 1) ? t_end - t : h;
      erk_step(table_, system_.rhs, t, y, hs, ws_, y_next,
               table_.has_embedding() ? &est : nullptr, forcing);
      evals_ += table_.stages();
      y.swap(y_next);
      report_.steps += 1;
      report_.last_step = std::abs(hs);
      if (table_.has_embedding()) {
        report_.accumulated_error += est.cwiseAbs();
        report_.last_error_wrms = wrms_norm(est, y, tol_);
      }
    }
    return;
  }

  const double dir = t_end > t_start ? 1.0 : -1.0;
  OdeSystem shifted;
  shifted.dimension = system_.dimension;
  shifted.rhs = [this, dir, t_start, forcing](double s, const StateVector& v, StateVector& dv) {
    system_.rhs(t_start + dir * s, v, dv);
    if (forcing != nullptr) dv += *forcing;
    if (dir < 0.0) dv = -dv;
  };
  ReportingMethod method(table_, shifted, report_);
  method.tol = tol_;
  EvolveOptions opts;
  opts.logger = logger_;
  if (h_init_ > 0.0) {
    opts.h0 = h_init_;
  } else if (h_prev_ > 0.0) {
    opts.h0 = h_prev_;
  }
  opts.h0 = opts.h0 > 0.0 ? std::min(opts.h0, span) : 0.0;
  AdaptiveResult r = evolve_adaptive(method, controller_, tol_, 0.0, span, y, opts);
  evals_ += r.stats.rhs_evals;
  h_prev_ = r.stats.h_max;
  y = std::move(r.y);
}

}  // namespace chronos::erk

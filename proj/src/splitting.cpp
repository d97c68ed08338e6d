#include "chronos/splitting.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace chronos::splitting {

namespace {
constexpr const char* kModule = "splitting";

void require_partitions(int P) {
  CHRONOS_REQUIRE(P >= 2, errc::kIllegalInput, "splitting needs at least two partitions");
}

std::string indexed_name(const char* base, int P) {
  return std::string(base) + "-" + std::to_string(P);
}

// Lie-Trotter (ascending) or its adjoint (descending) over a fraction x.
void append_lie(std::vector<SubFlow>& seq, int P, double x, bool adjoint) {
  for (int m = 0; m < P; ++m) seq.push_back({adjoint ? P - 1 - m : m, x});
}

}  // namespace

SplittingCoefficients SplittingCoefficients::zeros(int r, int s, int P) {
  CHRONOS_REQUIRE(r >= 1 && s >= 1 && P >= 1, errc::kIllegalInput,
                  "r, s and P must be positive");
  SplittingCoefficients c;
  c.r = r;
  c.s = s;
  c.P = P;
  c.alpha.assign(static_cast<std::size_t>(r), 0.0);
  c.beta.assign(static_cast<std::size_t>(r * (s + 1) * P), 0.0);
  return c;
}

void SplittingCoefficients::validate(double tol) const {
  CHRONOS_REQUIRE(r >= 1 && s >= 1 && P >= 1, errc::kIllegalInput,
                  "r, s and P must be positive");
  CHRONOS_REQUIRE(alpha.size() == static_cast<std::size_t>(r) &&
                      beta.size() == static_cast<std::size_t>(r * (s + 1) * P),
                  errc::kDimensionMismatch, "alpha or beta size does not match r, s, P");
  double sum_alpha = 0.0;
  for (double a : alpha) sum_alpha += a;
  CHRONOS_REQUIRE(std::abs(sum_alpha - 1.0) <= tol, errc::kIllegalInput,
                  "alpha must sum to one");
  for (int k = 0; k < P; ++k) {
    double reach = 0.0;
    for (int i = 0; i < r; ++i) {
      CHRONOS_REQUIRE(beta_at(i, 0, k) == 0.0, errc::kIllegalInput,
                      "every sequential method must start at beta = 0");
      reach += alpha[static_cast<std::size_t>(i)] * beta_at(i, s, k);
    }
    CHRONOS_REQUIRE(std::abs(reach - 1.0) <= tol, errc::kIllegalInput,
                    "sum_i alpha_i beta_{i,s,k} must equal one for every partition");
  }
  for (double b : beta) {
    CHRONOS_REQUIRE(std::isfinite(b), errc::kNonFinite, "non-finite beta");
  }
}

SplittingCoefficients from_sequence(std::string name, std::vector<SubFlow> seq, int P, int order) {
  CHRONOS_REQUIRE(P >= 1, errc::kIllegalInput, "P must be positive");
  std::vector<SubFlow> merged;
  for (const SubFlow& f : seq) {
    CHRONOS_REQUIRE(f.partition >= 0 && f.partition < P, errc::kOutOfRange,
                    "sub-flow partition out of range");
    if (!merged.empty() && merged.back().partition == f.partition) {
      merged.back().fraction += f.fraction;
    } else {
      merged.push_back(f);
    }
    // Dropping a zero flow can make its neighbours adjacent.
    while (!merged.empty() && merged.back().fraction == 0.0) {
      merged.pop_back();
      if (merged.size() >= 2 && merged[merged.size() - 2].partition == merged.back().partition) {
        merged[merged.size() - 2].fraction += merged.back().fraction;
        merged.pop_back();
      }
    }
  }

  std::vector<std::vector<SubFlow>> stages;
  for (const SubFlow& f : merged) {
    if (stages.empty() || stages.back().back().partition >= f.partition) stages.emplace_back();
    stages.back().push_back(f);
  }
  if (stages.empty()) stages.emplace_back();

  const int s = static_cast<int>(stages.size());
  SplittingCoefficients c = SplittingCoefficients::zeros(1, s, P);
  c.name = std::move(name);
  c.order = order;
  c.alpha[0] = 1.0;
  std::vector<double> clock(static_cast<std::size_t>(P), 0.0);
  for (int j = 0; j < s; ++j) {
    for (const SubFlow& f : stages[static_cast<std::size_t>(j)]) {
      clock[static_cast<std::size_t>(f.partition)] += f.fraction;
    }
    for (int k = 0; k < P; ++k) c.beta_at(0, j + 1, k) = clock[static_cast<std::size_t>(k)];
  }
  return c;
}

std::vector<SubFlow> to_sequence(const SplittingCoefficients& c, int i) {
  CHRONOS_REQUIRE(i >= 0 && i < c.r, errc::kOutOfRange, "sequential method index out of range");
  std::vector<SubFlow> seq;
  for (int j = 0; j < c.s; ++j) {
    for (int k = 0; k < c.P; ++k) {
      const double g = c.gamma(i, j, k);
      if (g != 0.0) seq.push_back({k, g});
    }
  }
  return seq;
}

SplittingCoefficients lie_trotter(int P) {
  require_partitions(P);
  std::vector<SubFlow> seq;
  append_lie(seq, P, 1.0, false);
  return from_sequence(indexed_name("lie-trotter", P), seq, P, 1);
}

SplittingCoefficients strang(int P) {
  require_partitions(P);
  std::vector<SubFlow> seq;
  append_lie(seq, P, 0.5, false);
  append_lie(seq, P, 0.5, true);
  return from_sequence(indexed_name("strang", P), seq, P, 2);
}

SplittingCoefficients parallel(int P) {
  require_partitions(P);
  SplittingCoefficients c = SplittingCoefficients::zeros(P + 1, 1, P);
  c.name = indexed_name("parallel", P);
  c.order = 1;
  for (int i = 0; i < P; ++i) {
    c.alpha[static_cast<std::size_t>(i)] = 1.0;
    c.beta_at(i, 1, i) = 1.0;
  }
  c.alpha[static_cast<std::size_t>(P)] = 1.0 - P;
  return c;
}

SplittingCoefficients third_order(int P) {
  require_partitions(P);
  // Fractions of L, L*, L, L*, L, L* (Ruth's coefficients rewritten as a
  // composition of Lie-Trotter with its adjoint).
  const double x[] = {7.0 / 24.0, 3.0 / 8.0, 3.0 / 8.0, -25.0 / 24.0, 1.0, 0.0};
  std::vector<SubFlow> seq;
  for (int m = 0; m < 6; ++m) append_lie(seq, P, x[m], m % 2 == 1);
  return from_sequence(indexed_name("third-order", P), seq, P, 3);
}

std::vector<double> composition_weights(CompositionScheme scheme, int p) {
  CHRONOS_REQUIRE(p >= 2 && p % 2 == 0, errc::kIllegalInput,
                  "composition needs a base of even order");
  const double e = 1.0 / (p + 1);
  if (scheme == CompositionScheme::kTripleJump) {
    const double g1 = 1.0 / (2.0 - std::pow(2.0, e));
    return {g1, 1.0 - 2.0 * g1, g1};
  }
  const double g1 = 1.0 / (4.0 - std::pow(4.0, e));
  return {g1, g1, 1.0 - 4.0 * g1, g1, g1};
}

SplittingCoefficients compose(const SplittingCoefficients& base, CompositionScheme scheme) {
  base.validate();
  CHRONOS_REQUIRE(base.order >= 2 && base.order % 2 == 0, errc::kIllegalInput,
                  "composition needs a base of even order");
  CHRONOS_REQUIRE(base.r == 1, errc::kUnsupported,
                  "composition is defined for single-sequence methods only");
  const std::vector<SubFlow> inner = to_sequence(base, 0);
  std::vector<SubFlow> seq;
  for (double g : composition_weights(scheme, base.order)) {
    for (const SubFlow& f : inner) seq.push_back({f.partition, g * f.fraction});
  }
  const char* tag = scheme == CompositionScheme::kTripleJump ? "triple-jump(" : "quintuple-jump(";
  return from_sequence(tag + base.name + ")", seq, base.P, base.order + 2);
}

SplittingCoefficients default_method(int order, int P) {
  switch (order) {
    case 1:
      return lie_trotter(P);
    case 2:
      return strang(P);
    case 3:
      return third_order(P);
    case 4:
      return compose(strang(P), CompositionScheme::kTripleJump);
    case 6:
      return compose(compose(strang(P), CompositionScheme::kTripleJump),
                     CompositionScheme::kTripleJump);
    default:
      raise(errc::kUnsupported, "default splitting orders are 1, 2, 3, 4 and 6", __func__,
            kModule);
  }
}

SplittingCoefficients splitting_by_name(const std::string& name, int P) {
  if (name == "lie-trotter") return lie_trotter(P);
  if (name == "strang") return strang(P);
  if (name == "parallel") return parallel(P);
  if (name == "third-order") return third_order(P);
  if (name == "yoshida-4") return default_method(4, P);
  if (name == "suzuki-4") return compose(strang(P), CompositionScheme::kQuintupleJump);
  if (name == "yoshida-6") return default_method(6, P);
  raise(errc::kUnknownName, "unknown splitting method '" + name + "'", __func__, kModule);
}

std::vector<std::string> splitting_names() {
  return {"lie-trotter", "strang", "parallel", "third-order", "yoshida-4", "suzuki-4", "yoshida-6"};
}

SplittingCoefficients read_coefficients(std::istream& in) {
  std::stringstream body;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first != std::string::npos && line[first] == '#') continue;
    body << line << '\n';
  }
  int r = 0, s = 0, P = 0, order = 0;
  CHRONOS_REQUIRE(static_cast<bool>(body >> r >> s >> P >> order), errc::kIoError,
                  "missing header 'r s P order'");
  SplittingCoefficients c = SplittingCoefficients::zeros(r, s, P);
  c.order = order;
  c.name = "custom";
  for (double& a : c.alpha) {
    CHRONOS_REQUIRE(static_cast<bool>(body >> a), errc::kIoError, "too few alpha values");
  }
  for (double& b : c.beta) {
    CHRONOS_REQUIRE(static_cast<bool>(body >> b), errc::kIoError, "too few beta values");
  }
  std::string extra;
  CHRONOS_REQUIRE(!(body >> extra), errc::kIoError, "trailing data after beta");
  c.validate();
  return c;
}

void write_coefficients(std::ostream& out, const SplittingCoefficients& c) {
  char buf[40];
  out << "# " << c.name << '\n' << c.r << ' ' << c.s << ' ' << c.P << ' ' << c.order << '\n';
  for (std::size_t i = 0; i < c.alpha.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", c.alpha[i]);
    out << (i ? " " : "") << buf;
  }
  out << '\n';
  for (int i = 0; i < c.r; ++i) {
    for (int j = 0; j <= c.s; ++j) {
      for (int k = 0; k < c.P; ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", c.beta_at(i, j, k));
        out << (k ? " " : "") << buf;
      }
      out << '\n';
    }
  }
}

SplittingCoefficients load_coefficients(const std::string& path) {
  std::ifstream in(path);
  CHRONOS_REQUIRE(in.good(), errc::kIoError, "cannot open " + path);
  SplittingCoefficients c = read_coefficients(in);
  c.name = path;
  return c;
}

void save_coefficients(const std::string& path, const SplittingCoefficients& c) {
  std::ofstream out(path);
  CHRONOS_REQUIRE(out.good(), errc::kIoError, "cannot open " + path);
  write_coefficients(out, c);
}

void splitting_step(const SplittingCoefficients& c, const PartitionSteppers& steppers, double t,
                    double h, StateVector& y) {
  CHRONOS_REQUIRE(steppers.size() == static_cast<std::size_t>(c.P), errc::kDimensionMismatch,
                  "need one stepper per partition");
  StateVector yi;
  StateVector sum;
  for (int i = 0; i < c.r; ++i) {
    yi = y;
    for (int j = 0; j < c.s; ++j) {
      for (int k = 0; k < c.P; ++k) {
        const double ts = t + c.beta_at(i, j, k) * h;
        const double te = t + c.beta_at(i, j + 1, k) * h;
        if (ts == te) continue;
        Stepper* st = steppers[static_cast<std::size_t>(k)];
        try {
          st->reset(ts, yi);
          st->evolve(ts, te, yi);
        } catch (const Error& e) {
          ErrCode err = e.err();
          char where[96];
          std::snprintf(where, sizeof where, " [method %d, stage %d, partition %d]", i, j, k);
          err.message += where;
          err.code = errc::kStepperFailure;
          throw SplittingError(std::move(err), i, j, k);
        }
      }
    }
    const double a = c.alpha[static_cast<std::size_t>(i)];
    if (c.r == 1 && a == 1.0) {
      y.swap(yi);
      return;
    }
    if (i == 0) {
      sum = a * yi;
    } else {
      sum += a * yi;
    }
  }
  y.swap(sum);
}

StateVector splitting_step(const SplittingCoefficients& c, const PartitionSteppers& steppers,
                           double t, const StateVector& y, double h) {
  c.validate();
  StateVector out = y;
  splitting_step(c, steppers, t, h, out);
  return out;
}

StateVector splitting_evolve(const SplittingCoefficients& c, const PartitionSteppers& steppers,
                             double t0, double tf, double h, const StateVector& y0, long* steps) {
  c.validate();
  CHRONOS_REQUIRE(h > 0.0 && std::isfinite(h), errc::kIllegalInput, "h must be positive");
  StateVector y = y0;
  long n = 0;
  const double dir = tf >= t0 ? 1.0 : -1.0;
  const double span = std::abs(tf - t0);
  const long full = static_cast<long>(std::floor(span / h * (1.0 + 1e-14)));
  for (long m = 0; m < full; ++m, ++n) {
    splitting_step(c, steppers, t0 + dir * static_cast<double>(m) * h, dir * h, y);
  }
  const double done = static_cast<double>(full) * h;
  if (span - done > 1e-12 * std::max(1.0, span)) {
    splitting_step(c, steppers, t0 + dir * done, dir * (span - done), y);
    ++n;
  }
  if (steps != nullptr) *steps = n;
  return y;
}

FlowStepper::FlowStepper(FlowFn flow, bool handles_forcing)
    : flow_(std::move(flow)), handles_forcing_(handles_forcing) {
  CHRONOS_REQUIRE(static_cast<bool>(flow_), errc::kIllegalInput, "empty flow");
}

FlowStepper FlowStepper::plain(std::function<void(double, double, StateVector&)> flow) {
  CHRONOS_REQUIRE(static_cast<bool>(flow), errc::kIllegalInput, "empty flow");
  return FlowStepper(
      [f = std::move(flow)](double t0, double t1, StateVector& y, const StateVector*) {
        f(t0, t1, y);
      },
      false);
}

void FlowStepper::set_forcing(const StateVector& forcing) {
  if (!handles_forcing_) Stepper::set_forcing(forcing);
  forcing_ = forcing;
  has_forcing_ = true;
}

void FlowStepper::do_evolve(double t_start, double t_end, StateVector& y) {
  ++calls_;
  flow_(t_start, t_end, y, has_forcing_ ? &forcing_ : nullptr);
}

SplittingStepper::SplittingStepper(SplittingCoefficients c, PartitionSteppers steppers,
                                   int substeps)
    : coef_(std::move(c)), steppers_(std::move(steppers)), substeps_(substeps) {
  coef_.validate();
  CHRONOS_REQUIRE(steppers_.size() == static_cast<std::size_t>(coef_.P),
                  errc::kDimensionMismatch, "need one stepper per partition");
  CHRONOS_REQUIRE(substeps_ >= 1, errc::kIllegalInput, "substeps must be at least 1");
}

void SplittingStepper::do_evolve(double t_start, double t_end, StateVector& y) {
  const double h = (t_end - t_start) / substeps_;
  for (int n = 0; n < substeps_; ++n) splitting_step(coef_, steppers_, t_start + n * h, h, y);
}

void forcing_step(Stepper& first, Stepper& second, double t, double h, StateVector& y) {
  CHRONOS_REQUIRE(second.supports_forcing(), errc::kUnsupported,
                  "the partition-2 stepper does not support forcing");
  StateVector v1 = y;
  first.reset(t, v1);
  first.evolve(t, t + h, v1);
  const StateVector fstar = (v1 - y) / h;
  second.reset(t, y);
  second.set_forcing(fstar);
  try {
    second.evolve(t, t + h, y);
  } catch (...) {
    second.clear_forcing();
    throw;
  }
  second.clear_forcing();
}

StateVector forcing_step(Stepper& first, Stepper& second, double t, const StateVector& y,
                         double h) {
  CHRONOS_REQUIRE(h != 0.0 && std::isfinite(h), errc::kIllegalInput, "h must be finite and nonzero");
  StateVector out = y;
  forcing_step(first, second, t, h, out);
  return out;
}

StateVector forcing_evolve(Stepper& first, Stepper& second, double t0, double tf, double h,
                           const StateVector& y0, long* steps) {
  CHRONOS_REQUIRE(h > 0.0 && std::isfinite(h), errc::kIllegalInput, "h must be positive");
  CHRONOS_REQUIRE(second.supports_forcing(), errc::kUnsupported,
                  "the partition-2 stepper does not support forcing");
  StateVector y = y0;
  const double dir = tf >= t0 ? 1.0 : -1.0;
  const double span = std::abs(tf - t0);
  const long full = static_cast<long>(std::floor(span / h * (1.0 + 1e-14)));
  long n = 0;
  for (long m = 0; m < full; ++m, ++n) {
    forcing_step(first, second, t0 + dir * static_cast<double>(m) * h, dir * h, y);
  }
  const double done = static_cast<double>(full) * h;
  if (span - done > 1e-12 * std::max(1.0, span)) {
    forcing_step(first, second, t0 + dir * done, dir * (span - done), y);
    ++n;
  }
  if (steps != nullptr) *steps = n;
  return y;
}

ForcingStepper::ForcingStepper(Stepper& first, Stepper& second, int substeps)
    : first_(&first), second_(&second), substeps_(substeps) {
  CHRONOS_REQUIRE(second.supports_forcing(), errc::kUnsupported,
                  "the partition-2 stepper does not support forcing");
  CHRONOS_REQUIRE(substeps_ >= 1, errc::kIllegalInput, "substeps must be at least 1");
}

void ForcingStepper::do_evolve(double t_start, double t_end, StateVector& y) {
  const double h = (t_end - t_start) / substeps_;
  for (int n = 0; n < substeps_; ++n) forcing_step(*first_, *second_, t_start + n * h, h, y);
}

erk::ErkStepper stepper_from_erk(const erk::ButcherTable& table, const OdeSystem& system,
                                 int substeps) {
  return erk::ErkStepper::fixed(table, system, substeps);
}

erk::ErkStepper stepper_from_erk(const erk::ButcherTable& table, const OdeSystem& system,
                                 const ToleranceSpec& tol) {
  return erk::ErkStepper::adaptive(table, system, tol);
}

}  // namespace chronos::splitting

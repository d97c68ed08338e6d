#include "chronos/harness/gray_scott.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace chronos::harness {

namespace {
constexpr const char* kModule = "harness";

double bump(double x, double y, double x0, double y0) {
  return std::exp(-80.0 * ((x - x0) * (x - x0) + (y - y0) * (y - y0)));
}
}  // namespace

void GrayScottProblem::validate() const {
  CHRONOS_REQUIRE(N >= 3, errc::kIllegalInput, "grid needs at least 3 points per side");
  CHRONOS_REQUIRE(eps1 >= 0.0 && eps2 >= 0.0, errc::kIllegalInput,
                  "diffusion coefficients must be non-negative");
  CHRONOS_REQUIRE(std::isfinite(a) && std::isfinite(b), errc::kIllegalInput,
                  "reaction parameters must be finite");
}

StateVector GrayScottProblem::initial_state() const {
  validate();
  const Index M = cells();
  StateVector y(2 * M);
  const double h = dx();
  for (int j = 0; j < N; ++j) {
    const double yc = -1.0 + j * h;
    for (int i = 0; i < N; ++i) {
      const double xc = -1.0 + i * h;
      const Index c = static_cast<Index>(j) * N + i;
      y[c] = 1.0 - bump(xc, yc, -0.05, -0.02);
      y[M + c] = bump(xc, yc, 0.05, 0.02);
    }
  }
  return y;
}

void GrayScottProblem::laplacian(const Eigen::Ref<const StateVector>& field,
                                 Eigen::Ref<StateVector> out) const {
  const double s = 1.0 / (dx() * dx());
  for (int j = 0; j < N; ++j) {
    const int jm = j == 0 ? N - 1 : j - 1;
    const int jp = j == N - 1 ? 0 : j + 1;
    const double* row = field.data() + static_cast<Index>(j) * N;
    const double* below = field.data() + static_cast<Index>(jm) * N;
    const double* above = field.data() + static_cast<Index>(jp) * N;
    double* o = out.data() + static_cast<Index>(j) * N;
    for (int i = 0; i < N; ++i) {
      const int im = i == 0 ? N - 1 : i - 1;
      const int ip = i == N - 1 ? 0 : i + 1;
      o[i] = s * ((row[im] + row[ip]) + (below[i] + above[i]) - 4.0 * row[i]);
    }
  }
}

OdeSystem GrayScottProblem::diffusion() const {
  validate();
  const GrayScottProblem p = *this;
  const Index M = cells();
  return {dimension(), [p, M](double, const StateVector& y, StateVector& ydot) {
            p.laplacian(y.head(M), ydot.head(M));
            p.laplacian(y.tail(M), ydot.tail(M));
            ydot.head(M) *= p.eps1;
            ydot.tail(M) *= p.eps2;
          }};
}

OdeSystem GrayScottProblem::reaction_u() const {
  validate();
  const double a_ = a;
  const Index M = cells();
  return {dimension(), [a_, M](double, const StateVector& y, StateVector& ydot) {
            for (Index c = 0; c < M; ++c) {
              const double u = y[c], v = y[M + c];
              ydot[c] = -u * v * v + a_ * (1.0 - u);
              ydot[M + c] = 0.0;
            }
          }};
}

OdeSystem GrayScottProblem::reaction_v() const {
  validate();
  const double k = a + b;
  const Index M = cells();
  return {dimension(), [k, M](double, const StateVector& y, StateVector& ydot) {
            for (Index c = 0; c < M; ++c) {
              const double u = y[c], v = y[M + c];
              ydot[c] = 0.0;
              ydot[M + c] = u * v * v - k * v;
            }
          }};
}

PartitionedOdeSystem GrayScottProblem::partitioned() const {
  return {dimension(), {reaction_u().rhs, reaction_v().rhs, diffusion().rhs}};
}

OdeSystem GrayScottProblem::full() const {
  validate();
  const GrayScottProblem p = *this;
  const Index M = cells();
  const double k = a + b;
  return {dimension(), [p, M, k](double, const StateVector& y, StateVector& ydot) {
            p.laplacian(y.head(M), ydot.head(M));
            p.laplacian(y.tail(M), ydot.tail(M));
            for (Index c = 0; c < M; ++c) {
              const double u = y[c], v = y[M + c];
              const double uvv = u * v * v;
              ydot[c] = p.eps1 * ydot[c] - uvv + p.a * (1.0 - u);
              ydot[M + c] = p.eps2 * ydot[M + c] + uvv - k * v;
            }
          }};
}

double GrayScottProblem::diffusion_gershgorin() const {
  return 8.0 * std::max(eps1, eps2) / (dx() * dx());
}

double linear_flow(double u0, double v, double a, double tau) {
  const double c = v * v + a;
  if (c == 0.0) return u0;
  const double ueq = a / c;
  // u0 + (ueq - u0)(1 - e^{-c tau})
  return u0 - (ueq - u0) * std::expm1(-c * tau);
}

double riccati_blowup_time(double v0, double u, double a, double b) {
  if (v0 == 0.0) return std::numeric_limits<double>::infinity();
  const double w0 = 1.0 / v0;
  const double k = a + b;
  if (k == 0.0) {
    return u == 0.0 ? std::numeric_limits<double>::infinity() : w0 / u;
  }
  const double q = u / k;
  const double r = q / (q - w0);
  if (!(r > 0.0) || !std::isfinite(r)) return std::numeric_limits<double>::infinity();
  return std::log(r) / k;
}

double riccati_flow(double v0, double u, double a, double b, double tau) {
  if (v0 == 0.0 || tau == 0.0) return v0;
  const double w0 = 1.0 / v0;
  const double k = a + b;
  const double z = k * tau;
  const double em1 = std::expm1(z);
  const double phi = z == 0.0 ? tau : em1 / k;  // (e^{k tau} - 1) / k
  const double w = w0 + w0 * em1 - u * phi;
  if (w == 0.0 || std::signbit(w) != std::signbit(w0) || !std::isfinite(w)) {
    const double ts = riccati_blowup_time(v0, u, a, b);
    char msg[128];
    std::snprintf(msg, sizeof msg, "Riccati solution blows up at tau = %.17g", ts);
    throw BlowUpError(ErrCode{errc::kBlowUp, msg, "riccati_flow", kModule}, ts);
  }
  return 1.0 / w;
}

splitting::FlowStepper exact_stepper_linear(const GrayScottProblem& problem) {
  problem.validate();
  const double a = problem.a;
  const Index M = problem.cells();
  return splitting::FlowStepper::plain([a, M](double t0, double t1, StateVector& y) {
    CHRONOS_REQUIRE(y.size() == 2 * M, errc::kDimensionMismatch, "state has the wrong length");
    const double tau = t1 - t0;
    for (Index c = 0; c < M; ++c) y[c] = linear_flow(y[c], y[M + c], a, tau);
  });
}

splitting::FlowStepper exact_stepper_riccati(const GrayScottProblem& problem) {
  problem.validate();
  const double a = problem.a, b = problem.b;
  const Index M = problem.cells();
  return splitting::FlowStepper::plain([a, b, M](double t0, double t1, StateVector& y) {
    CHRONOS_REQUIRE(y.size() == 2 * M, errc::kDimensionMismatch, "state has the wrong length");
    const double tau = t1 - t0;
    for (Index c = 0; c < M; ++c) y[M + c] = riccati_flow(y[M + c], y[c], a, b, tau);
  });
}

}  // namespace chronos::harness

#include "chronos/lsrk.hpp"

#include <Eigen/QR>

#include <array>
#include <cmath>
#include <limits>
#include <map>

namespace chronos::lsrk {

namespace {
constexpr const char* kModule = "lsrk";

// Damping parameter of the second-order RKC polynomial.
constexpr double kRkcDamping = 2.0 / 13.0;
}  // namespace

// ---------------------------------------------------------------------------
// Stage-count selection

double default_stage_safety(StsMethod method) {
  return method == StsMethod::kRKC ? 1.65 : 1.01;
}

void StsConfig::validate() const {
  CHRONOS_REQUIRE(max_stages >= 2, errc::kIllegalInput, "max_stages must be at least 2");
  CHRONOS_REQUIRE(stage_safety == 0.0 || stage_safety >= 1.0, errc::kIllegalInput,
                  "stage_safety must be at least 1");
  CHRONOS_REQUIRE(rho_recompute_period >= 1, errc::kIllegalInput,
                  "rho_recompute_period must be positive");
}

double StsConfig::effective_safety() const {
  return stage_safety > 0.0 ? stage_safety : default_stage_safety(method);
}

double stability_extent(StsMethod method, int s) {
  const double ds = static_cast<double>(s);
  if (method == StsMethod::kRKC) return 0.81 * ds * ds;
  return (ds * ds + ds - 2.0) / 2.0;
}

StageChoice select_stage_count(const StsConfig& cfg, double h, double rho) {
  cfg.validate();
  CHRONOS_REQUIRE(h > 0.0, errc::kIllegalInput, "h must be positive");
  CHRONOS_REQUIRE(rho >= 0.0 && std::isfinite(rho), errc::kIllegalInput,
                  "rho must be finite and non-negative");
  const double target = cfg.effective_safety() * h * rho;
  if (stability_extent(cfg.method, cfg.max_stages) < target) {
    return {cfg.max_stages, true};
  }
  // Start just below the closed-form root and walk up.
  const double coef = cfg.method == StsMethod::kRKC ? 0.81 : 0.5;
  int s = std::max(2, static_cast<int>(std::sqrt(target / coef)) - 1);
  while (s > 2 && stability_extent(cfg.method, s - 1) >= target) --s;
  while (stability_extent(cfg.method, s) < target) ++s;
  return {s, false};
}

double max_stable_step(const StsConfig& cfg, double rho) {
  if (rho <= 0.0) return std::numeric_limits<double>::infinity();
  return stability_extent(cfg.method, cfg.max_stages) / (cfg.effective_safety() * rho);
}

// ---------------------------------------------------------------------------
// Coefficients

namespace {

void fill_abscissae(StsCoefficients& k) {
  // c_j = (z_j - z_0)/h for y' = 1.
  k.c[0] = 0.0;
  k.c[1] = k.mu_tilde[1];
  for (int j = 2; j <= k.s; ++j) {
    k.c[j] = k.mu[j] * k.c[j - 1] + k.nu[j] * k.c[j - 2] + k.mu_tilde[j] + k.gamma_tilde[j];
  }
}

StsCoefficients rkc_coefficients(int s) {
  StsCoefficients k;
  k.s = s;
  const auto n = static_cast<std::size_t>(s + 1);
  k.mu.assign(n, 0.0);
  k.nu.assign(n, 0.0);
  k.mu_tilde.assign(n, 0.0);
  k.gamma_tilde.assign(n, 0.0);
  k.c.assign(n, 0.0);

  const double w0 = 1.0 + kRkcDamping / (static_cast<double>(s) * s);
  // Chebyshev polynomials and their first two derivatives at w0.
  std::vector<double> T(n), dT(n), d2T(n);
  T[0] = 1.0;
  T[1] = w0;
  dT[0] = 0.0;
  dT[1] = 1.0;
  d2T[0] = 0.0;
  d2T[1] = 0.0;
  for (std::size_t j = 2; j < n; ++j) {
    T[j] = 2.0 * w0 * T[j - 1] - T[j - 2];
    dT[j] = 2.0 * T[j - 1] + 2.0 * w0 * dT[j - 1] - dT[j - 2];
    d2T[j] = 4.0 * dT[j - 1] + 2.0 * w0 * d2T[j - 1] - d2T[j - 2];
  }
  const double w1 = dT[n - 1] / d2T[n - 1];

  std::vector<double> b(n), a(n);
  for (std::size_t j = 2; j < n; ++j) b[j] = d2T[j] / (dT[j] * dT[j]);
  b[0] = b[1] = b[2];
  for (std::size_t j = 0; j < n; ++j) a[j] = 1.0 - b[j] * T[j];

  k.mu_tilde[1] = b[1] * w1;
  for (std::size_t j = 2; j < n; ++j) {
    k.mu[j] = 2.0 * w0 * b[j] / b[j - 1];
    k.nu[j] = -b[j] / b[j - 2];
    k.mu_tilde[j] = 2.0 * w1 * b[j] / b[j - 1];
    k.gamma_tilde[j] = -a[j - 1] * k.mu_tilde[j];
  }
  fill_abscissae(k);
  return k;
}

StsCoefficients rkl_coefficients(int s) {
  StsCoefficients k;
  k.s = s;
  const auto n = static_cast<std::size_t>(s + 1);
  k.mu.assign(n, 0.0);
  k.nu.assign(n, 0.0);
  k.mu_tilde.assign(n, 0.0);
  k.gamma_tilde.assign(n, 0.0);
  k.c.assign(n, 0.0);

  const double ds = static_cast<double>(s);
  const double w1 = 4.0 / (ds * ds + ds - 2.0);
  std::vector<double> b(n), a(n);
  for (std::size_t j = 2; j < n; ++j) {
    const double dj = static_cast<double>(j);
    b[j] = (dj * dj + dj - 2.0) / (2.0 * dj * (dj + 1.0));
  }
  b[0] = b[1] = b[2] = 1.0 / 3.0;
  for (std::size_t j = 0; j < n; ++j) a[j] = 1.0 - b[j];

  k.mu_tilde[1] = b[1] * w1;
  for (std::size_t j = 2; j < n; ++j) {
    const double dj = static_cast<double>(j);
    k.mu[j] = (2.0 * dj - 1.0) / dj * b[j] / b[j - 1];
    k.nu[j] = -(dj - 1.0) / dj * b[j] / b[j - 2];
    k.mu_tilde[j] = k.mu[j] * w1;
    k.gamma_tilde[j] = -a[j - 1] * k.mu_tilde[j];
  }
  fill_abscissae(k);
  return k;
}

}  // namespace

StsCoefficients sts_coefficients(StsMethod method, int s) {
  CHRONOS_REQUIRE(s >= 2, errc::kIllegalInput, "STS methods need at least two stages");
  return method == StsMethod::kRKC ? rkc_coefficients(s) : rkl_coefficients(s);
}

// ---------------------------------------------------------------------------
// STS step

void StsWorkspace::resize(Index n) {
  if (f0.size() != n) {
    f0.resize(n);
    zjm1.resize(n);
    zjm2.resize(n);
    fj.resize(n);
  }
}

void sts_step(const StsCoefficients& coef, const RhsFn& rhs, double t, const StateVector& y,
              double h, StsWorkspace& ws, StateVector& y_next, StateVector* est, bool f0_known) {
  const int s = coef.s;
  ws.resize(y.size());
  if (!f0_known) rhs(t, y, ws.f0);

  ws.zjm2 = y;
  ws.zjm1 = y + (h * coef.mu_tilde[1]) * ws.f0;
  for (int j = 2; j <= s; ++j) {
    const double mu = coef.mu[j];
    const double nu = coef.nu[j];
    rhs(t + coef.c[j - 1] * h, ws.zjm1, ws.fj);
    // z_j overwrites z_{j-2}; the update is elementwise so aliasing is safe.
    // Written as increments on y so f = 0 leaves y unchanged exactly.
    ws.zjm2 = y + mu * (ws.zjm1 - y) + nu * (ws.zjm2 - y) + (h * coef.mu_tilde[j]) * ws.fj +
              (h * coef.gamma_tilde[j]) * ws.f0;
    ws.zjm1.swap(ws.zjm2);
  }
  y_next = ws.zjm1;
  CHRONOS_CHECK_FULL(y_next.allFinite(), errc::kNonFinite, "non-finite STS stage");

  if (est != nullptr) {
    rhs(t + h, y_next, ws.fj);
    *est = (12.0 / 15.0) * (y - y_next) + (6.0 * h / 15.0) * (ws.f0 + ws.fj);
  }
}

StsStepResult sts_step(const StsConfig& cfg, const OdeSystem& system, double t,
                       const StateVector& y, double h, int s) {
  cfg.validate();
  system.validate();
  CHRONOS_REQUIRE(h > 0.0, errc::kIllegalInput, "h must be positive");
  CHRONOS_REQUIRE(s >= 2 && s <= cfg.max_stages, errc::kOutOfRange,
                  "stage count outside [2, max_stages]");
  CHRONOS_REQUIRE(y.size() == system.dimension, errc::kDimensionMismatch,
                  "state length differs from the system dimension");
  StsWorkspace ws;
  StsStepResult out;
  out.y_next.resize(y.size());
  out.est.resize(y.size());
  sts_step(sts_coefficients(cfg.method, s), system.rhs, t, y, h, ws, out.y_next, &out.est);
  return out;
}

namespace {

class StsSingleStep : public SingleStepMethod {
 public:
  StsSingleStep(StsConfig cfg, OdeSystem system, StsStats& stats)
      : cfg_(std::move(cfg)), system_(std::move(system)), stats_(stats) {}

  std::string_view name() const override {
    return cfg_.method == StsMethod::kRKC ? "rkc" : "rkl";
  }
  int controller_order() const override { return 2; }
  Index dimension() const override { return system_.dimension; }

  double limit_step(double t, const StateVector& y, double h) override {
    if (rho_stale_ || steps_since_rho_ >= cfg_.rho_recompute_period) {
      rho_ = cfg_.rho_estimator(t, y);
      CHRONOS_REQUIRE(rho_ >= 0.0 && std::isfinite(rho_), errc::kIllegalInput,
                      "rho estimator returned a negative or non-finite value");
      ++stats_.rho_evaluations;
      stats_.last_rho = rho_;
      rho_stale_ = false;
      steps_since_rho_ = 0;
    }
    return std::min(h, max_stable_step(cfg_, rho_));
  }

  void attempt(double t, const StateVector& y, double h, StateVector& y_next,
               StateVector& error) override {
    const StageChoice choice = select_stage_count(cfg_, h, rho_);
    const int s = choice.stages;
    auto it = coefs_.find(s);
    if (it == coefs_.end()) it = coefs_.emplace(s, sts_coefficients(cfg_.method, s)).first;
    sts_step(it->second, system_.rhs, t, y, h, ws_, y_next, &error, f0_valid_);
    evals_ += (f0_valid_ ? 0 : 1) + (s - 1) + 1;
    f0_valid_ = true;
    stats_.stage_total += s;
    stats_.max_stages_used = std::max(stats_.max_stages_used, s);
    stats_.min_stages_used =
        stats_.min_stages_used == 0 ? s : std::min(stats_.min_stages_used, s);
  }

  void on_accept(double, const StateVector&, double) override {
    ++steps_since_rho_;
    // f(t_n, y_n) from the estimate becomes f(t_{n-1}, z_0) of the next step.
    ws_.f0.swap(ws_.fj);
  }
  void on_reject(double) override { rho_stale_ = true; }
  void restart() override {
    f0_valid_ = false;
    rho_stale_ = true;
  }
  long rhs_evaluations() const override { return evals_; }

 private:
  StsConfig cfg_;
  OdeSystem system_;
  StsStats& stats_;
  StsWorkspace ws_;
  std::map<int, StsCoefficients> coefs_;
  double rho_ = 0.0;
  bool rho_stale_ = true;
  int steps_since_rho_ = 0;
  bool f0_valid_ = false;
  long evals_ = 0;
};

}  // namespace

StsResult sts_evolve(const StsConfig& cfg, const OdeSystem& system,
                     const StepController& controller, const ToleranceSpec& tol, double t0,
                     double tf, const StateVector& y0, const EvolveOptions& options) {
  cfg.validate();
  system.validate();
  CHRONOS_REQUIRE(static_cast<bool>(cfg.rho_estimator), errc::kIllegalInput,
                  "STS integration needs a rho estimator");
  StsResult out;
  StsSingleStep method(cfg, system, out.sts);
  static_cast<AdaptiveResult&>(out) =
      evolve_adaptive(method, controller, tol, t0, tf, y0, options);
  return out;
}

// ---------------------------------------------------------------------------
// SSP

void SspConfig::validate() const {
  switch (family) {
    case SspFamily::kSSP2:
      CHRONOS_REQUIRE(stages >= 2, errc::kIllegalInput, "SSP2 needs at least two stages");
      break;
    case SspFamily::kSSP3: {
      const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(stages))));
      CHRONOS_REQUIRE(k >= 2 && k * k == stages, errc::kIllegalInput,
                      "SSP3 needs a square stage count k^2 with k >= 2");
      break;
    }
    case SspFamily::kSSP4:
      CHRONOS_REQUIRE(stages == 10, errc::kIllegalInput, "SSP4 has exactly 10 stages");
      break;
  }
}

int SspConfig::order() const {
  switch (family) {
    case SspFamily::kSSP2:
      return 2;
    case SspFamily::kSSP3:
      return 3;
    case SspFamily::kSSP4:
      return 4;
  }
  return 0;
}

namespace {

constexpr int kY = 0;
constexpr int kQ1 = 1;
constexpr int kQ2 = 2;

struct ProgramBuilder {
  SspProgram prog;
  void copy(int dst, int src) { prog.ops.push_back({SspOp::kCopy, dst, src, 0, 0.0, 0.0}); }
  void comb(int dst, double a, int src, double b, int src2) {
    prog.ops.push_back({SspOp::kComb, dst, src, src2, a, b});
  }
  // dst = src + a h f(src), with dst == src in every scheme here.
  void euler(int reg, double a) {
    prog.ops.push_back({SspOp::kEval, 0, reg, 0, 0.0, 0.0});
    prog.ops.push_back({SspOp::kAddF, reg, 0, 0, a, 0.0});
    ++prog.stages;
  }
  void eval(int reg) {
    prog.ops.push_back({SspOp::kEval, 0, reg, 0, 0.0, 0.0});
    ++prog.stages;
  }
  void add_f(int dst, double a) { prog.ops.push_back({SspOp::kAddF, dst, 0, 0, a, 0.0}); }
};

SspProgram build_ops(const SspConfig& cfg) {
  ProgramBuilder pb;
  const int s = cfg.stages;
  switch (cfg.family) {
    case SspFamily::kSSP2: {
      const double a = 1.0 / (s - 1);
      pb.copy(kQ1, kY);
      for (int i = 0; i < s; ++i) pb.euler(kQ1, a);
      pb.comb(kQ1, 1.0 / s, kY, (s - 1.0) / s, kQ1);
      pb.prog.output = kQ1;
      break;
    }
    case SspFamily::kSSP3: {
      const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(s))));
      const double a = 1.0 / (s - n);
      const int first = (n - 1) * (n - 2) / 2;
      const int mid = n * (n + 1) / 2;
      pb.copy(kQ1, kY);
      for (int i = 0; i < first; ++i) pb.euler(kQ1, a);
      pb.copy(kQ2, kQ1);
      for (int i = first + 1; i < mid; ++i) pb.euler(kQ1, a);
      pb.euler(kQ1, a);
      pb.comb(kQ1, n / (2.0 * n - 1.0), kQ2, (n - 1.0) / (2.0 * n - 1.0), kQ1);
      for (int i = mid + 1; i <= s; ++i) pb.euler(kQ1, a);
      pb.prog.output = kQ1;
      break;
    }
    case SspFamily::kSSP4: {
      pb.copy(kQ1, kY);
      pb.copy(kQ2, kY);
      for (int i = 0; i < 5; ++i) pb.euler(kQ1, 1.0 / 6.0);
      pb.comb(kQ2, 1.0 / 25.0, kQ2, 9.0 / 25.0, kQ1);
      pb.comb(kQ1, 15.0, kQ2, -5.0, kQ1);
      for (int i = 0; i < 4; ++i) pb.euler(kQ1, 1.0 / 6.0);
      pb.eval(kQ1);
      pb.comb(kQ2, 1.0, kQ2, 3.0 / 5.0, kQ1);
      pb.add_f(kQ2, 1.0 / 10.0);
      pb.prog.output = kQ2;
      break;
    }
  }
  return pb.prog;
}

// Runs the program on coefficient vectors over the basis {y, h f_1, ..., h f_s}.
void trace(const SspProgram& prog, Eigen::MatrixXd& A, Eigen::VectorXd& b) {
  const int s = prog.stages;
  std::array<Eigen::VectorXd, 3> reg;
  for (auto& r : reg) r = Eigen::VectorXd::Zero(s + 1);
  reg[kY][0] = 1.0;
  A = Eigen::MatrixXd::Zero(s, s);
  int stage = -1;
  for (const auto& op : prog.ops) {
    switch (op.kind) {
      case SspOp::kEval:
        ++stage;
        A.row(stage) = reg[static_cast<std::size_t>(op.src)].tail(s).transpose();
        break;
      case SspOp::kAddF:
        reg[static_cast<std::size_t>(op.dst)][stage + 1] += op.a;
        break;
      case SspOp::kComb:
        reg[static_cast<std::size_t>(op.dst)] = op.a * reg[static_cast<std::size_t>(op.src)] +
                                                op.b * reg[static_cast<std::size_t>(op.src2)];
        break;
      case SspOp::kCopy:
        reg[static_cast<std::size_t>(op.dst)] = reg[static_cast<std::size_t>(op.src)];
        break;
    }
  }
  b = reg[static_cast<std::size_t>(prog.output)].tail(s);
}

// Weights delta with sum_i delta_i Phi_i(t) = 0 for every tree t of order < p,
// so that b - delta is an embedding of order p - 1.
Eigen::VectorXd embedding_weights(const Eigen::MatrixXd& A, int p) {
  const Eigen::Index s = A.rows();
  const Eigen::VectorXd c = A.rowwise().sum();
  std::vector<Eigen::VectorXd> rows;
  rows.push_back(Eigen::VectorXd::Ones(s));
  if (p - 1 >= 2) rows.push_back(c);
  if (p - 1 >= 3) {
    rows.push_back(c.cwiseProduct(c));
    rows.push_back(A * c);
  }
  Eigen::MatrixXd Mt(s, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) Mt.col(static_cast<Eigen::Index>(i)) = rows[i];
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Mt);
  const Eigen::Index rank = qr.rank();
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(s, rank);

  Eigen::VectorXd delta = Eigen::VectorXd::Zero(s);
  for (Eigen::Index target = s - 1; target >= 0; --target) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(s);
    e[target] = 1.0;
    delta = e - Q * (Q.transpose() * e);
    if (delta.cwiseAbs().maxCoeff() > 1e-8) break;
  }
  delta *= (1.0 / static_cast<double>(s)) / delta.cwiseAbs().maxCoeff();
  return delta;
}

}  // namespace

SspProgram ssp_program(const SspConfig& cfg) {
  cfg.validate();
  SspProgram prog = build_ops(cfg);
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  trace(prog, A, b);
  const Eigen::VectorXd c = A.rowwise().sum();
  prog.c.assign(c.data(), c.data() + c.size());
  const Eigen::VectorXd delta = embedding_weights(A, cfg.order());
  prog.delta.assign(delta.data(), delta.data() + delta.size());
  return prog;
}

erk::ButcherTable ssp_butcher_table(const SspConfig& cfg) {
  const SspProgram prog = ssp_program(cfg);
  erk::ButcherTable t;
  trace(prog, t.A, t.b);
  t.c = t.A.rowwise().sum();
  t.b_embed = t.b - Eigen::Map<const Eigen::VectorXd>(prog.delta.data(), prog.stages);
  t.order = cfg.order();
  t.embed_order = cfg.order() - 1;
  t.name = "ssp" + std::to_string(cfg.order()) + "-" + std::to_string(cfg.stages);
  return t;
}

void SspWorkspace::resize(Index n) {
  if (q1.size() != n) {
    q1.resize(n);
    q2.resize(n);
    f.resize(n);
    e.resize(n);
  }
}

void ssp_step(const SspProgram& prog, const RhsFn& rhs, double t, const StateVector& y,
              double h, SspWorkspace& ws, StateVector& y_next, StateVector* est) {
  ws.resize(y.size());
  auto read = [&](int r) -> const StateVector& {
    return r == kY ? y : (r == kQ1 ? ws.q1 : ws.q2);
  };
  auto write = [&](int r) -> StateVector& { return r == kQ1 ? ws.q1 : ws.q2; };
  if (est != nullptr) ws.e.setZero();
  int stage = 0;
  for (const auto& op : prog.ops) {
    switch (op.kind) {
      case SspOp::kEval: {
        const auto i = static_cast<std::size_t>(stage++);
        rhs(t + prog.c[i] * h, read(op.src), ws.f);
        if (est != nullptr) ws.e += (h * prog.delta[i]) * ws.f;
        break;
      }
      case SspOp::kAddF:
        write(op.dst) += (h * op.a) * ws.f;
        break;
      case SspOp::kComb:
        write(op.dst) = op.a * read(op.src) + op.b * read(op.src2);
        break;
      case SspOp::kCopy:
        write(op.dst) = read(op.src);
        break;
    }
  }
  y_next = read(prog.output);
  if (est != nullptr) *est = ws.e;
}

SspStepResult ssp_step(const SspConfig& cfg, const OdeSystem& system, double t,
                       const StateVector& y, double h) {
  system.validate();
  CHRONOS_REQUIRE(h > 0.0, errc::kIllegalInput, "h must be positive");
  CHRONOS_REQUIRE(y.size() == system.dimension, errc::kDimensionMismatch,
                  "state length differs from the system dimension");
  const SspProgram prog = ssp_program(cfg);
  SspWorkspace ws;
  SspStepResult out;
  out.y_next.resize(y.size());
  out.est.resize(y.size());
  ssp_step(prog, system.rhs, t, y, h, ws, out.y_next, &out.est);
  return out;
}

namespace {

class SspSingleStep : public SingleStepMethod {
 public:
  SspSingleStep(const SspConfig& cfg, OdeSystem system)
      : prog_(ssp_program(cfg)), order_(cfg.order()), system_(std::move(system)) {}
  std::string_view name() const override { return "ssp"; }
  int controller_order() const override { return order_ - 1; }
  Index dimension() const override { return system_.dimension; }
  void attempt(double t, const StateVector& y, double h, StateVector& y_next,
               StateVector& error) override {
    ssp_step(prog_, system_.rhs, t, y, h, ws_, y_next, &error);
    evals_ += prog_.stages;
  }
  long rhs_evaluations() const override { return evals_; }

 private:
  SspProgram prog_;
  int order_;
  OdeSystem system_;
  SspWorkspace ws_;
  long evals_ = 0;
};

}  // namespace

AdaptiveResult ssp_evolve(const SspConfig& cfg, const OdeSystem& system,
                          const StepController& controller, const ToleranceSpec& tol, double t0,
                          double tf, const StateVector& y0, const EvolveOptions& options) {
  system.validate();
  SspSingleStep method(cfg, system);
  return evolve_adaptive(method, controller, tol, t0, tf, y0, options);
}

}  // namespace chronos::lsrk

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chronos/anderson.hpp"
#include "chronos/core.hpp"
#include "chronos/harness/csv.hpp"
#include "chronos/harness/gray_scott.hpp"

namespace chronos::harness {

/// Least-squares slope of log(err) against log(h). Non-finite and
/// non-positive errors are skipped; NaN when fewer than two points remain.
double loglog_slope(const std::vector<double>& h, const std::vector<double>& err);

/// Like loglog_slope, but when the last two points (in decreasing h) have a
/// slope below 1 the last point is treated as a roundoff floor and dropped.
double loglog_slope_floored(const std::vector<double>& h, const std::vector<double>& err);

/// h = 2^-i for i = first .. last.
std::vector<double> dyadic_steps(int first, int last);

// ---------------------------------------------------------------------------
// Gray-Scott, operator splitting

/// Default parameters on an N x N grid.
GrayScottProblem with_grid(int N);

struct SplittingExperimentConfig {
  GrayScottProblem problem;  ///< N = 64 by default
  double t_end = 10.0;
  std::vector<double> steps = dyadic_steps(0, 7);
  std::vector<std::string> methods = {"lie-trotter", "strang", "third-order", "yoshida-4",
                                      "yoshida-6"};
  /// dopri5 reference at reltol = abstol = ref_tol. Looser references floor
  /// the order-6 errors near 1e-13.
  double ref_tol = 1e-14;
  /// Off: wall times are written as 0 so repeated runs give identical files.
  bool record_timing = true;
  const Logger* logger = nullptr;
};

struct SplittingRow {
  std::string method;
  int order = 0;
  double h = 0.0;
  double error = 0.0;  ///< relative 2-norm over the whole state; NaN when flagged
  double wall_time = 0.0;
  long steps = 0;
  bool blowup = false;
};

struct SplittingExperimentResult {
  std::vector<SplittingRow> rows;
  long reference_steps = 0;

  [[nodiscard]] CsvTable table() const;
  /// Fitted slope of each method, in configuration order.
  [[nodiscard]] std::vector<std::pair<std::string, double>> slopes() const;
};

/// Partition 1 and 2 are solved exactly; partition 3 (diffusion) takes one
/// ERK step of the method's order per subinterval.
SplittingExperimentResult run_gray_scott_splitting(const SplittingExperimentConfig& cfg);

/// ERK table used for the diffusion partition of a splitting of this order.
std::string diffusion_table_for_order(int order);

// ---------------------------------------------------------------------------
// Gray-Scott, RKC against a three-stage second-order ERK pair

struct LsrkExperimentConfig {
  GrayScottProblem problem = with_grid(256);
  double t_end = 100.0;
  std::vector<double> reltols = {1e-2, 1e-3, 1e-4, 1e-5};
  double abstol = 1e-13;
  /// The spectral radius estimate is this factor times the Gershgorin bound
  /// of the diffusion operator.
  double rho_factor = 1.5;
  std::string erk_table = "erk2-3stage";
  double ref_tol = 1e-12;
  bool record_timing = true;
  const Logger* logger = nullptr;
};

struct LsrkRow {
  std::string method;  ///< "rkc" or "erk2"
  double reltol = 0.0;
  double abstol = 0.0;
  double error = 0.0;
  double wall_time = 0.0;
  long steps = 0;
  long attempts = 0;
  long rhs_evals = 0;
  int max_stages = 0;
};

struct LsrkExperimentResult {
  std::vector<LsrkRow> rows;
  [[nodiscard]] CsvTable table() const;
};

LsrkExperimentResult run_gray_scott_lsrk(const LsrkExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Lotka-Volterra forward and adjoint convergence

struct LotkaVolterraConfig {
  std::vector<std::string> tables = {"bs3", "rk4", "dopri5"};
  std::vector<double> steps = {0.5, 0.05, 0.005, 0.0005};
  long checkpoint_interval = 2;
  double t_end = 10.0;
  std::string reference_table = "butcher6";
  double reference_h = 1e-4;
  bool record_timing = true;
};

struct LotkaVolterraRow {
  std::string table;
  int order = 0;
  double h = 0.0;
  /// (|x| - |x_ref|) / |x_ref| for y(tf), dg/dy0 and dg/dp.
  double error_y = 0.0;
  double error_dgdy0 = 0.0;
  double error_dgdp = 0.0;
  double g = 0.0;
  double wall_time = 0.0;
  long steps = 0;
  long recomputed_steps = 0;
  long checkpoints = 0;
};

struct LotkaVolterraResult {
  std::vector<LotkaVolterraRow> rows;
  [[nodiscard]] CsvTable table() const;
};

LotkaVolterraResult run_lotka_volterra(const LotkaVolterraConfig& cfg);

// ---------------------------------------------------------------------------
// Demos

struct SprkDemoConfig {
  double h = 0.1;
  long steps = 100000;
  long early_steps = 100;
  std::vector<int> orders = {1, 2, 3, 4};
};

struct SprkDemoRow {
  int order = 0;
  std::string algorithm;
  double h = 0.0;
  long steps = 0;
  double max_dev_early = 0.0;  ///< max |H - H0| over the first early_steps
  double max_dev = 0.0;        ///< over all steps
  double det_error = 0.0;      ///< |det(one-step map) - 1|
  double final_q = 0.0;
  double final_p = 0.0;
};

struct SprkDemoResult {
  std::vector<SprkDemoRow> rows;
  [[nodiscard]] CsvTable table() const;
};

/// Harmonic oscillator H = (p^2 + q^2)/2 from (p, q) = (0, 1).
SprkDemoResult run_sprk_demo(const SprkDemoConfig& cfg);

/// Example damping policy: beta = clamp(1 - theta/2, beta_min, 1), where
/// theta = sqrt(1 - |Q^T f|^2 / |f|^2) is the least-squares gain.
anderson::DampingFn gain_based_damping(double beta_min = 0.5);

/// Example depth policy: flags history columns whose R diagonal is below
/// rel_tol times the largest one and keeps the rest.
anderson::DepthFn diagonal_filter_depth(double rel_tol = 1e-8);

struct AaDemoConfig {
  int n = 100;
  long max_depth = 5;
  std::uint64_t seed = 1;
  long max_iters = 2000;
  double stop_tol = 1e-10;
};

struct AaDemoRow {
  std::string variant;
  long iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

struct AaDemoResult {
  std::vector<AaDemoRow> rows;
  [[nodiscard]] CsvTable table() const;
};

/// G(u) = A u + 0.04 tanh(u) + c, A symmetric with random eigenvalues in
/// [-0.95, 0.95], c random.
AaDemoResult run_aa_demo(const AaDemoConfig& cfg);

}  // namespace chronos::harness

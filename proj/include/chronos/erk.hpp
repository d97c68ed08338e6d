#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "chronos/core.hpp"

namespace chronos::erk {

/// Explicit Runge-Kutta coefficients. An empty b_embed means "no embedding".
struct ButcherTable {
  std::string name;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  Eigen::VectorXd b_embed;
  int order = 0;
  int embed_order = 0;

  [[nodiscard]] int stages() const { return static_cast<int>(b.size()); }
  [[nodiscard]] bool has_embedding() const { return b_embed.size() > 0; }

  /// Shape, strict lower triangularity and the row-sum convention.
  void validate() const;
};

/// Built-in tables: "euler", "heun", "erk2-3stage", "bs3", "rk4", "dopri5",
/// "butcher6".
ButcherTable builtin_table(const std::string& name);
std::vector<std::string> builtin_table_names();

/// Scratch space for erk_step; sized on first use.
struct ErkWorkspace {
  Eigen::MatrixXd k;       ///< stage derivatives, one column per stage
  Eigen::MatrixXd stages;  ///< stage values z_i, kept only when keep_stages is set
  StateVector tmp;
  StateVector ki;
  bool keep_stages = false;
  void resize(Index n, int s);
};

/// One step of the method. Stage values and derivatives are left in ws. When
/// est is non-null the table must carry an embedding, and est receives
/// h * sum_i (b_i - bhat_i) f(t + c_i h, z_i). forcing, when non-null, is a
/// constant vector added to every stage derivative.
void erk_step(const ButcherTable& table, const RhsFn& rhs, double t, const StateVector& y,
              double h, ErkWorkspace& ws, StateVector& y_next, StateVector* est = nullptr,
              const StateVector* forcing = nullptr);

struct ErkStepResult {
  StateVector y_next;
  std::vector<StateVector> stages;
  std::optional<StateVector> est;
};

ErkStepResult erk_step(const ButcherTable& table, const OdeSystem& system, double t,
                       const StateVector& y, double h);

/// Fixed-step integration from t0 to tf; the last step is truncated.
StateVector erk_fixed(const ButcherTable& table, const OdeSystem& system, double t0, double tf,
                      double h, const StateVector& y0, long* steps = nullptr);

/// An embedded ERK pair as a SingleStepMethod for evolve_adaptive.
class ErkMethod : public SingleStepMethod {
 public:
  ErkMethod(ButcherTable table, OdeSystem system);

  std::string_view name() const override { return table_.name; }
  int controller_order() const override;
  Index dimension() const override { return system_.dimension; }
  void attempt(double t, const StateVector& y, double h, StateVector& y_next,
               StateVector& error) override;
  long rhs_evaluations() const override { return evals_; }

  void set_forcing(const StateVector* forcing) { forcing_ = forcing; }

 private:
  ButcherTable table_;
  OdeSystem system_;
  ErkWorkspace ws_;
  const StateVector* forcing_ = nullptr;
  long evals_ = 0;
};

AdaptiveResult erk_evolve(const ButcherTable& table, const OdeSystem& system,
                          const StepController& controller, const ToleranceSpec& tol, double t0,
                          double tf, const StateVector& y0, const EvolveOptions& options = {});

/// ERK evolution behind the Stepper contract. In fixed mode every evolve call
/// takes `substeps` equal steps; in adaptive mode it runs the accept/reject
/// loop at the current tolerance. Supports a constant forcing term.
class ErkStepper : public AdaptiveStepper {
 public:
  static ErkStepper fixed(ButcherTable table, OdeSystem system, int substeps = 1);
  static ErkStepper adaptive(ButcherTable table, OdeSystem system, ToleranceSpec tol,
                             StepController controller = {});

  void reset(double t, const StateVector& y) override;
  bool supports_forcing() const override { return true; }
  void set_forcing(const StateVector& forcing) override;
  void clear_forcing() override;

  void set_tolerance(const ToleranceSpec& tol) override;
  const ToleranceSpec& tolerance() const override { return tol_; }
  void set_initial_step(double h) override { h_init_ = h; }
  const Report& report() const override { return report_; }
  void clear_report() override;

  void set_logger(const Logger* logger) { logger_ = logger; }
  [[nodiscard]] long rhs_evaluations() const { return evals_; }
  [[nodiscard]] const ButcherTable& table() const { return table_; }

 protected:
  void do_evolve(double t_start, double t_end, StateVector& y) override;

 private:
  ErkStepper(ButcherTable table, OdeSystem system);

  ButcherTable table_;
  OdeSystem system_;
  bool adaptive_ = false;
  int substeps_ = 1;
  ToleranceSpec tol_;
  StepController controller_;
  double h_init_ = 0.0;
  double h_prev_ = 0.0;
  StateVector forcing_;
  bool has_forcing_ = false;
  const Logger* logger_ = nullptr;
  ErkWorkspace ws_;
  long evals_ = 0;
  Report report_;
};

}  // namespace chronos::erk

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "chronos/anderson.hpp"
#include "chronos/erk.hpp"
#include "chronos/harness/experiments.hpp"
#include "chronos/lsrk.hpp"
#include "chronos/splitting.hpp"

namespace py = pybind11;
using namespace chronos;

namespace {

// Wraps f(t, y) -> array-like as an OdeSystem.
OdeSystem python_system(py::function f, Index n) {
  OdeSystem s;
  s.dimension = n;
  s.rhs = [f = std::move(f), n](double t, const StateVector& y, StateVector& ydot) {
    py::gil_scoped_acquire gil;
    StateVector out = f(t, y).cast<StateVector>();
    if (out.size() != n) {
      raise(errc::kDimensionMismatch, "rhs returned the wrong length", "rhs", "python");
    }
    ydot = out;
  };
  return s;
}

std::string csv_text(const harness::CsvTable& t) {
  std::ostringstream out;
  t.write(out);
  return out.str();
}

ToleranceSpec tolerance(double reltol, double abstol) {
  ToleranceSpec tol;
  tol.reltol = reltol;
  tol.abstol = abstol;
  return tol;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bindings for the chronos time-integration library";

  // args are (message, code)
  static py::handle error_type = py::exception<Error>(m, "ChronosError").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = error_type(to_string(e.err()), e.code());
      PyErr_SetObject(error_type.ptr(), inst.ptr());
    }
  });

  m.def("table_names", &erk::builtin_table_names);
  m.def("splitting_names", &splitting::splitting_names);
  m.def("table_order", [](const std::string& name) { return erk::builtin_table(name).order; });
  m.def("splitting_order", [](const std::string& name, int partitions) {
    return splitting::splitting_by_name(name, partitions).order;
  }, py::arg("name"), py::arg("partitions") = 2);

  m.def("erk_fixed",
        [](const std::string& table, py::function f, double t0, double tf, double h,
           const StateVector& y0) {
          return erk::erk_fixed(erk::builtin_table(table), python_system(std::move(f), y0.size()),
                                t0, tf, h, y0);
        },
        py::arg("table"), py::arg("f"), py::arg("t0"), py::arg("tf"), py::arg("h"), py::arg("y0"));

  m.def("erk_evolve",
        [](const std::string& table, py::function f, double t0, double tf, const StateVector& y0,
           double reltol, double abstol) {
          const auto r = erk::erk_evolve(erk::builtin_table(table),
                                         python_system(std::move(f), y0.size()),
                                         StepController::i_controller(), tolerance(reltol, abstol),
                                         t0, tf, y0);
          py::dict d;
          d["y"] = r.y;
          d["t"] = r.t;
          d["steps"] = r.stats.steps;
          d["attempts"] = r.stats.attempts;
          d["rhs_evals"] = r.stats.rhs_evals;
          return d;
        },
        py::arg("table"), py::arg("f"), py::arg("t0"), py::arg("tf"), py::arg("y0"),
        py::arg("reltol") = 1e-6, py::arg("abstol") = 1e-9);

  m.def("select_stage_count",
        [](const std::string& method, double h, double rho, double safety) {
          lsrk::StsConfig cfg;
          if (method == "rkc") {
            cfg.method = lsrk::StsMethod::kRKC;
          } else if (method == "rkl") {
            cfg.method = lsrk::StsMethod::kRKL;
          } else {
            raise(errc::kUnknownName, "unknown method '" + method + "'", "select_stage_count",
                  "python");
          }
          cfg.stage_safety = safety;
          return lsrk::select_stage_count(cfg, h, rho).stages;
        },
        py::arg("method"), py::arg("h"), py::arg("rho"), py::arg("safety") = 0.0);

  m.def("fixed_point_solve",
        [](py::function G, const StateVector& u0, long depth, double damping, double stop_tol,
           long max_iters) {
          anderson::FixedPointProblem p;
          p.dimension = u0.size();
          p.G = [G = std::move(G)](const StateVector& u, StateVector& g) {
            py::gil_scoped_acquire gil;
            g = G(u).cast<StateVector>();
          };
          anderson::AndersonConfig cfg;
          cfg.max_depth = depth;
          cfg.damping = damping;
          cfg.stop_tol = stop_tol;
          cfg.max_iters = max_iters;
          const auto r = anderson::fixed_point_solve(p, u0, cfg);
          py::dict d;
          d["u"] = r.u;
          d["iterations"] = r.iterations;
          d["residuals"] = r.residual_history;
          return d;
        },
        py::arg("G"), py::arg("u0"), py::arg("depth") = 0, py::arg("damping") = 1.0,
        py::arg("stop_tol") = 1e-10, py::arg("max_iters") = 100);

  // Experiments return their CSV text; the Python layer parses it.
  m.def("gray_scott_splitting",
        [](int grid, double t_end, std::vector<double> steps, std::vector<std::string> methods,
           double ref_tol, bool timing) {
          harness::SplittingExperimentConfig cfg;
          cfg.problem.N = grid;
          cfg.t_end = t_end;
          if (!steps.empty()) cfg.steps = std::move(steps);
          if (!methods.empty()) cfg.methods = std::move(methods);
          cfg.ref_tol = ref_tol;
          cfg.record_timing = timing;
          py::gil_scoped_release release;
          return csv_text(harness::run_gray_scott_splitting(cfg).table());
        },
        py::arg("grid") = 64, py::arg("t_end") = 10.0, py::arg("steps") = std::vector<double>{},
        py::arg("methods") = std::vector<std::string>{}, py::arg("ref_tol") = 1e-14,
        py::arg("timing") = true);

  m.def("gray_scott_lsrk",
        [](int grid, double t_end, std::vector<double> reltols, double abstol, bool timing) {
          harness::LsrkExperimentConfig cfg;
          cfg.problem.N = grid;
          cfg.t_end = t_end;
          if (!reltols.empty()) cfg.reltols = std::move(reltols);
          cfg.abstol = abstol;
          cfg.record_timing = timing;
          py::gil_scoped_release release;
          return csv_text(harness::run_gray_scott_lsrk(cfg).table());
        },
        py::arg("grid") = 256, py::arg("t_end") = 100.0,
        py::arg("reltols") = std::vector<double>{}, py::arg("abstol") = 1e-13,
        py::arg("timing") = true);

  m.def("lotka_volterra",
        [](std::vector<std::string> tables, std::vector<double> steps, bool timing) {
          harness::LotkaVolterraConfig cfg;
          if (!tables.empty()) cfg.tables = std::move(tables);
          if (!steps.empty()) cfg.steps = std::move(steps);
          cfg.record_timing = timing;
          py::gil_scoped_release release;
          return csv_text(harness::run_lotka_volterra(cfg).table());
        },
        py::arg("tables") = std::vector<std::string>{}, py::arg("steps") = std::vector<double>{},
        py::arg("timing") = true);

  m.def("sprk_demo",
        [](double h, long steps) {
          harness::SprkDemoConfig cfg;
          cfg.h = h;
          cfg.steps = steps;
          py::gil_scoped_release release;
          return csv_text(harness::run_sprk_demo(cfg).table());
        },
        py::arg("h") = 0.1, py::arg("steps") = 100000);

  m.def("aa_demo",
        [](int n, long depth, std::uint64_t seed) {
          harness::AaDemoConfig cfg;
          cfg.n = n;
          cfg.max_depth = depth;
          cfg.seed = seed;
          py::gil_scoped_release release;
          return csv_text(harness::run_aa_demo(cfg).table());
        },
        py::arg("n") = 100, py::arg("depth") = 5, py::arg("seed") = 1);
}

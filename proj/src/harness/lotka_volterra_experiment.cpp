#include <chrono>

#include "chronos/erk.hpp"
#include "chronos/harness/experiments.hpp"
#include "chronos/harness/lotka_volterra.hpp"

namespace chronos::harness {

namespace {
constexpr const char* kModule = "harness";
}

LotkaVolterraResult run_lotka_volterra(const LotkaVolterraConfig& cfg) {
  CHRONOS_REQUIRE(cfg.t_end > 0.0, errc::kIllegalInput, "t_end must be positive");
  CHRONOS_REQUIRE(cfg.checkpoint_interval >= 1, errc::kIllegalInput,
                  "checkpoint interval must be at least 1");
  LotkaVolterraProblem lv;
  lv.tf = cfg.t_end;
  const auto sys = lv.system();
  const auto cost = lv.cost();
  const auto ref = adjoint::adjoint_solve(erk::builtin_table(cfg.reference_table), sys, lv.p,
                                          cost, lv.t0, lv.tf, cfg.reference_h, lv.y0,
                                          cfg.checkpoint_interval);
  LotkaVolterraResult res;
  for (const auto& name : cfg.tables) {
    const auto table = erk::builtin_table(name);
    for (double h : cfg.steps) {
      CHRONOS_REQUIRE(h > 0.0, errc::kIllegalInput, "step sizes must be positive");
      const auto start = std::chrono::steady_clock::now();
      const auto r = adjoint::adjoint_solve(table, sys, lv.p, cost, lv.t0, lv.tf, h, lv.y0,
                                            cfg.checkpoint_interval);
      LotkaVolterraRow row;
      if (cfg.record_timing) {
        row.wall_time =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      }
      row.table = name;
      row.order = table.order;
      row.h = h;
      row.error_y = norm_difference_error(r.y_final, ref.y_final);
      row.error_dgdy0 = norm_difference_error(r.dg_dy0, ref.dg_dy0);
      row.error_dgdp = norm_difference_error(r.dg_dp, ref.dg_dp);
      row.g = r.g;
      row.steps = r.steps;
      row.recomputed_steps = r.recomputed_steps;
      row.checkpoints = static_cast<long>(r.checkpoints);
      res.rows.push_back(row);
    }
  }
  return res;
}

CsvTable LotkaVolterraResult::table() const {
  CsvTable t({"table", "order", "h", "error_y", "error_dgdy0", "error_dgdp", "g", "wall_time_s",
              "steps", "recomputed_steps", "checkpoints"});
  for (const auto& r : rows) {
    t.add_row({r.table, csv_int(r.order), csv_real(r.h), csv_real(r.error_y),
               csv_real(r.error_dgdy0), csv_real(r.error_dgdp), csv_real(r.g),
               csv_real(r.wall_time), csv_int(r.steps), csv_int(r.recomputed_steps),
               csv_int(r.checkpoints)});
  }
  return t;
}

}  // namespace chronos::harness

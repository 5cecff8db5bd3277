#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mixflow/cost.hpp"
#include "mixflow/net.hpp"
#include "mixflow/plan.hpp"
#include "mixflow/rational.hpp"

namespace mixflow {

// Tiles of one pipelined layer together with the exact balanced-pipeline
// value they were rounded from. The ideal chain keeps every layer time
// identical; rounding to powers of two introduces measurable imbalance.
struct PropagatedTiles {
  LayerTiles tiles;
  Rational ideal_t_i;
  Rational ideal_t_o;
};

// Chains tiles through the first `boundary` conv layers from a seed
// (t_i, t_o) on the first layer: the next layer inherits t_o as its t_i and
// scales t_o to equalize layer times. Throws kInfeasible when the exact value
// drops below 1 before rounding.
std::vector<PropagatedTiles> propagate_group1_tilings(const NetworkDesc& net, int boundary,
                                                      std::int64_t seed_t_i, std::int64_t seed_t_o);

// Power-of-two square tiles the main layer can run: 1..min over its layers of
// min(N, M).
std::vector<std::int64_t> main_tile_candidates(const NetworkDesc& net, int boundary);

// The candidate whose group-2 time sits closest to t_g1; ties resolve toward
// the smaller tile (fewer multipliers).
std::int64_t select_main_tiling(const NetworkDesc& net, int boundary, const Rational& t_g1);

struct DseBudgets {
  std::int64_t sram_bits = std::int64_t(1) << 62;
  double multipliers = 1e18;
  double clock_hz = 200e6;
  bool params_on_chip = false;
  MultiplierModel multiplier_model;
};

struct SweepRow {
  int boundary = 0;
  std::int64_t sram_bits = 0;
  std::int64_t dram_bytes = 0;
  Rational t_g1;
  Rational t_g2;
  double frame_rate = 0.0;
  bool feasible = false;
  std::string binding_constraint;  // why this boundary failed, empty when feasible
};

struct DseResult {
  std::vector<SweepRow> rows;              // one per boundary, 0..conv_count
  std::vector<TilingPlan> row_plans;       // best-effort plan behind each row
  std::optional<TilingPlan> best_plan;     // absent when nothing is feasible
  std::optional<CostReport> best_report;
};

// The boundary search: for every boundary, chain group-1 tiles from
// descending seeds, pick the balancing main tile, drop candidates that
// exceed the SRAM or multiplier budget, and keep the feasible plan with the
// highest frame rate. The winner across boundaries maximizes frame rate,
// with ties broken by smaller SRAM and then smaller boundary.
DseResult run_dse(const NetworkDesc& net, const DseBudgets& budgets);

// CSV with header boundary,sram_bits,dram_bytes,t_g1,t_g2,frame_rate,feasible.
std::string sweep_csv(const std::vector<SweepRow>& rows);

std::string plan_summary(const NetworkDesc& net, const TilingPlan& plan, const CostReport& report);

}  // namespace mixflow

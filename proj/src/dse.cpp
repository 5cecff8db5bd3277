#include "mixflow/dse.hpp"

#include <algorithm>
#include <sstream>

namespace mixflow {

std::vector<PropagatedTiles> propagate_group1_tilings(const NetworkDesc& net, int boundary,
                                                      std::int64_t seed_t_i, std::int64_t seed_t_o) {
  const auto convs = net.conv_positions();
  if (boundary < 1 || boundary > static_cast<int>(convs.size()))
    throw Error(ErrorCode::kInvalidInput, "boundary out of range for tile propagation");

  std::vector<PropagatedTiles> out;
  const LayerDesc& first = net.layers[convs[0]];
  if (seed_t_i < 1 || seed_t_i > first.n || seed_t_o < 1 || seed_t_o > first.m)
    throw Error(ErrorCode::kInvalidInput, "seed tiles outside the first layer's channel bounds");

  PropagatedTiles head;
  head.tiles = {first.id, seed_t_i, seed_t_o};
  head.ideal_t_i = Rational(seed_t_i);
  head.ideal_t_o = Rational(seed_t_o);
  out.push_back(head);

  for (int ci = 1; ci < boundary; ++ci) {
    const LayerDesc& prev = net.layers[convs[ci - 1]];
    const LayerDesc& cur = net.layers[convs[ci]];
    const PropagatedTiles& last = out.back();

    // Equal layer times require t_o(l+1) = elems(l+1) * M(l+1) * t_i(l) /
    // (elems(l) * N(l)) once t_i(l+1) = t_o(l).
    const auto scale = [&](const Rational& t_i_prev) {
      return Rational(cur.out_elems()) * Rational(cur.m) * t_i_prev /
             (Rational(prev.out_elems()) * Rational(prev.n));
    };

    PropagatedTiles next;
    next.ideal_t_i = last.ideal_t_o;
    next.ideal_t_o = scale(last.ideal_t_i);

    const Rational target = scale(Rational(last.tiles.t_i));
    if (target < Rational(1))
      throw Error(ErrorCode::kInfeasible, "seed (" + std::to_string(seed_t_i) + "," +
                                              std::to_string(seed_t_o) + ") drives layer " +
                                              std::to_string(cur.id) + " below one output tile");

    next.tiles.layer_id = cur.id;
    next.tiles.t_i = last.tiles.t_o;
    next.tiles.t_o = std::min<std::int64_t>(round_to_power_of_two(target), cur.m);
    out.push_back(next);
  }
  return out;
}

std::vector<std::int64_t> main_tile_candidates(const NetworkDesc& net, int boundary) {
  const auto convs = net.conv_positions();
  std::int64_t bound = std::int64_t(1) << 62;
  for (std::size_t ci = boundary; ci < convs.size(); ++ci) {
    const LayerDesc& layer = net.layers[convs[ci]];
    bound = std::min(bound, std::min(layer.n, layer.m));
  }
  std::vector<std::int64_t> cands;
  for (std::int64_t t = 1; t <= bound; t *= 2) cands.push_back(t);
  return cands;
}

namespace {

Rational group2_work(const NetworkDesc& net, int boundary) {
  const auto convs = net.conv_positions();
  Rational work(0);
  for (std::size_t ci = boundary; ci < convs.size(); ++ci) {
    const LayerDesc& layer = net.layers[convs[ci]];
    work += Rational(layer.out_elems()) * Rational(layer.n) * Rational(layer.m);
  }
  return work;
}

}  // namespace

std::int64_t select_main_tiling(const NetworkDesc& net, int boundary, const Rational& t_g1) {
  const auto cands = main_tile_candidates(net, boundary);
  if (cands.empty()) throw Error(ErrorCode::kInfeasible, "no main tile fits the remaining layers");
  const Rational work = group2_work(net, boundary);

  std::int64_t best = cands.front();
  Rational best_gap = (t_g1 - work / Rational(cands.front() * cands.front())).abs();
  for (std::size_t i = 1; i < cands.size(); ++i) {
    const Rational gap = (t_g1 - work / Rational(cands[i] * cands[i])).abs();
    if (gap < best_gap) {  // ties keep the earlier (smaller) tile
      best_gap = gap;
      best = cands[i];
    }
  }
  return best;
}

namespace {

struct BoundaryBest {
  bool any_candidate = false;
  bool feasible = false;
  TilingPlan plan;
  CostReport report;
  std::string binding;
};

// All power-of-two seed pairs for the first layer, largest parallelism first.
// This generalizes the halve-and-retry reduction: walking candidates in
// descending order and keeping the best feasible one visits every state the
// reduction loop could reach.
std::vector<std::pair<std::int64_t, std::int64_t>> seed_pairs(const LayerDesc& first) {
  std::vector<std::pair<std::int64_t, std::int64_t>> seeds;
  for (std::int64_t ti = largest_power_of_two_at_most(first.n); ti >= 1; ti /= 2)
    for (std::int64_t to = largest_power_of_two_at_most(first.m); to >= 1; to /= 2)
      seeds.emplace_back(ti, to);
  std::stable_sort(seeds.begin(), seeds.end(), [](const auto& a, const auto& b) {
    if (a.first * a.second != b.first * b.second) return a.first * a.second > b.first * b.second;
    return a.first > b.first;
  });
  return seeds;
}

bool better_row(const CostReport& a, const CostReport& b) {
  if (a.frame_rate != b.frame_rate) return a.frame_rate > b.frame_rate;
  return a.sram_bits < b.sram_bits;
}

BoundaryBest evaluate_boundary(const NetworkDesc& net, int boundary, const DseBudgets& budgets) {
  const auto convs = net.conv_positions();
  const bool has_group1 = boundary > 0;
  const bool has_group2 = boundary < static_cast<int>(convs.size());

  BoundaryBest best;
  bool saw_sram_violation = false;
  bool saw_mult_violation = false;
  bool saw_seed_failure = false;

  const auto consider = [&](TilingPlan plan) {
    const CostReport report = cost_report(net, plan, budgets.clock_hz, budgets.multiplier_model);
    const bool sram_ok = report.sram_bits <= budgets.sram_bits;
    const bool mult_ok = report.multipliers <= budgets.multipliers;
    saw_sram_violation |= !sram_ok;
    saw_mult_violation |= !mult_ok;
    const bool feasible = sram_ok && mult_ok;

    if (!best.any_candidate || (feasible && !best.feasible) ||
        (feasible == best.feasible && better_row(report, best.report))) {
      best.any_candidate = true;
      best.feasible = feasible;
      best.plan = std::move(plan);
      best.report = report;
    }
  };

  const auto seeds = has_group1
                         ? seed_pairs(net.layers[convs[0]])
                         : std::vector<std::pair<std::int64_t, std::int64_t>>{{1, 1}};
  for (const auto& [ti, to] : seeds) {
    TilingPlan plan;
    plan.boundary = boundary;
    plan.params_on_chip = budgets.params_on_chip;
    if (has_group1) {
      try {
        for (const auto& pt : propagate_group1_tilings(net, boundary, ti, to))
          plan.group1.push_back(pt.tiles);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kInfeasible) {
          saw_seed_failure = true;
          continue;
        }
        throw;
      }
    }
    if (has_group2) {
      const GroupTimes partial = group_times(net, plan);
      plan.main_tile = select_main_tiling(net, boundary, partial.t_g1);
    }
    consider(std::move(plan));
    if (!has_group1) break;  // seeds are irrelevant without pipelined layers
  }

  if (!best.feasible) {
    if (saw_sram_violation) best.binding = "sram";
    if (saw_mult_violation) best.binding = best.binding.empty() ? "multipliers" : best.binding + "+multipliers";
    if (best.binding.empty() && saw_seed_failure) best.binding = "tile chaining";
    if (best.binding.empty()) best.binding = "no candidate";
  }
  return best;
}

}  // namespace

DseResult run_dse(const NetworkDesc& net, const DseBudgets& budgets) {
  const int n_conv = static_cast<int>(net.conv_positions().size());
  DseResult result;

  int best_boundary = -1;
  for (int i = 0; i <= n_conv; ++i) {
    BoundaryBest bb = evaluate_boundary(net, i, budgets);
    SweepRow row;
    row.boundary = i;
    row.feasible = bb.feasible;
    row.binding_constraint = bb.binding;
    if (bb.any_candidate) {
      row.sram_bits = bb.report.sram_bits;
      row.dram_bytes = bb.report.dram_bytes;
      row.t_g1 = bb.report.t_g1;
      row.t_g2 = bb.report.t_g2;
      row.frame_rate = bb.report.frame_rate;
    }
    result.rows.push_back(row);
    result.row_plans.push_back(bb.plan);

    if (bb.any_candidate && bb.feasible) {
      const bool wins = !result.best_report || better_row(bb.report, *result.best_report);
      if (wins) {
        result.best_plan = bb.plan;
        result.best_report = bb.report;
        best_boundary = i;
      }
    }
  }
  (void)best_boundary;
  return result;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream csv;
  csv << "boundary,sram_bits,dram_bytes,t_g1,t_g2,frame_rate,feasible\n";
  for (const auto& r : rows) {
    char frame[32];
    std::snprintf(frame, sizeof(frame), "%.6g", r.frame_rate);
    csv << r.boundary << ',' << r.sram_bits << ',' << r.dram_bytes << ',' << r.t_g1.str() << ','
        << r.t_g2.str() << ',' << frame << ',' << (r.feasible ? 1 : 0) << '\n';
  }
  return csv.str();
}

std::string plan_summary(const NetworkDesc& net, const TilingPlan& plan, const CostReport& report) {
  std::ostringstream out;
  out << "network: " << net.name << "\n";
  out << "boundary: " << plan.boundary << " (conv index), params "
      << (plan.params_on_chip ? "on-chip" : "off-chip") << "\n";
  for (const auto& t : plan.group1) {
    out << "  layer " << t.layer_id << ": t_i=" << t.t_i << " t_o=" << t.t_o << " pf=" << t.pf() << "\n";
  }
  if (plan.main_tile) out << "  main tile: " << *plan.main_tile << " (pf=" << (*plan.main_tile * *plan.main_tile) << ")\n";
  out << "sram_bits: " << report.sram_bits << "\n";
  out << "dram_bytes: " << report.dram_bytes << "\n";
  out << "t_g1: " << report.t_g1.str() << " cycles, t_g2: " << report.t_g2.str() << " cycles\n";
  char frame[32];
  std::snprintf(frame, sizeof(frame), "%.6g", report.frame_rate);
  out << "frame_rate: " << frame << " fps\n";
  out << "multipliers: " << report.multipliers << "\n";
  return out.str();
}

}  // namespace mixflow

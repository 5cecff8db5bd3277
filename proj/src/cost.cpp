#include "mixflow/cost.hpp"

#include <algorithm>

namespace mixflow {

BufferSizes buffer_sizes(const NetworkDesc& net, const LayerDesc& layer, std::int64_t t_o,
                         BufferGroup group) {
  BufferSizes b;
  if (!layer.is_conv()) return b;
  if (t_o < 1) throw Error(ErrorCode::kInvalidInput, "t_o must be >= 1");

  const auto& p = net.precision;
  if (group == BufferGroup::kPipelined) {
    b.row_buff = std::int64_t(layer.k + 1) * layer.n * layer.w_in * p.q_a;
    b.line_out_buff = t_o * layer.w_out() * p.q_s;
  } else {
    b.in_frame_buff = std::int64_t(layer.h_in) * layer.w_in * layer.n * p.q_a;
    b.frame_out_buff = t_o * layer.out_elems() * p.q_s;
  }
  b.param_store = layer_weight_bits(net, layer);
  return b;
}

namespace {

std::int64_t shortcut_source_bits(const NetworkDesc& net, const LayerDesc& consumer) {
  if (!consumer.shortcut_from) return 0;
  const LayerDesc& src = net.layer_by_id(*consumer.shortcut_from);
  return output_fmap_elems(src) * net.precision.q_a;
}

}  // namespace

std::int64_t sram_size(const NetworkDesc& net, const TilingPlan& plan) {
  const std::size_t cut = group1_end(net, plan.boundary);

  std::int64_t total = 0;
  for (std::size_t i = 0; i < cut; ++i) {
    const LayerDesc& layer = net.layers[i];
    if (!layer.is_conv()) continue;
    const LayerTiles* t = plan.tiles_for(layer.id);
    if (t == nullptr)
      throw Error(ErrorCode::kInvalidInput, "missing tiles for layer " + std::to_string(layer.id));
    const BufferSizes b = buffer_sizes(net, layer, t->t_o, BufferGroup::kPipelined);
    total += b.row_buff + b.line_out_buff;
    if (plan.params_on_chip) total += b.param_store;
  }

  std::int64_t max_in_frame = 0;
  std::int64_t max_frame_out = 0;
  std::int64_t max_shortcut = 0;
  const std::int64_t main_t_o = plan.main_tile.value_or(1);
  for (std::size_t i = cut; i < net.layers.size(); ++i) {
    const LayerDesc& layer = net.layers[i];
    max_shortcut = std::max(max_shortcut, shortcut_source_bits(net, layer));
    if (!layer.is_conv()) continue;
    const BufferSizes b = buffer_sizes(net, layer, main_t_o, BufferGroup::kMain);
    max_in_frame = std::max(max_in_frame, b.in_frame_buff);
    max_frame_out = std::max(max_frame_out, b.frame_out_buff);
  }

  // Double-buffered input plus one more frame to overlap with group 1.
  return total + 3 * max_in_frame + max_shortcut + max_frame_out;
}

std::int64_t dram_access(const NetworkDesc& net, int boundary, bool params_on_chip) {
  const std::size_t cut = group1_end(net, boundary);
  std::int64_t bytes = 0;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerDesc& layer = net.layers[i];
    if (!layer.is_conv()) continue;
    const std::int64_t per_read = layer_weight_bytes(net, layer);
    if (i < cut) {
      if (!params_on_chip) bytes += std::int64_t(layer.h_out()) * per_read;
    } else {
      bytes += per_read;
    }
  }
  return bytes;
}

Rational layer_time(const LayerDesc& layer, const Rational& pf) {
  if (!layer.is_conv()) return Rational(0);
  if (pf <= Rational(0)) throw Error(ErrorCode::kInvalidInput, "parallelism factor must be positive");
  return Rational(layer.out_elems()) * Rational(layer.n) * Rational(layer.m) / pf;
}

GroupTimes group_times(const NetworkDesc& net, const TilingPlan& plan) {
  const std::size_t cut = group1_end(net, plan.boundary);
  GroupTimes g;

  // Index of the last conv layer in group 1; layers before it contribute fill
  // delay, the boundary layer contributes its full time.
  std::size_t last_conv = cut;
  for (std::size_t i = 0; i < cut; ++i) {
    if (net.layers[i].is_conv()) last_conv = i;
  }

  Rational row_period(0);  // output-row period of the layer just walked
  for (std::size_t i = 0; i < cut; ++i) {
    const LayerDesc& layer = net.layers[i];
    if (layer.is_conv()) {
      const LayerTiles* t = plan.tiles_for(layer.id);
      if (t == nullptr)
        throw Error(ErrorCode::kInvalidInput, "missing tiles for layer " + std::to_string(layer.id));
      const Rational tl = layer_time(layer, Rational(t->pf()));
      if (i == last_conv) {
        g.t_g1 += tl;
      } else {
        row_period = tl / Rational(layer.h_out());
        g.t_g1 += Rational(layer.delay_rows) * row_period;
      }
    } else {
      // A downsampling stage emits one row per `stride` input rows.
      row_period = row_period * Rational(layer.stride);
      if (i < last_conv) g.t_g1 += Rational(layer.delay_rows) * row_period;
    }
  }

  if (plan.boundary < static_cast<int>(net.conv_positions().size())) {
    const std::int64_t t = plan.main_tile.value_or(1);
    for (std::size_t i = cut; i < net.layers.size(); ++i) {
      const LayerDesc& layer = net.layers[i];
      if (!layer.is_conv()) continue;
      g.t_g2 += layer_time(layer, Rational(t * t));
    }
  }
  return g;
}

double multiplier_count(const NetworkDesc& net, const TilingPlan& plan, const MultiplierModel& model) {
  const std::size_t cut = group1_end(net, plan.boundary);
  double total = 0.0;

  for (std::size_t i = 0; i < cut; ++i) {
    const LayerDesc& layer = net.layers[i];
    if (!layer.is_conv()) continue;
    const LayerTiles* t = plan.tiles_for(layer.id);
    if (t == nullptr)
      throw Error(ErrorCode::kInvalidInput, "missing tiles for layer " + std::to_string(layer.id));
    const int bits = layer.quantize ? net.precision.q_w : net.precision.q_full;
    total += double(layer.k) * layer.k * double(t->pf()) * model.weight_for_bits(bits);
    total += double(layer.sparse_multipliers);
  }

  if (plan.boundary < static_cast<int>(net.conv_positions().size())) {
    const std::int64_t t = plan.main_tile.value_or(1);
    double worst_dense = 0.0;
    double worst_sparse = 0.0;
    for (std::size_t i = cut; i < net.layers.size(); ++i) {
      const LayerDesc& layer = net.layers[i];
      if (!layer.is_conv()) continue;
      const int bits = layer.quantize ? net.precision.q_w : net.precision.q_full;
      worst_dense = std::max(worst_dense, double(layer.k) * layer.k * model.weight_for_bits(bits));
      worst_sparse = std::max(worst_sparse, double(layer.sparse_multipliers));
    }
    total += worst_dense * double(t) * double(t) + worst_sparse;
  }
  return total;
}

CostReport cost_report(const NetworkDesc& net, const TilingPlan& plan, double clock_hz,
                       const MultiplierModel& model) {
  CostReport r;
  r.boundary = plan.boundary;
  r.sram_bits = sram_size(net, plan);
  r.dram_bytes = dram_access(net, plan.boundary, plan.params_on_chip);
  const GroupTimes g = group_times(net, plan);
  r.t_g1 = g.t_g1;
  r.t_g2 = g.t_g2;
  const Rational worst = std::max(g.t_g1, g.t_g2);
  r.frame_rate = worst.is_zero() ? 0.0 : clock_hz / worst.to_double();
  r.multipliers = multiplier_count(net, plan, model);
  return r;
}

}  // namespace mixflow

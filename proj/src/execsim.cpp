#include "mixflow/execsim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mixflow/cost.hpp"

namespace mixflow {

std::int32_t FixedPointFormat::map(float value) const {
  const double scaled = std::round(double(value) * double(std::int64_t(1) << frac_bits));
  if (scaled > 32767.0 || scaled < -32768.0)
    throw Error(ErrorCode::kNumeric, "scale does not fit 16-bit fixed point; lower frac_bits");
  return std::int32_t(scaled);
}

FixedWeights fixed_point_weights(const MixedLayerWeights& mixed, const FixedPointFormat& fmt) {
  FixedWeights fw;
  fw.k = mixed.k;
  fw.n = mixed.n;
  fw.m = mixed.m;
  const std::int64_t per_filter = std::int64_t(mixed.k) * mixed.k * mixed.n;
  fw.values.assign(std::size_t(per_filter * mixed.m), 0);

  const std::int32_t s_r_fixed = fmt.map(mixed.s_r);
  for (std::int64_t fi = 0; fi < mixed.m; ++fi) {
    const MixedFilter& f = mixed.filters[std::size_t(fi)];
    const std::int32_t alpha_fixed = fmt.map(f.alpha);
    for (std::int64_t pos = 0; pos < per_filter; ++pos) {
      const std::int32_t sign = f.sign_neg_at(pos) ? -1 : 1;
      fw.values[std::size_t(fi * per_filter + pos)] = sign * alpha_fixed;
    }
    for (const auto& e : f.residuals) {
      fw.values[std::size_t(fi * per_filter + e.position)] += s_r_fixed * std::int32_t(e.value);
    }
  }
  return fw;
}

namespace {

void check_acc_range(std::int64_t acc, int q_s) {
  const std::int64_t bound = (q_s >= 63) ? std::int64_t(1) << 62 : (std::int64_t(1) << (q_s - 1));
  if (acc >= bound || acc < -bound)
    throw Error(ErrorCode::kNumeric, "accumulator exceeds the declared q_s width");
}

}  // namespace

AccTensor direct_conv(const QuantTensor& input, const FixedWeights& weights, int stride, int q_s) {
  if (input.c != weights.n)
    throw Error(ErrorCode::kInvalidInput, "input channels do not match the weight tensor");
  if (weights.k % 2 == 0 && weights.k != 1)
    throw Error(ErrorCode::kInvalidInput, "same-padding convolution needs an odd kernel");

  AccTensor out;
  out.h = input.h / stride;
  out.w = input.w / stride;
  out.c = weights.m;
  out.values.assign(std::size_t(std::int64_t(out.h) * out.w * out.c), 0);

  const int pad = (weights.k - 1) / 2;
  const std::int64_t k2 = std::int64_t(weights.k) * weights.k;
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      for (std::int64_t m = 0; m < weights.m; ++m) {
        std::int64_t acc = 0;
        for (std::int64_t ch = 0; ch < weights.n; ++ch) {
          for (int kh = 0; kh < weights.k; ++kh) {
            const int sy = y * stride + kh - pad;
            if (sy < 0 || sy >= input.h) continue;
            for (int kw = 0; kw < weights.k; ++kw) {
              const int sx = x * stride + kw - pad;
              if (sx < 0 || sx >= input.w) continue;
              const std::int64_t pos = ch * k2 + kh * weights.k + kw;
              acc += std::int64_t(input.at(sy, sx, ch)) * weights.at(m, pos);
            }
          }
        }
        check_acc_range(acc, q_s);
        out.at(y, x, m) = acc;
      }
    }
  }
  return out;
}

AccTensor mixed_conv(const QuantTensor& input, const EncodedLayer& encoded, int stride, int q_s,
                     const FixedPointFormat& fmt) {
  if (input.c != encoded.n)
    throw Error(ErrorCode::kInvalidInput, "input channels do not match the encoded layer");
  if (encoded.k % 2 == 0 && encoded.k != 1)
    throw Error(ErrorCode::kInvalidInput, "same-padding convolution needs an odd kernel");

  const MixedLayerWeights mixed = decode(encoded);
  const std::int32_t s_r_fixed = fmt.map(mixed.s_r);

  AccTensor out;
  out.h = input.h / stride;
  out.w = input.w / stride;
  out.c = encoded.m;
  out.values.assign(std::size_t(std::int64_t(out.h) * out.w * out.c), 0);

  const int pad = (encoded.k - 1) / 2;
  const int k = encoded.k;
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      for (std::int64_t m = 0; m < encoded.m; ++m) {
        const MixedFilter& f = mixed.filters[std::size_t(m)];

        // Dense path: add or subtract the activation per sign bit, then one
        // multiply by the shared scale.
        std::int64_t dense_sum = 0;
        for (std::int64_t ch = 0; ch < encoded.n; ++ch) {
          for (int kh = 0; kh < k; ++kh) {
            const int sy = y * stride + kh - pad;
            if (sy < 0 || sy >= input.h) continue;
            for (int kw = 0; kw < k; ++kw) {
              const int sx = x * stride + kw - pad;
              if (sx < 0 || sx >= input.w) continue;
              const std::int64_t pos = (ch * k + kh) * k + kw;
              const std::int64_t a = input.at(sy, sx, ch);
              dense_sum += f.sign_neg_at(pos) ? -a : a;
            }
          }
        }

        // Sparse path: decode each residual's coordinate back to a window
        // offset and multiply there.
        std::int64_t sparse_sum = 0;
        for (const auto& e : f.residuals) {
          const std::int64_t ch = e.position / (std::int64_t(k) * k);
          const int k_pos = int(e.position % (std::int64_t(k) * k));
          const int kh = k_pos / k;
          const int kw = k_pos % k;
          const int sy = y * stride + kh - pad;
          const int sx = x * stride + kw - pad;
          if (sy < 0 || sy >= input.h || sx < 0 || sx >= input.w) continue;
          sparse_sum += std::int64_t(input.at(sy, sx, ch)) * std::int64_t(e.value);
        }

        const std::int32_t alpha_fixed = fmt.map(f.alpha);
        const std::int64_t acc = dense_sum * alpha_fixed + sparse_sum * s_r_fixed;
        check_acc_range(acc, q_s);
        out.at(y, x, m) = acc;
      }
    }
  }
  return out;
}

namespace {

// One full weight read of a layer, walked tile by tile and element by
// element. Returns the element count (the caller converts to bytes at layer
// granularity).
std::int64_t walk_weight_fetch(const LayerDesc& layer, std::int64_t t_i, std::int64_t t_o) {
  std::int64_t elems = 0;
  for (std::int64_t to_base = 0; to_base < layer.m; to_base += t_o) {
    const std::int64_t to_end = std::min(layer.m, to_base + t_o);
    for (std::int64_t ti_base = 0; ti_base < layer.n; ti_base += t_i) {
      const std::int64_t ti_end = std::min(layer.n, ti_base + t_i);
      for (int kh = 0; kh < layer.k; ++kh)
        for (int kw = 0; kw < layer.k; ++kw)
          for (std::int64_t ci = ti_base; ci < ti_end; ++ci)
            for (std::int64_t co = to_base; co < to_end; ++co) ++elems;
    }
  }
  return elems;
}

}  // namespace

TrafficReport traffic_sim(const NetworkDesc& net, const TilingPlan& plan) {
  validate_plan(net, plan);
  const std::size_t cut = group1_end(net, plan.boundary);
  TrafficReport report;

  Rational cycles_total(0);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerDesc& layer = net.layers[i];
    if (!layer.is_conv()) continue;
    TrafficCounters tc;
    tc.layer_id = layer.id;

    const std::int64_t weight_bytes = layer_weight_bytes(net, layer);
    if (i < cut) {
      tc.scheme = 3;
      const LayerTiles* t = plan.tiles_for(layer.id);
      // Row-based reuse: every output row fetches the full weight set anew,
      // block by block. Intermediate activations ride the line buffers, so
      // no feature-map DRAM events are recorded.
      for (int row = 0; row < layer.h_out(); ++row) {
        const std::int64_t elems = walk_weight_fetch(layer, t->t_i, t->t_o);
        if (elems != layer_params(layer))
          throw Error(ErrorCode::kVerifyFailed, "tile walk lost weight elements");
        if (!plan.params_on_chip) tc.dram_weight_bytes += weight_bytes;
      }
      const Rational tl = layer_time(layer, Rational(t->pf()));
      tc.cycles = tl.ceil_int();
    } else {
      tc.scheme = 2;
      const std::int64_t t = plan.main_tile.value_or(1);
      // Full weight reuse: weights stream in once; the whole input frame is
      // re-read from its SRAM buffer for every output tile group.
      const std::int64_t elems = walk_weight_fetch(layer, t, t);
      if (elems != layer_params(layer))
        throw Error(ErrorCode::kVerifyFailed, "tile walk lost weight elements");
      tc.dram_weight_bytes += weight_bytes;
      const std::int64_t tile_groups = (layer.m + t - 1) / t;
      for (std::int64_t g = 0; g < tile_groups; ++g)
        tc.sram_fmap_read_elems += std::int64_t(layer.h_in) * layer.w_in * layer.n;
      const Rational tl = layer_time(layer, Rational(t * t));
      tc.cycles = tl.ceil_int();
    }
    report.layers.push_back(tc);
    report.total_dram_weight_bytes += tc.dram_weight_bytes;
    report.total_dram_fmap_read_bytes += tc.dram_fmap_read_bytes;
    report.total_dram_fmap_write_bytes += tc.dram_fmap_write_bytes;
  }

  // Live-buffer accounting. Each pipelined layer owns its row and line
  // buffers for the whole frame; the main group allocates three input frames
  // (double buffering plus the group-overlap copy), one shortcut frame and
  // one output frame, each sized by the worst layer that uses it.
  std::int64_t peak = 0;
  for (std::size_t i = 0; i < cut; ++i) {
    const LayerDesc& layer = net.layers[i];
    if (!layer.is_conv()) continue;
    const LayerTiles* t = plan.tiles_for(layer.id);
    std::int64_t rows = 0;
    for (int r = 0; r < layer.k + 1; ++r) rows += std::int64_t(layer.w_in) * layer.n;
    peak += rows * net.precision.q_a;
    peak += t->t_o * layer.w_out() * net.precision.q_s;
    if (plan.params_on_chip) peak += layer_weight_bits(net, layer);
  }
  std::int64_t worst_in_frame = 0;
  std::int64_t worst_out_frame = 0;
  std::int64_t worst_shortcut = 0;
  const std::int64_t main_t = plan.main_tile.value_or(1);
  for (std::size_t i = cut; i < net.layers.size(); ++i) {
    const LayerDesc& layer = net.layers[i];
    if (layer.shortcut_from) {
      const LayerDesc& src = net.layer_by_id(*layer.shortcut_from);
      worst_shortcut = std::max(worst_shortcut, output_fmap_elems(src) * net.precision.q_a);
    }
    if (!layer.is_conv()) continue;
    const std::int64_t in_frame = std::int64_t(layer.h_in) * layer.w_in * layer.n * net.precision.q_a;
    const std::int64_t out_frame = main_t * layer.out_elems() * net.precision.q_s;
    worst_in_frame = std::max(worst_in_frame, in_frame);
    worst_out_frame = std::max(worst_out_frame, out_frame);
  }
  peak += 3 * worst_in_frame + worst_shortcut + worst_out_frame;
  report.sram_peak_bits = peak;

  const GroupTimes g = group_times(net, plan);
  cycles_total = std::max(g.t_g1, g.t_g2);
  report.total_cycles = cycles_total.ceil_int();
  return report;
}

std::string traffic_csv(const TrafficReport& report) {
  std::ostringstream csv;
  csv << "layer,scheme,dram_weight_bytes,dram_fmap_read_bytes,dram_fmap_write_bytes,sram_peak_bits,cycles\n";
  for (const auto& l : report.layers) {
    csv << l.layer_id << ',' << l.scheme << ',' << l.dram_weight_bytes << ','
        << l.dram_fmap_read_bytes << ',' << l.dram_fmap_write_bytes << ",," << l.cycles << '\n';
  }
  csv << "total,," << report.total_dram_weight_bytes << ',' << report.total_dram_fmap_read_bytes
      << ',' << report.total_dram_fmap_write_bytes << ',' << report.sram_peak_bits << ','
      << report.total_cycles << '\n';
  return csv.str();
}

}  // namespace mixflow

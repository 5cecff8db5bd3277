#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mixflow/net.hpp"
#include "mixflow/plan.hpp"
#include "mixflow/sparse_format.hpp"

namespace mixflow {

// Integer activation tensor, H x W x C, values within the signed range of
// q_a bits.
struct QuantTensor {
  int h = 0;
  int w = 0;
  std::int64_t c = 0;
  int q_a = 8;
  double scale = 1.0;
  std::vector<std::int32_t> values;  // (y * w + x) * c + ch

  std::int32_t at(int y, int x, std::int64_t ch) const {
    return values[std::size_t((std::int64_t(y) * w + x) * c + ch)];
  }
};

// Accumulator tensor produced by a convolution, q_s-wide values.
struct AccTensor {
  int h = 0;
  int w = 0;
  std::int64_t c = 0;
  std::vector<std::int64_t> values;

  std::int64_t& at(int y, int x, std::int64_t ch) {
    return values[std::size_t((std::int64_t(y) * w + x) * c + ch)];
  }
  std::int64_t at(int y, int x, std::int64_t ch) const {
    return values[std::size_t((std::int64_t(y) * w + x) * c + ch)];
  }
};

// Fixed-point mapping shared by both convolution paths: alpha and s_r become
// integers at `frac_bits` fractional bits, so the split dense+sparse kernel
// and the direct kernel run in one exact integer domain.
struct FixedPointFormat {
  int frac_bits = 12;

  std::int32_t map(float value) const;
};

// Integer weights of one layer derived from a decoded mixed record.
struct FixedWeights {
  int k = 1;
  std::int64_t n = 1;
  std::int64_t m = 1;
  std::vector<std::int32_t> values;  // filter-major, position-minor

  std::int32_t at(std::int64_t filter, std::int64_t position) const {
    return values[std::size_t(filter * (std::int64_t(k) * k * n) + position)];
  }
};

FixedWeights fixed_point_weights(const MixedLayerWeights& mixed, const FixedPointFormat& fmt);

// Direct convolution over the full weight tensor: same padding, given
// stride, exact 64-bit accumulation checked against the declared q_s width.
AccTensor direct_conv(const QuantTensor& input, const FixedWeights& weights, int stride, int q_s);

// The split computation: sign-gated accumulation scaled by fixed-point alpha,
// plus the coordinate-decoded sparse multiplies, summed per output position.
// Matches direct_conv on the reconstructed weights bit for bit.
AccTensor mixed_conv(const QuantTensor& input, const EncodedLayer& encoded, int stride, int q_s,
                     const FixedPointFormat& fmt = FixedPointFormat{});

// Event counters from literally walking the schedule's loop nests.
struct TrafficCounters {
  int layer_id = 0;
  int scheme = 0;  // 3 = row-based weight reuse, 2 = full weight reuse
  std::int64_t dram_weight_bytes = 0;
  std::int64_t dram_fmap_read_bytes = 0;
  std::int64_t dram_fmap_write_bytes = 0;
  std::int64_t sram_fmap_read_elems = 0;  // scheme 2 re-reads inputs from SRAM
  std::int64_t cycles = 0;                // idealized, rounded up
};

struct TrafficReport {
  std::vector<TrafficCounters> layers;
  std::int64_t total_dram_weight_bytes = 0;
  std::int64_t total_dram_fmap_read_bytes = 0;
  std::int64_t total_dram_fmap_write_bytes = 0;
  std::int64_t sram_peak_bits = 0;
  std::int64_t total_cycles = 0;
};

// Runs the tile loop nests of both groups with symbolic data: pipelined
// layers fetch their weight blocks once per output row, the main layer
// fetches weights once and re-reads its input frame per output tile group.
// Buffer occupancy is accounted per live buffer to give the SRAM peak.
TrafficReport traffic_sim(const NetworkDesc& net, const TilingPlan& plan);

std::string traffic_csv(const TrafficReport& report);

}  // namespace mixflow

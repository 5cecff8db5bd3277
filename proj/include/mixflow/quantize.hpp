#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mixflow/error.hpp"
#include "mixflow/net.hpp"

namespace mixflow {

// One output filter's raw weights, k*k*n values laid out channel-major:
// position = n_idx * k^2 + (kh * k + kw).
struct FilterWeights {
  int k = 1;
  std::int64_t n = 1;
  std::vector<float> values;

  std::int64_t size() const { return std::int64_t(values.size()); }
};

struct SparseEntry {
  std::int32_t position = 0;  // linear position within the filter
  std::int8_t value = 0;      // residual, scaled by the layer's s_r
};

// Mixed representation of one filter: the dense binary part (per-position
// sign and a single scale alpha) plus the high-precision residuals kept for
// the largest-magnitude weights.
struct MixedFilter {
  float alpha = 0.0f;
  std::vector<std::uint8_t> sign_negative;  // 1 bit per position, packed LSB-first
  std::vector<SparseEntry> residuals;       // sorted by position

  bool sign_neg_at(std::int64_t pos) const {
    return (sign_negative[pos >> 3] >> (pos & 7)) & 1;
  }
};

struct MixedLayerWeights {
  int layer_id = 0;
  int k = 1;
  std::int64_t n = 1;
  std::int64_t m = 1;
  double p = 0.0;     // high-precision ratio
  float s_r = 1.0f;   // shared residual scale, > 0
  std::vector<MixedFilter> filters;

  std::int64_t params() const { return std::int64_t(k) * k * n * m; }
  std::int64_t residual_count() const;
};

enum class PartitionMode {
  kChannelWise,  // top ceil(p*n) weights of each filter
  kLayerWise,    // top ceil(p*params) weights of the whole layer
};

enum class AlphaMode {
  kSmallWeights,  // mean |w| over the binarized set (default)
  kAllWeights,    // mean |w| over the whole filter
};

struct QuantizeOptions {
  PartitionMode partition = PartitionMode::kChannelWise;
  AlphaMode alpha = AlphaMode::kSmallWeights;
};

// Splits positions into (small, large): large holds the ceil(p * size)
// positions of greatest magnitude, magnitude ties resolved toward the lower
// position index.
struct FilterPartition {
  std::vector<std::int32_t> small_positions;
  std::vector<std::int32_t> large_positions;
};
FilterPartition partition_filter(const FilterWeights& filter, double p);

// Per-filter quantization before the shared residual scale is known:
// alpha, signs, and real-valued residuals at the large positions.
struct FilterQuantization {
  float alpha = 0.0f;
  std::vector<std::uint8_t> sign_negative;
  std::vector<std::int32_t> large_positions;
  std::vector<double> residuals;  // w - sign(w) * alpha
};
FilterQuantization quantize_filter(const FilterWeights& filter, double p,
                                   AlphaMode alpha_mode = AlphaMode::kSmallWeights);

// Full layer pass: per-filter partition + alpha, then the shared scale
// s_r = max |residual| / 127 over the layer, then 8-bit rounding.
MixedLayerWeights quantize_layer(int layer_id, int k, std::int64_t n,
                                 const std::vector<FilterWeights>& filters, double p,
                                 const QuantizeOptions& opts = QuantizeOptions{});

// Effective real weight at every position: sign * alpha, plus s_r * value at
// residual positions.
std::vector<float> reconstruct_filter(const MixedLayerWeights& layer, std::size_t filter_idx);
std::vector<std::vector<float>> reconstruct(const MixedLayerWeights& layer);

// Compression rate 32 / (1 + 7p) weighted by this layer's parameter share.
double compression_rate(double p, std::int64_t layer_params, std::int64_t total_params);

enum class UnquantizedBits {
  kQFull,    // count quantize=false layers at the full storage width
  kRatioOne, // count them as ratio-1 mixed layers (1 + 7*1 = 8 bits)
};

// Parameter-weighted average bits per weight. `ratios` carries one entry per
// quantized conv layer, keyed by layer id.
struct LayerRatio {
  int layer_id = 0;
  double p = 0.0;
};
double avg_bits(const NetworkDesc& net, const std::vector<LayerRatio>& ratios,
                UnquantizedBits mode = UnquantizedBits::kQFull);

// The sparsity-search objective: accuracy plus gamma-weighted compression.
double objective(double accuracy, double gamma, double compression);

// Weight tensor container (magic MPQW): per conv layer id, an M x N x K x K
// float tensor in M-major order.
struct WeightTensor {
  int layer_id = 0;
  std::int64_t m = 0;
  std::int64_t n = 0;
  int k = 0;
  std::vector<float> values;  // m * n * k * k floats

  std::vector<FilterWeights> filters() const;
};

std::vector<WeightTensor> load_weights(const std::string& path);
void save_weights(const std::string& path, const std::vector<WeightTensor>& tensors);

}  // namespace mixflow

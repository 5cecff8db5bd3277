#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mixflow/error.hpp"
#include "mixflow/quantize.hpp"

namespace mixflow {

// Bit-exact container for one layer in the block-sparse format: a count per
// k*k*T_i*T_o weight block, then a packed stream of (relative coordinate,
// int8 value) entries, alongside the dense binary planes. Channels pad up to
// whole tiles with zero filters; the header records the true M and N so
// decoding can strip the padding.
struct EncodedLayer {
  int layer_id = 0;
  int k = 1;
  std::int64_t n = 1;  // true input channels
  std::int64_t m = 1;  // true output channels
  std::int64_t t_i = 1;
  std::int64_t t_o = 1;
  int coord_bits = 12;
  double p = 0.0;
  float s_r = 1.0f;
  bool quantized = true;

  // Dense section, true-M filters only.
  std::vector<float> alphas;
  std::vector<std::vector<std::uint8_t>> sign_planes;

  // Sparse section over padded channel ranges, output-tile major.
  std::vector<std::uint16_t> block_counts;
  std::vector<std::uint8_t> entry_stream;  // bit-packed, byte padded at layer end

  // Raw float32 payload for layers kept at full precision instead of the
  // sections above.
  std::vector<float> raw_weights;

  std::int64_t n_padded() const { return ((n + t_i - 1) / t_i) * t_i; }
  std::int64_t m_padded() const { return ((m + t_o - 1) / t_o) * t_o; }
  std::int64_t block_count() const { return (m_padded() / t_o) * (n_padded() / t_i); }
  std::int64_t nnz() const;

  // Serialized sparse-section bytes: the packed entries plus one u16 count
  // per block. 12 coordinate bits put each entry at exactly 2.5 bytes.
  std::int64_t sparse_section_bytes() const;
  std::int64_t dense_section_bytes() const;
  // Bits attributed to weight storage in the 1 + 7p accounting: one sign bit
  // per binarized weight, eight bits per residual.
  std::int64_t payload_bits() const;
};

// Sizing statistics of the sparse kernel: the multiplier array covers the
// worst k*k*T_i*T_o block, the adder tree the worst k*k*T_i output slice.
struct KernelStats {
  std::int64_t n_multipliers = 0;
  std::int64_t tree_size = 0;
};

// Smallest coord_bits that can address a k*k*T_i*T_o block.
int min_coord_bits(int k, std::int64_t t_i, std::int64_t t_o);

EncodedLayer encode(const MixedLayerWeights& mixed, std::int64_t t_i, std::int64_t t_o,
                    int coord_bits = 12);

// Exact inverse of encode. Throws kCorruptData (naming the block) on count /
// stream-length mismatches, out-of-range or non-ascending coordinates, and
// entries that land in channel padding.
MixedLayerWeights decode(const EncodedLayer& encoded);

KernelStats kernel_stats(const EncodedLayer& encoded);

// The main layer serves several layers with one multiplier array; it is
// sized by the worst of them.
KernelStats merge_kernel_stats(const std::vector<KernelStats>& stats);

std::int64_t encoded_size(const EncodedLayer& encoded);

// Whole-model container (magic MPQE). Unquantized layers carry raw float32
// weights.
struct EncodedModel {
  std::vector<EncodedLayer> layers;

  std::int64_t total_bytes() const;
};

EncodedLayer encode_raw_layer(int layer_id, int k, std::int64_t n, std::int64_t m,
                              const std::vector<float>& weights);

void save_model(const std::string& path, const EncodedModel& model);
EncodedModel load_model(const std::string& path);

}  // namespace mixflow

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mixflow/error.hpp"

namespace mixflow {

enum class LayerKind { kConv, kMaxPool };

// Bit widths used by the buffer/traffic formulas.
//   q_a: activations, q_w: dense weights, q_s: partial-sum accumulators,
//   q_full: storage width of layers that stay unquantized.
struct Precision {
  int q_a = 8;
  int q_w = 8;
  int q_s = 32;
  int q_full = 32;
};

struct LayerDesc {
  int id = 0;  // 1-based, dense
  LayerKind kind = LayerKind::kConv;
  int k = 3;       // kernel size (pixels)
  int stride = 1;  // 1 or 2
  int h_in = 0;    // input feature-map height
  int w_in = 0;    // input feature-map width
  std::int64_t n = 0;  // input channels
  std::int64_t m = 0;  // output channels (== n for pooling)
  bool quantize = true;
  std::optional<int> shortcut_from;  // id of an earlier layer (residual source)
  int delay_rows = 0;                // pipeline delay to the next layer, in rows

  // Exact storage size of a compressed weight encoding, when known. Replaces
  // the q_w/q_full estimate in every SRAM and DRAM formula.
  std::optional<std::int64_t> weight_bits_override;
  // Multiplier array size of this layer's sparse kernel (0 when dense-only).
  std::int64_t sparse_multipliers = 0;

  bool is_conv() const { return kind == LayerKind::kConv; }
  int h_out() const { return h_in / stride; }
  int w_out() const { return w_in / stride; }
  std::int64_t out_elems() const { return std::int64_t(h_out()) * w_out(); }
};

struct NetworkDesc {
  std::string name;
  int input_h = 0;
  int input_w = 0;
  std::int64_t input_c = 0;
  Precision precision;
  std::vector<LayerDesc> layers;

  std::size_t layer_count() const { return layers.size(); }
  const LayerDesc& layer_by_id(int id) const;

  // Conv layers in order; group boundaries index into this list.
  std::vector<std::size_t> conv_positions() const;
  std::size_t conv_count() const { return conv_positions().size(); }
};

// Default pipeline delay: k-1 rows for k >= 2, one row for pointwise kernels.
// A downsampling layer consumes `stride` input rows per output row, which adds
// stride-1 rows on top.
int default_delay_rows(LayerKind kind, int k, int stride);

// Weight count. Pooling layers carry no parameters.
std::int64_t layer_params(const LayerDesc& layer);

// Multiply-accumulate count k^2 * H_out * W_out * N * M. Pooling layers are
// not part of the compute model; calling this on one is a domain error.
std::int64_t layer_macs(const LayerDesc& layer);

// Output activation count H_out * W_out * M.
std::int64_t output_fmap_elems(const LayerDesc& layer);

// Storage bits of one layer's weights. Quantize=false layers are held at
// q_full; otherwise the dense width q_w applies. An explicit override (e.g.
// the exact size of a mixed-precision encoding) wins over both.
std::int64_t layer_weight_bits(const NetworkDesc& net, const LayerDesc& layer);
std::int64_t layer_weight_bytes(const NetworkDesc& net, const LayerDesc& layer);

// Parses the network description document (JSON). Throws Error with
// kInvalidInput naming the offending field and layer id.
NetworkDesc parse_network(const std::string& json_text);
NetworkDesc load_network(const std::string& path);
std::string serialize_network(const NetworkDesc& net);

}  // namespace mixflow

#include "mixflow/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace mixflow {

std::int64_t MixedLayerWeights::residual_count() const {
  std::int64_t nnz = 0;
  for (const auto& f : filters) nnz += std::int64_t(f.residuals.size());
  return nnz;
}

namespace {

std::int64_t large_count(double p, std::int64_t size) {
  if (p < 0.0 || p > 1.0) throw Error(ErrorCode::kInvalidInput, "ratio p must lie in [0, 1]");
  return std::int64_t(std::ceil(p * double(size) - 1e-12));
}

std::vector<std::int32_t> top_magnitude_positions(const std::vector<float>& values, std::int64_t count) {
  std::vector<std::int32_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
    const float ma = std::fabs(values[a]);
    const float mb = std::fabs(values[b]);
    if (ma != mb) return ma > mb;
    return a < b;  // magnitude ties keep the lower position
  });
  order.resize(std::size_t(std::min<std::int64_t>(count, std::int64_t(order.size()))));
  return order;
}

std::vector<std::uint8_t> pack_signs(const std::vector<float>& values) {
  std::vector<std::uint8_t> bits((values.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::signbit(values[i]) && values[i] != 0.0f) bits[i >> 3] |= std::uint8_t(1u << (i & 7));
  }
  return bits;
}

float sign_of(bool negative) { return negative ? -1.0f : 1.0f; }

}  // namespace

FilterPartition partition_filter(const FilterWeights& filter, double p) {
  FilterPartition part;
  const std::int64_t nl = large_count(p, filter.size());
  part.large_positions = top_magnitude_positions(filter.values, nl);
  std::sort(part.large_positions.begin(), part.large_positions.end());

  std::vector<bool> is_large(filter.values.size(), false);
  for (auto pos : part.large_positions) is_large[pos] = true;
  for (std::int32_t i = 0; i < filter.size(); ++i) {
    if (!is_large[i]) part.small_positions.push_back(i);
  }
  return part;
}

FilterQuantization quantize_filter(const FilterWeights& filter, double p, AlphaMode alpha_mode) {
  for (float v : filter.values) {
    if (!std::isfinite(v))
      throw Error(ErrorCode::kInvalidInput, "filter holds a non-finite weight");
  }

  const FilterPartition part = partition_filter(filter, p);
  FilterQuantization q;
  q.sign_negative = pack_signs(filter.values);

  const auto mean_abs = [&](const std::vector<std::int32_t>& positions) {
    if (positions.empty()) return 0.0;
    double sum = 0.0;
    for (auto pos : positions) sum += std::fabs(double(filter.values[pos]));
    return sum / double(positions.size());
  };
  if (alpha_mode == AlphaMode::kSmallWeights) {
    q.alpha = float(mean_abs(part.small_positions));  // 0 when every weight is large
  } else {
    std::vector<std::int32_t> all(filter.values.size());
    std::iota(all.begin(), all.end(), 0);
    q.alpha = float(mean_abs(all));
  }

  q.large_positions = part.large_positions;
  q.residuals.reserve(part.large_positions.size());
  for (auto pos : part.large_positions) {
    const float w = filter.values[pos];
    const bool neg = std::signbit(w) && w != 0.0f;
    q.residuals.push_back(double(w) - double(sign_of(neg)) * double(q.alpha));
  }
  return q;
}

MixedLayerWeights quantize_layer(int layer_id, int k, std::int64_t n,
                                 const std::vector<FilterWeights>& filters, double p,
                                 const QuantizeOptions& opts) {
  MixedLayerWeights layer;
  layer.layer_id = layer_id;
  layer.k = k;
  layer.n = n;
  layer.m = std::int64_t(filters.size());
  layer.p = p;

  const std::int64_t per_filter = std::int64_t(k) * k * n;
  for (const auto& f : filters) {
    if (f.size() != per_filter)
      throw Error(ErrorCode::kInvalidInput, "filter shape does not match the layer");
  }

  // Layer-wise mode re-derives an effective per-filter ratio from a global
  // magnitude sort so downstream stays identical; the default channel-wise
  // mode partitions every filter at the same p.
  std::vector<FilterQuantization> quants;
  quants.reserve(filters.size());
  if (opts.partition == PartitionMode::kChannelWise) {
    for (const auto& f : filters) quants.push_back(quantize_filter(f, p, opts.alpha));
  } else {
    struct Ref {
      float mag;
      std::int32_t filter;
      std::int32_t pos;
    };
    std::vector<Ref> all;
    all.reserve(std::size_t(per_filter) * filters.size());
    for (std::size_t fi = 0; fi < filters.size(); ++fi)
      for (std::int32_t pos = 0; pos < per_filter; ++pos)
        all.push_back({std::fabs(filters[fi].values[pos]), std::int32_t(fi), pos});
    std::stable_sort(all.begin(), all.end(), [](const Ref& a, const Ref& b) {
      if (a.mag != b.mag) return a.mag > b.mag;
      if (a.filter != b.filter) return a.filter < b.filter;
      return a.pos < b.pos;
    });
    const std::int64_t nl = large_count(p, per_filter * std::int64_t(filters.size()));
    std::vector<std::vector<std::int32_t>> large_per_filter(filters.size());
    for (std::int64_t i = 0; i < nl; ++i) large_per_filter[all[i].filter].push_back(all[i].pos);

    for (std::size_t fi = 0; fi < filters.size(); ++fi) {
      const auto& f = filters[fi];
      auto& large = large_per_filter[fi];
      std::sort(large.begin(), large.end());
      FilterQuantization q;
      q.sign_negative = pack_signs(f.values);
      std::vector<bool> is_large(f.values.size(), false);
      for (auto pos : large) is_large[pos] = true;
      double sum = 0.0;
      std::int64_t cnt = 0;
      for (std::int32_t i = 0; i < f.size(); ++i) {
        const bool use = (opts.alpha == AlphaMode::kAllWeights) || !is_large[i];
        if (use) {
          sum += std::fabs(double(f.values[i]));
          ++cnt;
        }
      }
      q.alpha = cnt > 0 ? float(sum / double(cnt)) : 0.0f;
      q.large_positions = large;
      for (auto pos : large) {
        const float w = f.values[pos];
        const bool neg = std::signbit(w) && w != 0.0f;
        q.residuals.push_back(double(w) - double(sign_of(neg)) * double(q.alpha));
      }
      quants.push_back(std::move(q));
    }
  }

  // Shared symmetric scale over all residuals of the layer.
  double max_abs = 0.0;
  for (const auto& q : quants)
    for (double r : q.residuals) max_abs = std::max(max_abs, std::fabs(r));
  layer.s_r = max_abs > 0.0 ? float(max_abs / 127.0) : 1.0f;

  for (auto& q : quants) {
    MixedFilter mf;
    mf.alpha = q.alpha;
    mf.sign_negative = std::move(q.sign_negative);
    for (std::size_t i = 0; i < q.large_positions.size(); ++i) {
      const double scaled = q.residuals[i] / double(layer.s_r);
      const double rounded = std::round(scaled);
      const double clamped = std::clamp(rounded, -127.0, 127.0);
      mf.residuals.push_back({q.large_positions[i], std::int8_t(clamped)});
    }
    layer.filters.push_back(std::move(mf));
  }
  return layer;
}

std::vector<float> reconstruct_filter(const MixedLayerWeights& layer, std::size_t filter_idx) {
  const MixedFilter& f = layer.filters.at(filter_idx);
  const std::int64_t size = std::int64_t(layer.k) * layer.k * layer.n;
  std::vector<float> w(std::size_t(size), 0.0f);
  for (std::int64_t pos = 0; pos < size; ++pos)
    w[std::size_t(pos)] = sign_of(f.sign_neg_at(pos)) * f.alpha;
  for (const auto& e : f.residuals)
    w[std::size_t(e.position)] += layer.s_r * float(e.value);
  return w;
}

std::vector<std::vector<float>> reconstruct(const MixedLayerWeights& layer) {
  std::vector<std::vector<float>> out;
  out.reserve(layer.filters.size());
  for (std::size_t i = 0; i < layer.filters.size(); ++i) out.push_back(reconstruct_filter(layer, i));
  return out;
}

double compression_rate(double p, std::int64_t layer_params, std::int64_t total_params) {
  if (p < 0.0 || p > 1.0) throw Error(ErrorCode::kInvalidInput, "ratio p must lie in [0, 1]");
  if (layer_params < 0 || total_params < 1 || layer_params > total_params)
    throw Error(ErrorCode::kInvalidInput, "bad parameter counts for compression rate");
  return 32.0 / (1.0 + 7.0 * p) * double(layer_params) / double(total_params);
}

double avg_bits(const NetworkDesc& net, const std::vector<LayerRatio>& ratios, UnquantizedBits mode) {
  double weighted = 0.0;
  std::int64_t total = 0;
  for (const auto& layer : net.layers) {
    const std::int64_t params = layer_params(layer);
    if (params == 0) continue;
    double bits;
    if (layer.quantize) {
      const LayerRatio* r = nullptr;
      for (const auto& cand : ratios) {
        if (cand.layer_id == layer.id) r = &cand;
      }
      if (r == nullptr)
        throw Error(ErrorCode::kInvalidInput,
                    "no ratio given for quantized layer " + std::to_string(layer.id));
      bits = 1.0 + 7.0 * r->p;
    } else {
      bits = (mode == UnquantizedBits::kQFull) ? double(net.precision.q_full) : 8.0;
    }
    weighted += bits * double(params);
    total += params;
  }
  if (total == 0) throw Error(ErrorCode::kInvalidInput, "network has no parameters");
  return weighted / double(total);
}

double objective(double accuracy, double gamma, double compression) {
  if (gamma < 0.0) throw Error(ErrorCode::kInvalidInput, "gamma must be >= 0");
  return accuracy + gamma * compression;
}

std::vector<FilterWeights> WeightTensor::filters() const {
  std::vector<FilterWeights> out;
  const std::int64_t per_filter = n * k * k;
  out.reserve(std::size_t(m));
  for (std::int64_t f = 0; f < m; ++f) {
    FilterWeights fw;
    fw.k = k;
    fw.n = n;
    fw.values.assign(values.begin() + f * per_filter, values.begin() + (f + 1) * per_filter);
    out.push_back(std::move(fw));
  }
  return out;
}

namespace {

constexpr char kWeightsMagic[4] = {'M', 'P', 'Q', 'W'};

void write_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
                         char((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  if (!in) throw Error(ErrorCode::kCorruptData, "weight file truncated");
  return std::uint32_t(bytes[0]) | (std::uint32_t(bytes[1]) << 8) | (std::uint32_t(bytes[2]) << 16) |
         (std::uint32_t(bytes[3]) << 24);
}

void write_f32(std::ostream& out, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  write_u32(out, v);
}

float read_f32(std::istream& in) {
  const std::uint32_t v = read_u32(in);
  float f;
  std::memcpy(&f, &v, 4);
  return f;
}

}  // namespace

std::vector<WeightTensor> load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kInvalidInput, "cannot open weight file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kWeightsMagic, 4) != 0)
    throw Error(ErrorCode::kInvalidInput, "not a weight tensor file (bad magic): " + path);
  const std::uint32_t version = read_u32(in);
  if (version != 1)
    throw Error(ErrorCode::kInvalidInput, "unsupported weight file version " + std::to_string(version));
  const std::uint32_t count = read_u32(in);

  std::vector<WeightTensor> tensors;
  tensors.reserve(count);
  for (std::uint32_t t = 0; t < count; ++t) {
    WeightTensor wt;
    wt.layer_id = int(read_u32(in));
    wt.m = read_u32(in);
    wt.n = read_u32(in);
    const std::uint32_t k1 = read_u32(in);
    const std::uint32_t k2 = read_u32(in);
    if (k1 != k2) throw Error(ErrorCode::kCorruptData, "non-square kernel in weight file");
    wt.k = int(k1);
    const std::int64_t total = wt.m * wt.n * std::int64_t(wt.k) * wt.k;
    wt.values.resize(std::size_t(total));
    for (auto& v : wt.values) v = read_f32(in);
    tensors.push_back(std::move(wt));
  }
  return tensors;
}

void save_weights(const std::string& path, const std::vector<WeightTensor>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kInvalidInput, "cannot write weight file: " + path);
  out.write(kWeightsMagic, 4);
  write_u32(out, 1);
  write_u32(out, std::uint32_t(tensors.size()));
  for (const auto& wt : tensors) {
    write_u32(out, std::uint32_t(wt.layer_id));
    write_u32(out, std::uint32_t(wt.m));
    write_u32(out, std::uint32_t(wt.n));
    write_u32(out, std::uint32_t(wt.k));
    write_u32(out, std::uint32_t(wt.k));
    for (float v : wt.values) write_f32(out, v);
  }
}

}  // namespace mixflow

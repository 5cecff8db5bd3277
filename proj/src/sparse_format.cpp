#include "mixflow/sparse_format.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace mixflow {

namespace {

// Little-endian bit stream: bit i of the stream is bit (i & 7) of byte
// (i >> 3). Values append low bit first.
class BitWriter {
 public:
  void append(std::uint64_t value, int bits) {
    for (int b = 0; b < bits; ++b) {
      if (bit_ == 0) bytes_.push_back(0);
      if ((value >> b) & 1) bytes_.back() |= std::uint8_t(1u << bit_);
      bit_ = (bit_ + 1) & 7;
    }
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
  int bit_ = 0;
};

class BitReader {
 public:
  BitReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}
  std::uint64_t read(int bits) {
    std::uint64_t v = 0;
    for (int b = 0; b < bits; ++b) {
      const std::size_t idx = pos_ >> 3;
      if (idx >= bytes_.size()) throw Error(ErrorCode::kCorruptData, "entry stream truncated");
      if ((bytes_[idx] >> (pos_ & 7)) & 1) v |= (std::uint64_t(1) << b);
      ++pos_;
    }
    return v;
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

struct Coordinate {
  std::int64_t block;  // output-tile major, then input-tile
  std::int64_t rel;    // (k_pos * t_i + ti_off) * t_o + to_off
};

Coordinate to_coordinate(const EncodedLayer& layout, std::int64_t filter, std::int64_t position) {
  const std::int64_t k2 = std::int64_t(layout.k) * layout.k;
  const std::int64_t channel = position / k2;
  const std::int64_t k_pos = position % k2;
  const std::int64_t to_idx = filter / layout.t_o;
  const std::int64_t ti_idx = channel / layout.t_i;
  Coordinate c;
  c.block = to_idx * (layout.n_padded() / layout.t_i) + ti_idx;
  c.rel = (k_pos * layout.t_i + channel % layout.t_i) * layout.t_o + filter % layout.t_o;
  return c;
}

void from_coordinate(const EncodedLayer& layout, std::int64_t block, std::int64_t rel,
                     std::int64_t* filter, std::int64_t* position) {
  const std::int64_t tiles_n = layout.n_padded() / layout.t_i;
  const std::int64_t to_idx = block / tiles_n;
  const std::int64_t ti_idx = block % tiles_n;
  const std::int64_t to_off = rel % layout.t_o;
  const std::int64_t ti_off = (rel / layout.t_o) % layout.t_i;
  const std::int64_t k_pos = rel / (layout.t_o * layout.t_i);
  *filter = to_idx * layout.t_o + to_off;
  *position = (ti_idx * layout.t_i + ti_off) * std::int64_t(layout.k) * layout.k + k_pos;
}

}  // namespace

std::int64_t EncodedLayer::nnz() const {
  std::int64_t total = 0;
  for (auto c : block_counts) total += c;
  return total;
}

std::int64_t EncodedLayer::sparse_section_bytes() const {
  const std::int64_t stream = (nnz() * (coord_bits + 8) + 7) / 8;
  return stream + block_count() * 2;
}

std::int64_t EncodedLayer::dense_section_bytes() const {
  const std::int64_t plane = (std::int64_t(k) * k * n + 7) / 8;
  return m * (4 + plane);
}

std::int64_t EncodedLayer::payload_bits() const {
  const std::int64_t params = std::int64_t(k) * k * n * m;
  if (!quantized) return params * 32;
  return (params - nnz()) + nnz() * 8;
}

int min_coord_bits(int k, std::int64_t t_i, std::int64_t t_o) {
  const std::int64_t positions = std::int64_t(k) * k * t_i * t_o;
  int bits = 0;
  while ((std::int64_t(1) << bits) < positions) ++bits;
  return bits;
}

EncodedLayer encode(const MixedLayerWeights& mixed, std::int64_t t_i, std::int64_t t_o,
                    int coord_bits) {
  if (t_i < 1 || t_o < 1) throw Error(ErrorCode::kInvalidInput, "tiles must be >= 1");
  EncodedLayer enc;
  enc.layer_id = mixed.layer_id;
  enc.k = mixed.k;
  enc.n = mixed.n;
  enc.m = mixed.m;
  enc.t_i = t_i;
  enc.t_o = t_o;
  enc.coord_bits = coord_bits;
  enc.p = mixed.p;
  enc.s_r = mixed.s_r;
  enc.quantized = true;

  const std::int64_t positions_per_block = std::int64_t(mixed.k) * mixed.k * t_i * t_o;
  if (positions_per_block > (std::int64_t(1) << coord_bits)) {
    throw Error(ErrorCode::kInvalidInput,
                "coordinate overflow: k*k*t_i*t_o = " + std::to_string(positions_per_block) +
                    " exceeds 2^" + std::to_string(coord_bits) + "; coord_bits=" +
                    std::to_string(min_coord_bits(mixed.k, t_i, t_o)) + " suffices");
  }

  for (const auto& f : mixed.filters) {
    enc.alphas.push_back(f.alpha);
    enc.sign_planes.push_back(f.sign_negative);
  }

  struct Entry {
    std::int64_t rel;
    std::int8_t value;
  };
  std::vector<std::vector<Entry>> blocks(std::size_t(enc.block_count()));
  for (std::size_t fi = 0; fi < mixed.filters.size(); ++fi) {
    for (const auto& e : mixed.filters[fi].residuals) {
      const Coordinate c = to_coordinate(enc, std::int64_t(fi), e.position);
      blocks[std::size_t(c.block)].push_back({c.rel, e.value});
    }
  }

  BitWriter writer;
  for (auto& block : blocks) {
    std::sort(block.begin(), block.end(), [](const Entry& a, const Entry& b) { return a.rel < b.rel; });
    enc.block_counts.push_back(std::uint16_t(block.size()));
    for (const auto& e : block) {
      writer.append(std::uint64_t(e.rel), coord_bits);
      writer.append(std::uint8_t(e.value), 8);
    }
  }
  enc.entry_stream = writer.take();
  return enc;
}

MixedLayerWeights decode(const EncodedLayer& enc) {
  if (!enc.quantized)
    throw Error(ErrorCode::kInvalidInput, "layer " + std::to_string(enc.layer_id) + " is stored raw");
  if (std::int64_t(enc.block_counts.size()) != enc.block_count())
    throw Error(ErrorCode::kCorruptData, "block-info length mismatch");
  const std::int64_t expect_bytes = (enc.nnz() * (enc.coord_bits + 8) + 7) / 8;
  if (std::int64_t(enc.entry_stream.size()) != expect_bytes)
    throw Error(ErrorCode::kCorruptData, "entry stream length does not match the block counts");

  MixedLayerWeights mixed;
  mixed.layer_id = enc.layer_id;
  mixed.k = enc.k;
  mixed.n = enc.n;
  mixed.m = enc.m;
  mixed.p = enc.p;
  mixed.s_r = enc.s_r;
  mixed.filters.resize(std::size_t(enc.m));
  for (std::int64_t fi = 0; fi < enc.m; ++fi) {
    mixed.filters[std::size_t(fi)].alpha = enc.alphas.at(std::size_t(fi));
    mixed.filters[std::size_t(fi)].sign_negative = enc.sign_planes.at(std::size_t(fi));
  }

  BitReader reader(enc.entry_stream);
  for (std::int64_t block = 0; block < enc.block_count(); ++block) {
    std::int64_t prev_rel = -1;
    for (std::uint16_t i = 0; i < enc.block_counts[std::size_t(block)]; ++i) {
      const std::int64_t rel = std::int64_t(reader.read(enc.coord_bits));
      const std::int8_t value = std::int8_t(reader.read(8));
      if (rel >= std::int64_t(enc.k) * enc.k * enc.t_i * enc.t_o)
        throw Error(ErrorCode::kCorruptData,
                    "block " + std::to_string(block) + ": coordinate out of range");
      if (rel <= prev_rel)
        throw Error(ErrorCode::kCorruptData,
                    "block " + std::to_string(block) + ": coordinates not strictly ascending");
      prev_rel = rel;
      std::int64_t filter = 0;
      std::int64_t position = 0;
      from_coordinate(enc, block, rel, &filter, &position);
      if (filter >= enc.m || position >= std::int64_t(enc.k) * enc.k * enc.n)
        throw Error(ErrorCode::kCorruptData,
                    "block " + std::to_string(block) + ": entry lands in channel padding");
      mixed.filters[std::size_t(filter)].residuals.push_back({std::int32_t(position), value});
    }
  }
  for (auto& f : mixed.filters) {
    std::sort(f.residuals.begin(), f.residuals.end(),
              [](const SparseEntry& a, const SparseEntry& b) { return a.position < b.position; });
  }
  return mixed;
}

KernelStats kernel_stats(const EncodedLayer& enc) {
  KernelStats stats;
  for (auto c : enc.block_counts)
    stats.n_multipliers = std::max<std::int64_t>(stats.n_multipliers, c);

  // Tree size needs per-output-slice counts, which live in the coordinates.
  BitReader reader(enc.entry_stream);
  for (std::int64_t block = 0; block < std::int64_t(enc.block_counts.size()); ++block) {
    std::vector<std::int64_t> per_slice(std::size_t(enc.t_o), 0);
    for (std::uint16_t i = 0; i < enc.block_counts[std::size_t(block)]; ++i) {
      const std::int64_t rel = std::int64_t(reader.read(enc.coord_bits));
      reader.read(8);
      per_slice[std::size_t(rel % enc.t_o)] += 1;
    }
    for (auto c : per_slice) stats.tree_size = std::max(stats.tree_size, c);
  }
  return stats;
}

KernelStats merge_kernel_stats(const std::vector<KernelStats>& stats) {
  KernelStats merged;
  for (const auto& s : stats) {
    merged.n_multipliers = std::max(merged.n_multipliers, s.n_multipliers);
    merged.tree_size = std::max(merged.tree_size, s.tree_size);
  }
  return merged;
}

std::int64_t encoded_size(const EncodedLayer& enc) { return enc.sparse_section_bytes(); }

EncodedLayer encode_raw_layer(int layer_id, int k, std::int64_t n, std::int64_t m,
                              const std::vector<float>& weights) {
  if (std::int64_t(weights.size()) != std::int64_t(k) * k * n * m)
    throw Error(ErrorCode::kInvalidInput, "raw weight count does not match the layer shape");
  EncodedLayer enc;
  enc.layer_id = layer_id;
  enc.k = k;
  enc.n = n;
  enc.m = m;
  enc.t_i = 0;
  enc.t_o = 0;
  enc.coord_bits = 0;
  enc.p = 1.0;
  enc.s_r = 0.0f;
  enc.quantized = false;
  enc.raw_weights = weights;
  return enc;
}

std::int64_t EncodedModel::total_bytes() const {
  std::int64_t total = 0;
  for (const auto& l : layers) {
    total += 4 * 10;  // header words
    if (l.quantized) {
      total += l.dense_section_bytes() + l.sparse_section_bytes();
    } else {
      total += std::int64_t(l.raw_weights.size()) * 4;
    }
  }
  return total + 12;  // magic, version, layer count
}

namespace {

constexpr char kModelMagic[4] = {'M', 'P', 'Q', 'E'};

void write_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
                         char((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

void write_u16(std::ostream& out, std::uint16_t v) {
  const char bytes[2] = {char(v & 0xff), char((v >> 8) & 0xff)};
  out.write(bytes, 2);
}

void write_f32(std::ostream& out, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  write_u32(out, v);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw Error(ErrorCode::kCorruptData, "model file truncated");
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  if (!in) throw Error(ErrorCode::kCorruptData, "model file truncated");
  return std::uint16_t(b[0] | (b[1] << 8));
}

float read_f32(std::istream& in) {
  const std::uint32_t v = read_u32(in);
  float f;
  std::memcpy(&f, &v, 4);
  return f;
}

}  // namespace

void save_model(const std::string& path, const EncodedModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kInvalidInput, "cannot write model file: " + path);
  out.write(kModelMagic, 4);
  write_u32(out, 1);
  write_u32(out, std::uint32_t(model.layers.size()));
  for (const auto& l : model.layers) {
    write_u32(out, std::uint32_t(l.layer_id));
    write_u32(out, l.quantized ? 1u : 0u);
    write_u32(out, std::uint32_t(l.m));
    write_u32(out, std::uint32_t(l.n));
    write_u32(out, std::uint32_t(l.k));
    write_u32(out, std::uint32_t(l.t_i));
    write_u32(out, std::uint32_t(l.t_o));
    write_u32(out, std::uint32_t(l.coord_bits));
    write_f32(out, float(l.p));
    write_f32(out, l.s_r);
    if (l.quantized) {
      for (std::int64_t fi = 0; fi < l.m; ++fi) {
        write_f32(out, l.alphas[std::size_t(fi)]);
        const auto& plane = l.sign_planes[std::size_t(fi)];
        out.write(reinterpret_cast<const char*>(plane.data()), std::streamsize(plane.size()));
      }
      for (auto c : l.block_counts) write_u16(out, c);
      out.write(reinterpret_cast<const char*>(l.entry_stream.data()),
                std::streamsize(l.entry_stream.size()));
    } else {
      for (float v : l.raw_weights) write_f32(out, v);
    }
  }
}

EncodedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kInvalidInput, "cannot open model file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kModelMagic, 4) != 0)
    throw Error(ErrorCode::kInvalidInput, "not an encoded model file (bad magic): " + path);
  const std::uint32_t version = read_u32(in);
  if (version != 1)
    throw Error(ErrorCode::kInvalidInput, "unsupported model version " + std::to_string(version));
  const std::uint32_t count = read_u32(in);

  EncodedModel model;
  for (std::uint32_t li = 0; li < count; ++li) {
    EncodedLayer l;
    l.layer_id = int(read_u32(in));
    l.quantized = read_u32(in) != 0;
    l.m = read_u32(in);
    l.n = read_u32(in);
    l.k = int(read_u32(in));
    l.t_i = read_u32(in);
    l.t_o = read_u32(in);
    l.coord_bits = int(read_u32(in));
    l.p = double(read_f32(in));
    l.s_r = read_f32(in);
    if (l.quantized) {
      if (l.t_i < 1 || l.t_o < 1) throw Error(ErrorCode::kCorruptData, "quantized layer without tiles");
      const std::int64_t plane_bytes = (std::int64_t(l.k) * l.k * l.n + 7) / 8;
      for (std::int64_t fi = 0; fi < l.m; ++fi) {
        l.alphas.push_back(read_f32(in));
        std::vector<std::uint8_t> plane(static_cast<std::size_t>(plane_bytes), 0);
        in.read(reinterpret_cast<char*>(plane.data()), std::streamsize(plane.size()));
        if (!in) throw Error(ErrorCode::kCorruptData, "model file truncated in sign planes");
        l.sign_planes.push_back(std::move(plane));
      }
      for (std::int64_t b = 0; b < l.block_count(); ++b) l.block_counts.push_back(read_u16(in));
      const std::int64_t stream_bytes = (l.nnz() * (l.coord_bits + 8) + 7) / 8;
      l.entry_stream.resize(std::size_t(stream_bytes));
      in.read(reinterpret_cast<char*>(l.entry_stream.data()), std::streamsize(l.entry_stream.size()));
      if (!in) throw Error(ErrorCode::kCorruptData, "model file truncated in entry stream");
    } else {
      const std::int64_t total = std::int64_t(l.k) * l.k * l.n * l.m;
      l.raw_weights.resize(std::size_t(total));
      for (auto& v : l.raw_weights) v = read_f32(in);
    }
    model.layers.push_back(std::move(l));
  }
  return model;
}

}  // namespace mixflow

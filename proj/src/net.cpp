#include "mixflow/net.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mixflow {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::kInvalidInput, msg); }

[[noreturn]] void fail_layer(int id, const std::string& msg) {
  fail("layer " + std::to_string(id) + ": " + msg);
}

int get_int(const json& obj, const char* key, int layer_id) {
  if (!obj.contains(key)) fail_layer(layer_id, std::string("missing field '") + key + "'");
  if (!obj[key].is_number_integer()) fail_layer(layer_id, std::string("field '") + key + "' must be an integer");
  return obj[key].get<int>();
}

}  // namespace

const LayerDesc& NetworkDesc::layer_by_id(int id) const {
  for (const auto& l : layers) {
    if (l.id == id) return l;
  }
  fail("no layer with id " + std::to_string(id));
}

std::vector<std::size_t> NetworkDesc::conv_positions() const {
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].is_conv()) pos.push_back(i);
  }
  return pos;
}

int default_delay_rows(LayerKind kind, int k, int stride) {
  const int window = (k >= 2) ? k - 1 : 1;
  if (kind == LayerKind::kMaxPool) return window + (stride - 1);
  return window;
}

std::int64_t layer_params(const LayerDesc& layer) {
  if (!layer.is_conv()) return 0;
  return std::int64_t(layer.k) * layer.k * layer.n * layer.m;
}

std::int64_t layer_macs(const LayerDesc& layer) {
  if (!layer.is_conv()) {
    throw Error(ErrorCode::kInvalidInput,
                "layer " + std::to_string(layer.id) + ": MAC count is defined for conv layers only");
  }
  return layer_params(layer) * layer.out_elems();
}

std::int64_t output_fmap_elems(const LayerDesc& layer) {
  return layer.out_elems() * layer.m;
}

std::int64_t layer_weight_bits(const NetworkDesc& net, const LayerDesc& layer) {
  if (!layer.is_conv()) return 0;
  if (layer.weight_bits_override) return *layer.weight_bits_override;
  const int width = layer.quantize ? net.precision.q_w : net.precision.q_full;
  return layer_params(layer) * width;
}

std::int64_t layer_weight_bytes(const NetworkDesc& net, const LayerDesc& layer) {
  const std::int64_t bits = layer_weight_bits(net, layer);
  return (bits + 7) / 8;
}

NetworkDesc parse_network(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(std::string("not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail("document root must be an object");

  NetworkDesc net;
  net.name = doc.value("name", std::string("unnamed"));

  if (!doc.contains("input") || !doc["input"].is_object()) fail("missing 'input' object");
  const json& in = doc["input"];
  if (!in.contains("h") || !in.contains("c")) fail("'input' needs fields 'h' and 'c'");
  net.input_h = in["h"].get<int>();
  net.input_w = in.value("w", net.input_h);
  net.input_c = in["c"].get<std::int64_t>();
  if (net.input_h < 1 || net.input_w < 1 || net.input_c < 1) fail("'input' dimensions must be positive");

  if (doc.contains("precision")) {
    const json& p = doc["precision"];
    net.precision.q_a = p.value("q_a", 8);
    net.precision.q_w = p.value("q_w", 8);
    net.precision.q_s = p.value("q_s", 32);
    net.precision.q_full = p.value("q_full", 32);
    if (net.precision.q_a < 1 || net.precision.q_w < 1 || net.precision.q_s < 1 || net.precision.q_full < 1)
      fail("'precision' widths must be >= 1");
    if (net.precision.q_s < net.precision.q_a + net.precision.q_w)
      fail("'precision': q_s must be >= q_a + q_w to accumulate without overflow");
  }

  if (!doc.contains("layers") || !doc["layers"].is_array() || doc["layers"].empty())
    fail("missing non-empty 'layers' array");

  int h = net.input_h;
  int w = net.input_w;
  std::int64_t channels = net.input_c;
  int expect_id = 1;

  for (const json& jl : doc["layers"]) {
    if (!jl.is_object()) fail("each layer must be an object");
    LayerDesc l;
    l.id = get_int(jl, "id", expect_id);
    if (l.id != expect_id) fail_layer(l.id, "ids must be dense starting at 1 (expected " + std::to_string(expect_id) + ")");

    const std::string kind = jl.value("kind", std::string("conv"));
    if (kind == "conv") {
      l.kind = LayerKind::kConv;
    } else if (kind == "maxpool") {
      l.kind = LayerKind::kMaxPool;
    } else {
      fail_layer(l.id, "field 'kind' must be \"conv\" or \"maxpool\", got \"" + kind + "\"");
    }

    l.k = get_int(jl, "k", l.id);
    l.stride = jl.value("stride", 1);
    l.h_in = h;
    l.w_in = w;
    l.n = channels;

    if (l.k < 1) fail_layer(l.id, "kernel size must be >= 1");
    if (l.stride != 1 && l.stride != 2) fail_layer(l.id, "stride must be 1 or 2");
    if (l.h_in < l.k || l.w_in < l.k) fail_layer(l.id, "feature map smaller than the kernel");
    if (l.stride == 2 && (l.h_in % 2 != 0 || l.w_in % 2 != 0))
      fail_layer(l.id, "stride-2 layer needs even input dimensions");

    if (jl.contains("in_channels") && !jl["in_channels"].is_null()) {
      const std::int64_t declared = jl["in_channels"].get<std::int64_t>();
      if (declared != channels) {
        fail_layer(l.id, "geometry mismatch: declares " + std::to_string(declared) +
                             " input channels but the previous layer outputs " + std::to_string(channels));
      }
    }

    if (l.is_conv()) {
      l.m = get_int(jl, "out_channels", l.id);
      if (l.m < 1) fail_layer(l.id, "'out_channels' must be >= 1");
      l.quantize = jl.value("quantize", true);
    } else {
      if (jl.contains("out_channels") && !jl["out_channels"].is_null() &&
          jl["out_channels"].get<std::int64_t>() != channels) {
        fail_layer(l.id, "pooling cannot change the channel count");
      }
      l.m = channels;
      l.quantize = false;
    }

    if (jl.contains("shortcut_from") && !jl["shortcut_from"].is_null()) {
      if (!l.is_conv()) fail_layer(l.id, "'shortcut_from' is only valid on conv layers");
      l.shortcut_from = jl["shortcut_from"].get<int>();
      if (*l.shortcut_from < 1 || *l.shortcut_from >= l.id)
        fail_layer(l.id, "'shortcut_from' must reference an earlier layer, got " +
                             std::to_string(*l.shortcut_from));
    }

    if (jl.contains("delay_rows") && !jl["delay_rows"].is_null()) {
      l.delay_rows = jl["delay_rows"].get<int>();
      if (l.delay_rows < 0) fail_layer(l.id, "'delay_rows' must be >= 0");
    } else {
      l.delay_rows = default_delay_rows(l.kind, l.k, l.stride);
    }

    h = l.h_out();
    w = l.w_out();
    if (h < 1 || w < 1) fail_layer(l.id, "output feature map vanished");
    channels = l.m;
    net.layers.push_back(l);
    ++expect_id;
  }

  return net;
}

NetworkDesc load_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open network file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_network(ss.str());
}

std::string serialize_network(const NetworkDesc& net) {
  json doc;
  doc["name"] = net.name;
  doc["input"] = {{"h", net.input_h}, {"w", net.input_w}, {"c", net.input_c}};
  doc["precision"] = {{"q_a", net.precision.q_a},
                      {"q_w", net.precision.q_w},
                      {"q_s", net.precision.q_s},
                      {"q_full", net.precision.q_full}};
  doc["layers"] = json::array();
  for (const auto& l : net.layers) {
    json jl;
    jl["id"] = l.id;
    jl["kind"] = l.is_conv() ? "conv" : "maxpool";
    jl["k"] = l.k;
    jl["stride"] = l.stride;
    jl["out_channels"] = l.m;
    jl["quantize"] = l.quantize;
    jl["shortcut_from"] = l.shortcut_from ? json(*l.shortcut_from) : json(nullptr);
    jl["delay_rows"] = l.delay_rows;
    doc["layers"].push_back(jl);
  }
  return doc.dump(2) + "\n";
}

}  // namespace mixflow

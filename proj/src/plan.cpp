#include "mixflow/plan.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mixflow {

using nlohmann::json;

const LayerTiles* TilingPlan::tiles_for(int layer_id) const {
  for (const auto& t : group1) {
    if (t.layer_id == layer_id) return &t;
  }
  return nullptr;
}

std::size_t group1_end(const NetworkDesc& net, int boundary) {
  if (boundary <= 0) return 0;
  const auto convs = net.conv_positions();
  if (boundary > static_cast<int>(convs.size()))
    throw Error(ErrorCode::kInvalidInput,
                "boundary " + std::to_string(boundary) + " exceeds the conv layer count");
  std::size_t end = convs[boundary - 1] + 1;
  while (end < net.layers.size() && !net.layers[end].is_conv()) ++end;
  return end;
}

bool is_power_of_two(std::int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

std::int64_t largest_power_of_two_at_most(std::int64_t v) {
  if (v < 1) throw Error(ErrorCode::kInvalidInput, "no power of two at most " + std::to_string(v));
  std::int64_t p = 1;
  while (p * 2 <= v) p *= 2;
  return p;
}

std::int64_t round_to_power_of_two(const Rational& ideal) {
  if (ideal <= Rational(1)) return 1;
  std::int64_t lo = 1;
  while (Rational(lo * 2) <= ideal) lo *= 2;
  if (Rational(lo) == ideal) return lo;
  // Midpoint between lo and 2*lo is 3*lo/2; ties round up.
  const Rational mid(3 * Rational::Int(lo), 2);
  return ideal < mid ? lo : lo * 2;
}

namespace {

// A tile may be a power of two or saturate at its channel bound (first layers
// often have a non-power channel count such as RGB's 3).
void check_tile(const NetworkDesc& net, const LayerDesc& layer, std::int64_t t, std::int64_t bound,
                const char* which) {
  if (t < 1 || t > bound)
    throw Error(ErrorCode::kInvalidInput, "layer " + std::to_string(layer.id) + ": " + which + "=" +
                                              std::to_string(t) + " outside [1, " + std::to_string(bound) + "]");
  if (!is_power_of_two(t) && t != bound)
    throw Error(ErrorCode::kInvalidInput, "layer " + std::to_string(layer.id) + ": " + which + "=" +
                                              std::to_string(t) + " is neither a power of two nor the channel bound");
  (void)net;
}

}  // namespace

void validate_plan(const NetworkDesc& net, const TilingPlan& plan) {
  const auto convs = net.conv_positions();
  if (plan.boundary < 0 || plan.boundary > static_cast<int>(convs.size()))
    throw Error(ErrorCode::kInvalidInput, "boundary out of range");

  std::int64_t prev_t_o = -1;
  for (int ci = 0; ci < plan.boundary; ++ci) {
    const LayerDesc& layer = net.layers[convs[ci]];
    const LayerTiles* t = plan.tiles_for(layer.id);
    if (t == nullptr)
      throw Error(ErrorCode::kInvalidInput, "plan misses tiles for pipelined layer " + std::to_string(layer.id));
    check_tile(net, layer, t->t_i, layer.n, "t_i");
    check_tile(net, layer, t->t_o, layer.m, "t_o");
    if (prev_t_o >= 0 && t->t_i != prev_t_o)
      throw Error(ErrorCode::kInvalidInput,
                  "layer " + std::to_string(layer.id) + ": t_i=" + std::to_string(t->t_i) +
                      " breaks chaining with previous t_o=" + std::to_string(prev_t_o));
    prev_t_o = t->t_o;
  }

  const bool has_main_layers = plan.boundary < static_cast<int>(convs.size());
  if (has_main_layers) {
    if (!plan.main_tile)
      throw Error(ErrorCode::kInvalidInput, "plan misses the main-layer tile");
    const std::int64_t t = *plan.main_tile;
    if (!is_power_of_two(t))
      throw Error(ErrorCode::kInvalidInput, "main tile must be a power of two, got " + std::to_string(t));
    for (std::size_t ci = plan.boundary; ci < convs.size(); ++ci) {
      const LayerDesc& layer = net.layers[convs[ci]];
      if (t > layer.n || t > layer.m)
        throw Error(ErrorCode::kInvalidInput, "main tile " + std::to_string(t) + " exceeds channels of layer " +
                                                  std::to_string(layer.id));
    }
  }
}

std::string serialize_plan(const TilingPlan& plan) {
  json doc;
  doc["boundary"] = plan.boundary;
  doc["params_on_chip"] = plan.params_on_chip;
  doc["group1"] = json::array();
  for (const auto& t : plan.group1) {
    doc["group1"].push_back({{"layer_id", t.layer_id}, {"t_i", t.t_i}, {"t_o", t.t_o}});
  }
  doc["main_tile"] = plan.main_tile ? json(*plan.main_tile) : json(nullptr);
  return doc.dump(2) + "\n";
}

TilingPlan parse_plan(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidInput, std::string("plan is not valid JSON: ") + e.what());
  }
  TilingPlan plan;
  plan.boundary = doc.at("boundary").get<int>();
  plan.params_on_chip = doc.value("params_on_chip", false);
  if (doc.contains("group1")) {
    for (const json& jt : doc["group1"]) {
      LayerTiles t;
      t.layer_id = jt.at("layer_id").get<int>();
      t.t_i = jt.at("t_i").get<std::int64_t>();
      t.t_o = jt.at("t_o").get<std::int64_t>();
      plan.group1.push_back(t);
    }
  }
  if (doc.contains("main_tile") && !doc["main_tile"].is_null())
    plan.main_tile = doc["main_tile"].get<std::int64_t>();
  return plan;
}

TilingPlan load_plan(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kInvalidInput, "cannot open plan file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_plan(ss.str());
}

}  // namespace mixflow

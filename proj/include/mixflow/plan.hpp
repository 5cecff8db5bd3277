#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mixflow/net.hpp"
#include "mixflow/rational.hpp"

namespace mixflow {

// Channel tiling of one pipelined conv layer.
struct LayerTiles {
  int layer_id = 0;
  std::int64_t t_i = 1;
  std::int64_t t_o = 1;
  std::int64_t pf() const { return t_i * t_o; }
};

// A complete schedule: the group boundary (index into the conv-layer
// sequence, 0 = everything runs on the main layer, conv_count = fully
// pipelined), per-layer tiles for the pipelined group, and the single square
// tile of the main layer.
struct TilingPlan {
  int boundary = 0;  // conv index i, 0..conv_count
  bool params_on_chip = false;
  std::vector<LayerTiles> group1;          // one entry per conv layer with conv index <= boundary
  std::optional<std::int64_t> main_tile;   // t_i == t_o for every layer the main layer runs

  const LayerTiles* tiles_for(int layer_id) const;
};

// Global layer index one past the end of group 1. Pooling layers attach to
// the group of their preceding conv layer.
std::size_t group1_end(const NetworkDesc& net, int boundary);

// Checks every structural invariant of a plan against its network: tile
// bounds, power-of-two parallelism (clamped tiles may saturate at the channel
// count), chaining T_i(l+1) == T_o(l) inside group 1, and a square
// power-of-two main tile. Throws kInvalidInput on the first violation.
void validate_plan(const NetworkDesc& net, const TilingPlan& plan);

std::string serialize_plan(const TilingPlan& plan);
TilingPlan parse_plan(const std::string& json_text);
TilingPlan load_plan(const std::string& path);

bool is_power_of_two(std::int64_t v);
// Nearest power of two by exact comparison, ties rounding up; result >= 1.
std::int64_t round_to_power_of_two(const Rational& ideal);
std::int64_t largest_power_of_two_at_most(std::int64_t v);

}  // namespace mixflow

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mixflow/dse.hpp"
#include "mixflow/gp.hpp"

namespace mixflow {

// Process exit codes, stable across releases.
enum ExitCode : int {
  kExitOk = 0,
  kExitInputError = 2,
  kExitInfeasible = 3,
  kExitVerifyFailed = 4,
};

int exit_code_for(ErrorCode code);

struct DseConfig {
  std::string net_path;
  std::int64_t alpha_bits = std::int64_t(1) << 62;
  double mult_budget = 1e18;
  double clock_hz = 200e6;
  bool params_on_chip = false;
  std::string sweep_out;  // CSV path, empty = stdout only
  std::string plan_out;   // plan JSON path, optional
};

struct QuantizeConfig {
  std::string net_path;
  std::string weights_path;
  std::string ratios_path;      // JSON {"layer_id": p, ...}; empty = uniform
  double uniform_ratio = 0.05;
  std::int64_t t_i = 16;
  std::int64_t t_o = 16;
  int coord_bits = 12;
  bool layer_wise = false;      // partition across the whole layer instead of per filter
  bool alpha_all_weights = false;
  std::string model_out;
  std::string report_out;       // CSV, optional
};

struct OptimizeConfig {
  std::string net_path;
  std::string objective_cmd;    // external command; empty = built-in synthetic
  double gamma = 0.01;
  double syn_a_inf = 0.72;
  double syn_c = 0.2;
  double syn_k = 20.0;
  OptimizeSettings gp;
  std::optional<int> only_layer;  // restrict to one layer id
  std::string ratios_out;         // JSON of chosen ratios
  std::string trace_out;          // CSV; per-layer suffix when several layers run
};

struct SimulateConfig {
  std::string net_path;
  std::string plan_path;
  std::string encoded_path;   // needed by verify_conv
  bool verify_conv = false;
  int cases = 200;
  std::uint64_t seed = 0;
  int q_s = 48;               // accumulator width for the verification runs
  std::string traffic_out;    // CSV, optional
};

struct GenWeightsConfig {
  std::string net_path;
  std::string out_path;
  std::uint64_t seed = 0;
};

int cmd_dse(const DseConfig& config);
int cmd_quantize(const QuantizeConfig& config);
int cmd_optimize_sparsity(const OptimizeConfig& config);
int cmd_simulate(const SimulateConfig& config);
int cmd_gen_weights(const GenWeightsConfig& config);

// Parses "4MiB", "2MB", "512KiB", "65536" (bare numbers are bits) into bits.
std::int64_t parse_size_bits(const std::string& text);

}  // namespace mixflow

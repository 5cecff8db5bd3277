#include "mixflow/commands.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "mixflow/execsim.hpp"
#include "mixflow/quantize.hpp"
#include "mixflow/sparse_format.hpp"

namespace mixflow {

using nlohmann::json;

namespace {

bool log_quiet() {
  const char* env = std::getenv("MIXFLOW_LOG");
  return env != nullptr && std::string(env) == "quiet";
}

void info(const std::string& msg) {
  if (!log_quiet()) std::cerr << msg << "\n";
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kInvalidInput, "cannot write " + path);
  out << content;
}

int report_error(const Error& e) {
  std::cerr << "error: " << e.what() << "\n";
  return exit_code_for(e.code());
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInfeasible:
      return kExitInfeasible;
    case ErrorCode::kVerifyFailed:
      return kExitVerifyFailed;
    case ErrorCode::kInvalidInput:
    case ErrorCode::kCorruptData:
    case ErrorCode::kNumeric:
      return kExitInputError;
  }
  return kExitInputError;
}

std::int64_t parse_size_bits(const std::string& text) {
  std::size_t pos = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidInput, "cannot parse size '" + text + "'");
  }
  std::string unit = text.substr(pos);
  unit.erase(std::remove_if(unit.begin(), unit.end(), [](unsigned char c) { return std::isspace(c); }),
             unit.end());
  double bytes_factor = 0.0;  // 0 means the bare value is already bits
  if (unit.empty() || unit == "b" || unit == "bit" || unit == "bits") {
    bytes_factor = 0.0;
  } else if (unit == "B") {
    bytes_factor = 1.0;
  } else if (unit == "KiB") {
    bytes_factor = 1024.0;
  } else if (unit == "MiB") {
    bytes_factor = 1024.0 * 1024.0;
  } else if (unit == "GiB") {
    bytes_factor = 1024.0 * 1024.0 * 1024.0;
  } else if (unit == "KB") {
    bytes_factor = 1e3;
  } else if (unit == "MB") {
    bytes_factor = 1e6;
  } else if (unit == "GB") {
    bytes_factor = 1e9;
  } else {
    throw Error(ErrorCode::kInvalidInput, "unknown size unit '" + unit + "'");
  }
  const double bits = bytes_factor == 0.0 ? value : value * bytes_factor * 8.0;
  return std::int64_t(std::llround(bits));
}

int cmd_dse(const DseConfig& config) {
  try {
    const NetworkDesc net = load_network(config.net_path);
    DseBudgets budgets;
    budgets.sram_bits = config.alpha_bits;
    budgets.multipliers = config.mult_budget;
    budgets.clock_hz = config.clock_hz;
    budgets.params_on_chip = config.params_on_chip;

    const DseResult result = run_dse(net, budgets);
    const std::string csv = sweep_csv(result.rows);
    if (!config.sweep_out.empty()) {
      write_file(config.sweep_out, csv);
      info("sweep written to " + config.sweep_out);
    } else {
      std::cout << csv;
    }

    if (!result.best_plan) {
      std::cerr << "no feasible boundary under the given budgets:\n";
      for (const auto& row : result.rows)
        std::cerr << "  boundary " << row.boundary << ": " << row.binding_constraint << "\n";
      return kExitInfeasible;
    }

    std::cout << plan_summary(net, *result.best_plan, *result.best_report);
    if (!config.plan_out.empty()) {
      write_file(config.plan_out, serialize_plan(*result.best_plan));
      info("plan written to " + config.plan_out);
    }
    return kExitOk;
  } catch (const Error& e) {
    return report_error(e);
  }
}

namespace {

std::vector<LayerRatio> load_ratios(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidInput, "cannot open ratios file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidInput, std::string("ratios file is not valid JSON: ") + e.what());
  }
  if (doc.contains("ratios")) doc = doc["ratios"];
  if (!doc.is_object()) throw Error(ErrorCode::kInvalidInput, "ratios file must map layer ids to p");
  std::vector<LayerRatio> ratios;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!it.key().empty() && it.key()[0] == '_') continue;  // annotation fields
    LayerRatio r;
    r.layer_id = std::stoi(it.key());
    r.p = it.value().get<double>();
    ratios.push_back(r);
  }
  return ratios;
}

}  // namespace

int cmd_quantize(const QuantizeConfig& config) {
  try {
    const NetworkDesc net = load_network(config.net_path);
    const std::vector<WeightTensor> tensors = load_weights(config.weights_path);

    std::vector<LayerRatio> ratios;
    if (!config.ratios_path.empty()) {
      ratios = load_ratios(config.ratios_path);
    } else {
      for (const auto& layer : net.layers) {
        if (layer.is_conv() && layer.quantize) ratios.push_back({layer.id, config.uniform_ratio});
      }
    }
    const auto ratio_for = [&](int layer_id) -> double {
      for (const auto& r : ratios)
        if (r.layer_id == layer_id) return r.p;
      throw Error(ErrorCode::kInvalidInput, "no ratio for layer " + std::to_string(layer_id));
    };

    QuantizeOptions opts;
    opts.partition = config.layer_wise ? PartitionMode::kLayerWise : PartitionMode::kChannelWise;
    opts.alpha = config.alpha_all_weights ? AlphaMode::kAllWeights : AlphaMode::kSmallWeights;

    EncodedModel model;
    std::int64_t total_params = 0;
    for (const auto& layer : net.layers) total_params += layer_params(layer);

    std::ostringstream report;
    report << "layer,p,bits_per_weight,compression_contrib,nnz,n_multipliers,tree_size,sparse_bytes,dense_bytes\n";

    for (const auto& wt : tensors) {
      const LayerDesc& layer = net.layer_by_id(wt.layer_id);
      if (!layer.is_conv())
        throw Error(ErrorCode::kInvalidInput, "weights supplied for pooling layer " + std::to_string(wt.layer_id));
      if (wt.m != layer.m || wt.n != layer.n || wt.k != layer.k)
        throw Error(ErrorCode::kInvalidInput,
                    "tensor shape mismatch on layer " + std::to_string(wt.layer_id));

      if (!layer.quantize) {
        model.layers.push_back(encode_raw_layer(wt.layer_id, wt.k, wt.n, wt.m, wt.values));
        report << wt.layer_id << ",1," << net.precision.q_full << ",,,,,,"
               << std::int64_t(wt.values.size()) * 4 << "\n";
        continue;
      }

      const double p = ratio_for(wt.layer_id);
      const MixedLayerWeights mixed = quantize_layer(wt.layer_id, wt.k, wt.n, wt.filters(), p, opts);
      const EncodedLayer enc = encode(mixed, config.t_i, config.t_o, config.coord_bits);
      const KernelStats stats = kernel_stats(enc);
      char buf[200];
      std::snprintf(buf, sizeof(buf), "%d,%.6g,%.6g,%.6g,%lld,%lld,%lld,%lld,%lld\n", wt.layer_id, p,
                    1.0 + 7.0 * p, compression_rate(p, layer_params(layer), total_params),
                    static_cast<long long>(enc.nnz()), static_cast<long long>(stats.n_multipliers),
                    static_cast<long long>(stats.tree_size),
                    static_cast<long long>(enc.sparse_section_bytes()),
                    static_cast<long long>(enc.dense_section_bytes()));
      report << buf;
      model.layers.push_back(enc);
    }

    if (!config.model_out.empty()) {
      save_model(config.model_out, model);
      info("encoded model written to " + config.model_out);
    }

    const double avg = avg_bits(net, ratios);
    char line[160];
    std::snprintf(line, sizeof(line), "avg_bits %.6g\ncompression_ratio %.6g\n", avg, 32.0 / avg);
    std::cout << line;
    if (!config.report_out.empty()) {
      write_file(config.report_out, report.str());
      info("report written to " + config.report_out);
    } else {
      std::cout << report.str();
    }
    return kExitOk;
  } catch (const Error& e) {
    return report_error(e);
  }
}

int cmd_optimize_sparsity(const OptimizeConfig& config) {
  try {
    const NetworkDesc net = load_network(config.net_path);
    std::int64_t total_params = 0;
    for (const auto& layer : net.layers) total_params += layer_params(layer);

    json ratios_doc = json::object();
    bool any_abort = false;

    for (const auto& layer : net.layers) {
      if (!layer.is_conv() || !layer.quantize) continue;
      if (config.only_layer && *config.only_layer != layer.id) continue;

      Objective objective;
      if (!config.objective_cmd.empty()) {
        objective = make_external_objective(config.objective_cmd, config.gamma);
      } else {
        SyntheticObjective syn;
        syn.a_inf = config.syn_a_inf;
        syn.c = config.syn_c;
        syn.k = config.syn_k;
        syn.gamma = config.gamma;
        syn.param_share = double(layer_params(layer)) / double(total_params);
        objective = syn;
      }

      const OptimizeResult result = optimize(objective, config.gp);
      if (result.aborted) {
        std::cerr << "layer " << layer.id << ": objective failed (" << result.abort_reason
                  << "); trace holds " << result.trace.size() << " evaluations\n";
        any_abort = true;
      }
      if (!result.trace.empty()) {
        char buf[120];
        std::snprintf(buf, sizeof(buf), "layer %d: p*=%.6g L=%.6g after %zu evaluations\n", layer.id,
                      result.best_p, result.best_objective, result.trace.size());
        std::cout << buf;
        ratios_doc[std::to_string(layer.id)] = result.best_p;
      }
      if (!config.trace_out.empty()) {
        std::string path = config.trace_out;
        if (!config.only_layer) {
          const std::size_t dot = path.rfind('.');
          const std::string suffix = ".layer" + std::to_string(layer.id);
          path = dot == std::string::npos ? path + suffix
                                          : path.substr(0, dot) + suffix + path.substr(dot);
        }
        write_file(path, trace_csv(result.trace));
      }
      if (result.aborted) break;
    }

    if (!config.ratios_out.empty()) {
      write_file(config.ratios_out, ratios_doc.dump(2) + "\n");
      info("ratios written to " + config.ratios_out);
    }
    return any_abort ? kExitInputError : kExitOk;
  } catch (const Error& e) {
    return report_error(e);
  }
}

namespace {

QuantTensor random_input(std::mt19937_64& rng, int h, int w, std::int64_t c, int q_a) {
  QuantTensor t;
  t.h = h;
  t.w = w;
  t.c = c;
  t.q_a = q_a;
  const std::int32_t bound = (std::int32_t(1) << (q_a - 1)) - 1;
  std::uniform_int_distribution<std::int32_t> dist(-bound, bound);
  t.values.resize(std::size_t(std::int64_t(h) * w * c));
  for (auto& v : t.values) v = dist(rng);
  return t;
}

}  // namespace

int cmd_simulate(const SimulateConfig& config) {
  try {
    if (config.verify_conv) {
      if (config.encoded_path.empty())
        throw Error(ErrorCode::kInvalidInput, "--verify-conv needs --encoded");
      const EncodedModel model = load_model(config.encoded_path);
      std::vector<const EncodedLayer*> quantized;
      for (const auto& l : model.layers)
        if (l.quantized) quantized.push_back(&l);
      if (quantized.empty())
        throw Error(ErrorCode::kInvalidInput, "model holds no quantized layers to verify");

      std::mt19937_64 rng(config.seed);
      const FixedPointFormat fmt;
      for (int c = 0; c < config.cases; ++c) {
        const EncodedLayer& enc = *quantized[std::size_t(c) % quantized.size()];
        const int h = 6 + int(rng() % 6);
        const QuantTensor input = random_input(rng, h, h, enc.n, 8);
        const AccTensor split = mixed_conv(input, enc, 1, config.q_s, fmt);
        const FixedWeights fw = fixed_point_weights(decode(enc), fmt);
        const AccTensor direct = direct_conv(input, fw, 1, config.q_s);
        if (split.values != direct.values) {
          std::cout << "FAIL " << c << "/" << config.cases << " on layer " << enc.layer_id << "\n";
          for (std::size_t i = 0; i < split.values.size(); ++i) {
            if (split.values[i] != direct.values[i]) {
              std::cout << "first mismatch at flat index " << i << ": split=" << split.values[i]
                        << " direct=" << direct.values[i] << "\n";
              break;
            }
          }
          return kExitVerifyFailed;
        }
      }
      std::cout << "PASS " << config.cases << "/" << config.cases << "\n";
    }

    if (!config.net_path.empty() && !config.plan_path.empty()) {
      const NetworkDesc net = load_network(config.net_path);
      const TilingPlan plan = load_plan(config.plan_path);
      const TrafficReport report = traffic_sim(net, plan);
      const std::string csv = traffic_csv(report);
      if (!config.traffic_out.empty()) {
        write_file(config.traffic_out, csv);
        info("traffic counters written to " + config.traffic_out);
      } else {
        std::cout << csv;
      }
    } else if (!config.verify_conv) {
      throw Error(ErrorCode::kInvalidInput, "simulate needs --net and --plan (or --verify-conv)");
    }
    return kExitOk;
  } catch (const Error& e) {
    return report_error(e);
  }
}

int cmd_gen_weights(const GenWeightsConfig& config) {
  try {
    const NetworkDesc net = load_network(config.net_path);
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> body(0.0, 0.02);
    std::normal_distribution<double> tail(0.0, 0.2);
    std::uniform_real_distribution<double> pick(0.0, 1.0);

    std::vector<WeightTensor> tensors;
    for (const auto& layer : net.layers) {
      if (!layer.is_conv()) continue;
      WeightTensor wt;
      wt.layer_id = layer.id;
      wt.m = layer.m;
      wt.n = layer.n;
      wt.k = layer.k;
      wt.values.resize(std::size_t(layer_params(layer)));
      // Most weights sit near zero with a thin heavy tail, the shape the
      // mixed representation targets.
      for (auto& v : wt.values) v = float(pick(rng) < 0.05 ? tail(rng) : body(rng));
      tensors.push_back(std::move(wt));
    }
    save_weights(config.out_path, tensors);
    info("weights written to " + config.out_path);
    return kExitOk;
  } catch (const Error& e) {
    return report_error(e);
  }
}

}  // namespace mixflow

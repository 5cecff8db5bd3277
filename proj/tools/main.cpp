#include <CLI11.hpp>

#include "mixflow/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"mixflow: dataflow exploration and mixed-precision compression for streaming CNN accelerators"};
  app.require_subcommand(1);

  mixflow::DseConfig dse;
  std::string alpha_text = "1GiB";
  auto* cmd_dse = app.add_subcommand("dse", "sweep group boundaries and pick a tiling plan");
  cmd_dse->add_option("--net", dse.net_path, "network description JSON")->required();
  cmd_dse->add_option("--alpha", alpha_text, "SRAM budget (e.g. 4MiB, 2MB, or bits)");
  cmd_dse->add_option("--mult-budget", dse.mult_budget, "multiplier-equivalent budget");
  cmd_dse->add_option("--clock", dse.clock_hz, "clock frequency in Hz");
  cmd_dse->add_flag("--params-on-chip", dse.params_on_chip, "store group-1 weights in SRAM");
  cmd_dse->add_option("--out", dse.sweep_out, "sweep CSV path");
  cmd_dse->add_option("--plan-out", dse.plan_out, "chosen plan JSON path");

  mixflow::QuantizeConfig quant;
  auto* cmd_quant = app.add_subcommand("quantize", "mixed 1-bit/8-bit weight quantization and encoding");
  cmd_quant->add_option("--net", quant.net_path, "network description JSON")->required();
  cmd_quant->add_option("--weights", quant.weights_path, "MPQW weight tensor file")->required();
  cmd_quant->add_option("--ratios", quant.ratios_path, "JSON mapping layer id to p");
  cmd_quant->add_option("--ratio", quant.uniform_ratio, "uniform p when no ratios file is given");
  cmd_quant->add_option("--tile-i", quant.t_i, "input-channel tile of the sparse blocks");
  cmd_quant->add_option("--tile-o", quant.t_o, "output-channel tile of the sparse blocks");
  cmd_quant->add_option("--coord-bits", quant.coord_bits, "coordinate width per sparse entry");
  cmd_quant->add_flag("--layer-wise", quant.layer_wise, "partition across the layer instead of per filter");
  cmd_quant->add_flag("--alpha-all-weights", quant.alpha_all_weights, "average alpha over all weights");
  cmd_quant->add_option("--out", quant.model_out, "encoded model (MPQE) path");
  cmd_quant->add_option("--report", quant.report_out, "per-layer report CSV path");

  mixflow::OptimizeConfig opt;
  int only_layer = -1;
  auto* cmd_opt = app.add_subcommand("optimize-sparsity", "GP-UCB search for per-layer ratios");
  cmd_opt->add_option("--net", opt.net_path, "network description JSON")->required();
  cmd_opt->add_option("--objective-cmd", opt.objective_cmd,
                      "command reading p on stdin, printing L (or 'mAP C') on stdout");
  cmd_opt->add_option("--gamma", opt.gamma, "compression weight in the objective");
  cmd_opt->add_option("--syn-a", opt.syn_a_inf, "synthetic objective: accuracy ceiling");
  cmd_opt->add_option("--syn-c", opt.syn_c, "synthetic objective: accuracy drop at p=0");
  cmd_opt->add_option("--syn-k", opt.syn_k, "synthetic objective: recovery rate");
  cmd_opt->add_option("--iters", opt.gp.iterations, "objective evaluations per layer");
  cmd_opt->add_option("--gp-length-scale", opt.gp.kernel.length_scale, "kernel length scale");
  cmd_opt->add_option("--gp-sigma-f", opt.gp.kernel.sigma_f, "kernel amplitude");
  cmd_opt->add_option("--gp-noise", opt.gp.noise, "observation noise floor");
  cmd_opt->add_option("--gp-omega", opt.gp.omega, "UCB exploration weight");
  cmd_opt->add_flag("--gp-omega-schedule", opt.gp.omega_schedule, "grow omega with the iteration count");
  cmd_opt->add_option("--seed", opt.gp.seed, "random seed");
  cmd_opt->add_option("--layer", only_layer, "optimize a single layer id");
  cmd_opt->add_option("--ratios-out", opt.ratios_out, "chosen ratios JSON path");
  cmd_opt->add_option("--trace-out", opt.trace_out, "trace CSV path (suffixed per layer)");

  mixflow::SimulateConfig sim;
  auto* cmd_sim = app.add_subcommand("simulate", "loop-nest traffic counters and conv bit-exactness checks");
  cmd_sim->add_option("--net", sim.net_path, "network description JSON");
  cmd_sim->add_option("--plan", sim.plan_path, "tiling plan JSON");
  cmd_sim->add_option("--encoded", sim.encoded_path, "encoded model for --verify-conv");
  cmd_sim->add_flag("--verify-conv", sim.verify_conv, "check split kernels against direct convolution");
  cmd_sim->add_option("--cases", sim.cases, "number of randomized verification cases");
  cmd_sim->add_option("--seed", sim.seed, "random seed");
  cmd_sim->add_option("--q-s", sim.q_s, "accumulator width for verification");
  cmd_sim->add_option("--out", sim.traffic_out, "traffic CSV path");

  mixflow::GenWeightsConfig gen;
  auto* cmd_gen = app.add_subcommand("gen-weights", "synthesize a deterministic MPQW weight file");
  cmd_gen->add_option("--net", gen.net_path, "network description JSON")->required();
  cmd_gen->add_option("--out", gen.out_path, "MPQW output path")->required();
  cmd_gen->add_option("--seed", gen.seed, "random seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_dse->parsed()) {
      dse.alpha_bits = mixflow::parse_size_bits(alpha_text);
      return mixflow::cmd_dse(dse);
    }
    if (cmd_quant->parsed()) return mixflow::cmd_quantize(quant);
    if (cmd_opt->parsed()) {
      if (only_layer >= 0) opt.only_layer = only_layer;
      return mixflow::cmd_optimize_sparsity(opt);
    }
    if (cmd_sim->parsed()) return mixflow::cmd_simulate(sim);
    if (cmd_gen->parsed()) return mixflow::cmd_gen_weights(gen);
  } catch (const mixflow::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return mixflow::exit_code_for(e.code());
  }
  return mixflow::kExitInputError;
}

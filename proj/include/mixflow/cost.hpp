#pragma once

#include <cstdint>

#include "mixflow/net.hpp"
#include "mixflow/plan.hpp"
#include "mixflow/rational.hpp"

namespace mixflow {

enum class BufferGroup { kPipelined, kMain };

// On-chip buffer sizes of one layer, in bits. A pipelined layer owns a row
// buffer of k+1 input rows and a line-sized partial-sum buffer; a main-group
// layer needs whole input/output frames. Pooling layers carry no modeled
// buffers.
struct BufferSizes {
  std::int64_t row_buff = 0;
  std::int64_t line_out_buff = 0;
  std::int64_t in_frame_buff = 0;
  std::int64_t frame_out_buff = 0;
  std::int64_t shortcut_buff = 0;
  std::int64_t param_store = 0;
};

BufferSizes buffer_sizes(const NetworkDesc& net, const LayerDesc& layer, std::int64_t t_o,
                         BufferGroup group);

// Total on-chip bits for boundary i under the given plan: the pipelined
// layers' row/line buffers (plus their weights when params_on_chip), a
// triple-buffered input frame sized for the worst main-group layer, the worst
// shortcut frame, and the worst output frame.
std::int64_t sram_size(const NetworkDesc& net, const TilingPlan& plan);

// Off-chip bytes per frame. Pipelined layers re-read their weights once per
// output row; main-group layers read them once. On-chip parameters drop the
// pipelined term entirely. Input-image and final-output traffic is excluded.
std::int64_t dram_access(const NetworkDesc& net, int boundary, bool params_on_chip);

// Cycles of one conv layer at parallelism pf, kept exact.
Rational layer_time(const LayerDesc& layer, const Rational& pf);

struct GroupTimes {
  Rational t_g1;
  Rational t_g2;
};

// Group 1 time is the boundary layer's full time plus the per-layer pipeline
// fill delays (delay_rows times that layer's output-row period); group 2 runs
// its layers back to back.
GroupTimes group_times(const NetworkDesc& net, const TilingPlan& plan);

// Multiplier-equivalent accounting. Dense kernels cost k^2 * pf weighted per
// weight bit width (binary weights need no multipliers); sparse kernels add
// their multiplier-array sizes.
struct MultiplierModel {
  double weight_binary = 0.0;  // applied when the dense width is 1 bit
  double weight_other = 1.0;

  double weight_for_bits(int bits) const { return bits <= 1 ? weight_binary : weight_other; }
};

double multiplier_count(const NetworkDesc& net, const TilingPlan& plan,
                        const MultiplierModel& model = MultiplierModel{});

struct CostReport {
  int boundary = 0;
  std::int64_t sram_bits = 0;
  std::int64_t dram_bytes = 0;
  Rational t_g1;
  Rational t_g2;
  double frame_rate = 0.0;  // at the clock the report was built with
  double multipliers = 0.0;
};

CostReport cost_report(const NetworkDesc& net, const TilingPlan& plan, double clock_hz,
                       const MultiplierModel& model = MultiplierModel{});

}  // namespace mixflow

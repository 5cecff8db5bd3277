#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <json.hpp>

#include "mixflow/net.hpp"
#include "mixflow/quantize.hpp"

using namespace mixflow;

namespace {

FilterWeights make_filter(std::vector<float> values) {
  FilterWeights f;
  f.k = 1;
  f.n = std::int64_t(values.size());
  f.values = std::move(values);
  return f;
}

FilterWeights random_filter(std::mt19937_64& rng, int k, std::int64_t n) {
  FilterWeights f;
  f.k = k;
  f.n = n;
  std::normal_distribution<double> body(0.0, 0.02);
  std::normal_distribution<double> tail(0.0, 0.3);
  std::uniform_real_distribution<double> pick(0.0, 1.0);
  f.values.resize(std::size_t(k) * k * std::size_t(n));
  for (auto& v : f.values) v = float(pick(rng) < 0.05 ? tail(rng) : body(rng));
  return f;
}

double reconstruction_error(const FilterWeights& original, const std::vector<float>& effective) {
  double err = 0.0;
  for (std::size_t i = 0; i < original.values.size(); ++i) {
    const double d = double(original.values[i]) - double(effective[i]);
    err += d * d;
  }
  return err;
}

}  // namespace

TEST_CASE("partition boundaries") {
  const FilterWeights f = make_filter({0.5f, -0.3f, 0.1f, 0.05f});
  const FilterPartition none = partition_filter(f, 0.0);
  CHECK(none.large_positions.empty());
  CHECK(none.small_positions.size() == 4);

  const FilterPartition all = partition_filter(f, 1.0);
  CHECK(all.large_positions.size() == 4);
  CHECK(all.small_positions.empty());

  const FilterPartition half = partition_filter(f, 0.5);
  REQUIRE(half.large_positions.size() == 2);
  CHECK(half.large_positions[0] == 0);
  CHECK(half.large_positions[1] == 1);
}

TEST_CASE("partition covers every position exactly once") {
  std::mt19937_64 rng(3);
  for (int it = 0; it < 50; ++it) {
    const FilterWeights f = random_filter(rng, 3, 4);
    const double p = double(rng() % 101) / 100.0;
    const FilterPartition part = partition_filter(f, p);
    CHECK(std::int64_t(part.large_positions.size()) ==
          std::int64_t(std::ceil(p * double(f.size()) - 1e-12)));
    std::vector<bool> seen(f.values.size(), false);
    for (auto pos : part.large_positions) seen[std::size_t(pos)] = true;
    for (auto pos : part.small_positions) {
      CHECK_FALSE(seen[std::size_t(pos)]);
      seen[std::size_t(pos)] = true;
    }
    for (bool s : seen) CHECK(s);
  }
}

TEST_CASE("magnitude ties break toward the lower position") {
  const FilterWeights f = make_filter({0.2f, -0.2f, 0.2f, 0.1f});
  const FilterPartition part = partition_filter(f, 0.5);
  CHECK(part.large_positions == std::vector<std::int32_t>{0, 1});
}

TEST_CASE("constant positive filter binarizes exactly at p=0") {
  const FilterWeights f = make_filter({0.25f, 0.25f, 0.25f});
  const MixedLayerWeights layer = quantize_layer(1, 1, 3, {f}, 0.0);
  CHECK(layer.filters[0].alpha == doctest::Approx(0.25));
  CHECK(layer.filters[0].residuals.empty());
  const auto w = reconstruct_filter(layer, 0);
  for (float v : w) CHECK(v == doctest::Approx(0.25));
  CHECK(reconstruction_error(f, w) == doctest::Approx(0.0));
}

TEST_CASE("p=1 zeroes alpha and carries everything in residuals") {
  const FilterWeights f = make_filter({0.5f, -0.25f});
  const MixedLayerWeights layer = quantize_layer(1, 1, 2, {f}, 1.0);
  CHECK(layer.filters[0].alpha == 0.0f);
  REQUIRE(layer.filters[0].residuals.size() == 2);
  const auto w = reconstruct_filter(layer, 0);
  CHECK(w[0] == doctest::Approx(0.5).epsilon(0.01));
  CHECK(w[1] == doctest::Approx(-0.25).epsilon(0.01));
}

TEST_CASE("worked mixed example: one dominant weight") {
  const FilterWeights f = make_filter({1.0f, 0.1f, -0.1f, 0.1f, 0.1f});
  const FilterQuantization q = quantize_filter(f, 0.2);
  REQUIRE(q.large_positions.size() == 1);
  CHECK(q.large_positions[0] == 0);
  CHECK(q.alpha == doctest::Approx(0.1));
  CHECK(q.residuals[0] == doctest::Approx(0.9));

  const MixedLayerWeights layer = quantize_layer(1, 1, 5, {f}, 0.2);
  CHECK(layer.s_r == doctest::Approx(0.9 / 127.0));
  const auto w = reconstruct_filter(layer, 0);
  CHECK(w[0] == doctest::Approx(0.1 + (0.9 / 127.0) * 127.0));
}

TEST_CASE("all-zero filter is allowed") {
  const FilterWeights f = make_filter({0.0f, 0.0f});
  const MixedLayerWeights layer = quantize_layer(1, 1, 2, {f}, 0.5);
  CHECK(layer.filters[0].alpha == 0.0f);
  const auto w = reconstruct_filter(layer, 0);
  CHECK(w[0] == 0.0f);
}

TEST_CASE("alpha over all weights is selectable") {
  const FilterWeights f = make_filter({1.0f, 0.1f, -0.1f, 0.1f, 0.1f});
  QuantizeOptions opts;
  opts.alpha = AlphaMode::kAllWeights;
  const MixedLayerWeights layer = quantize_layer(1, 1, 5, {f}, 0.2, opts);
  CHECK(layer.filters[0].alpha == doctest::Approx(1.4 / 5.0));
}

TEST_CASE("error does not grow with the ratio beyond quantization noise") {
  std::mt19937_64 rng(11);
  for (int it = 0; it < 30; ++it) {
    const FilterWeights f = random_filter(rng, 3, 8);
    const double p_lo = 0.05 + double(rng() % 20) / 100.0;
    const double p_hi = p_lo + double(rng() % 30) / 100.0;

    // Fix one shared scale across both ratios so the noise bound applies.
    const float s_r = std::max(quantize_layer(1, 3, 8, {f}, p_lo).s_r,
                               quantize_layer(1, 3, 8, {f}, p_hi).s_r);
    const auto requant = [&](double p) {
      MixedLayerWeights l = quantize_layer(1, 3, 8, {f}, p);
      const FilterQuantization q = quantize_filter(f, p);
      l.s_r = s_r;
      l.filters[0].residuals.clear();
      for (std::size_t i = 0; i < q.large_positions.size(); ++i) {
        const double v = std::clamp(std::round(q.residuals[i] / s_r), -127.0, 127.0);
        l.filters[0].residuals.push_back({q.large_positions[i], std::int8_t(v)});
      }
      return l;
    };
    const MixedLayerWeights a = requant(p_lo);
    const MixedLayerWeights b = requant(p_hi);
    const double err_a = reconstruction_error(f, reconstruct_filter(a, 0));
    const double err_b = reconstruction_error(f, reconstruct_filter(b, 0));
    const double noise = double(b.filters[0].residuals.size()) * (s_r / 2.0) * (s_r / 2.0);
    CHECK(err_b <= err_a + noise + 1e-9);
  }
}

TEST_CASE("compression rate worked values") {
  CHECK(compression_rate(0.0, 100, 100) == doctest::Approx(32.0));
  CHECK(compression_rate(1.0, 100, 100) == doctest::Approx(4.0));
  CHECK(compression_rate(0.05, 100, 100) == doctest::Approx(32.0 / 1.35));
  CHECK(compression_rate(0.5, 25, 100) == doctest::Approx(32.0 / 4.5 * 0.25));
}

TEST_CASE("average bits across a network") {
  const std::string doc = R"({
    "name": "avg",
    "input": {"h": 8, "c": 4},
    "layers": [
      {"id": 1, "kind": "conv", "k": 3, "out_channels": 8},
      {"id": 2, "kind": "conv", "k": 3, "out_channels": 8}
    ]
  })";
  const NetworkDesc net = parse_network(doc);
  CHECK(avg_bits(net, {{1, 0.0}, {2, 0.0}}) == doctest::Approx(1.0));
  CHECK(avg_bits(net, {{1, 1.0}, {2, 1.0}}) == doctest::Approx(8.0));
  CHECK(avg_bits(net, {{1, 0.0}, {2, 1.0}}) ==
        doctest::Approx((1.0 * 288 + 8.0 * 576) / (288 + 576)));
}

TEST_CASE("the published per-layer ratios land on 1.148 bits") {
  const NetworkDesc net = load_network(std::string(MIXFLOW_DATA_DIR) + "/simyolov2.json");
  std::vector<LayerRatio> ratios;
  {
    std::ifstream in(std::string(MIXFLOW_DATA_DIR) + "/simyolov2_proposed_ratios.json");
    REQUIRE(in.good());
    nlohmann::json doc;
    in >> doc;
    for (auto it = doc.begin(); it != doc.end(); ++it)
      ratios.push_back({std::stoi(it.key()), it.value().get<double>()});
  }
  // The published table counts its ratio-1 first/last rows at 1+7p = 8 bits.
  const double avg = avg_bits(net, ratios, UnquantizedBits::kRatioOne);
  CHECK(avg == doctest::Approx(1.148).epsilon(0.01 / 1.148));
  // A uniform 0.05 ratio lands on the published 1.408 the same way.
  std::vector<LayerRatio> uniform;
  for (const auto& l : net.layers) {
    if (l.is_conv() && l.quantize) uniform.push_back({l.id, 0.05});
  }
  CHECK(avg_bits(net, uniform, UnquantizedBits::kRatioOne) ==
        doctest::Approx(1.408).epsilon(0.001));
}

TEST_CASE("objective combines accuracy and compression") {
  CHECK(objective(0.7, 0.0, 99.0) == doctest::Approx(0.7));
  CHECK(objective(0.71, 0.01, 23.7) == doctest::Approx(0.947));
  CHECK(objective(0.5, 0.01, 0.0) == doctest::Approx(0.5));
}

TEST_CASE("weight tensor files round-trip") {
  std::mt19937_64 rng(17);
  std::vector<WeightTensor> tensors;
  WeightTensor wt;
  wt.layer_id = 3;
  wt.m = 4;
  wt.n = 2;
  wt.k = 3;
  wt.values.resize(std::size_t(4 * 2 * 9));
  std::normal_distribution<float> dist(0.0f, 1.0f);
  for (auto& v : wt.values) v = dist(rng);
  tensors.push_back(wt);

  const std::string path = "test_weights_tmp.mpqw";
  save_weights(path, tensors);
  const auto loaded = load_weights(path);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].layer_id == 3);
  CHECK(loaded[0].values == tensors[0].values);
  std::remove(path.c_str());
}

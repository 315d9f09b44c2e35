#include <doctest.h>

#include <cmath>

#include "cost_cases.hpp"
#include "hwnas/errors.hpp"
#include "hwnas/genotype.hpp"
#include "hwnas/hw_model.hpp"
#include "oracles.hpp"

using namespace hwnas;

TEST_CASE("shape parameters") {
  const auto conv = layer_shape_params({LayerType::Conv, 28, 1, 1, 3, 1, 26, 8, 1});
  CHECK(conv.weights == 72);
  CHECK(conv.summands == 9);
  CHECK(conv.maps_per_weight == 676);

  const auto caps = layer_shape_params({LayerType::FullyConnectedCapsule, 1, 32, 8, 1, 1, 1, 10, 16});
  CHECK(caps.weights == 40960);
  CHECK(caps.summands == 256);
  CHECK(caps.maps_per_weight == 1);

  const auto one = layer_shape_params({LayerType::Conv, 1, 1, 1, 1, 1, 1, 1, 1});
  CHECK(one.weights == 1);
  CHECK(one.summands == 1);
}

TEST_CASE("weight load groups") {
  CHECK(weight_load_groups(1000, 9) == 7);
  CHECK(weight_load_groups(256, 16) == 1);
  CHECK(weight_load_groups(1, 1) == 1);
  CHECK(weight_load_groups(257, 16) == 2);
  CHECK(weight_load_groups(100, 40) == 1);
  // A 8x4 array: ceil(100 / (8 * min(4, 9))) = 4.
  CHECK(weight_load_groups(100, 9, 8, 4) == 4);
}

TEST_CASE("memory accesses") {
  CHECK(memory_accesses(9, 1) == 256);
  CHECK(memory_accesses(5000, 1) == 256);
  CHECK(memory_accesses(10, 4) == 16);
  CHECK(memory_accesses(20, 4) == 80);
  CHECK(memory_accesses(16, 4) == 16);
  CHECK(memory_accesses(17, 4) == 32);
}

TEST_CASE("layer cycles") {
  CHECK(layer_cycles(144, 1, 100) == 244);
  CHECK(layer_cycles(1000, 7, 676) == 7676);
  CHECK(layer_cycles(0, 0, 0) == 0);
}

TEST_CASE("per-layer costs match the arithmetic oracle") {
  const HardwareConfig hw;
  for (const auto& d : cost_cases::descriptors()) {
    const auto got = layer_cost(d, hw);
    const auto want = oracle::layer(d);
    CHECK(got.shape.weights == static_cast<std::uint64_t>(want.w));
    CHECK(got.shape.summands == static_cast<std::uint64_t>(want.s));
    CHECK(got.shape.maps_per_weight == static_cast<std::uint64_t>(want.f));
    CHECK(got.weight_load_groups == static_cast<std::uint64_t>(want.w_pe));
    CHECK(got.memory_accesses == static_cast<std::uint64_t>(want.m_acc));
    CHECK(got.cycles == static_cast<std::uint64_t>(want.c));
  }
}

TEST_CASE("latency of two layers") {
  const std::vector<LayerDescriptor> layers{{LayerType::Conv, 12, 1, 1, 3, 1, 10, 16, 1},
                                            {LayerType::Conv, 86, 5, 1, 1, 1, 86, 28, 1}};
  const HardwareConfig hw;
  const auto cost = estimate_layers(layers, hw);
  REQUIRE(cost.per_layer.size() == 2);
  CHECK(cost.per_layer[0].cycles == 244);
  CHECK(cost.per_layer[1].cycles == 7676);
  CHECK(cost.total_cycles == 7920);
  CHECK(cost.latency_ms == doctest::Approx(0.02376).epsilon(1e-12));
}

TEST_CASE("zero power and access energy give zero energy") {
  HardwareConfig hw;
  hw.pe_power_mw = 0;
  hw.mem_access_energy_pj = 0;
  const std::vector<LayerDescriptor> one{{LayerType::Conv, 1, 1, 1, 1, 1, 1, 1, 1}};
  const auto cost = estimate_layers(one, hw);
  CHECK(cost.energy_mj == 0.0);
  CHECK(cost.total_weights == 1);
  CHECK(cost.memory_mib * 1024 * 1024 == 4.0);
}

TEST_CASE("network totals of the bundled fixture") {
  // 28 -> conv 5x5 (40) -> conv 5x5/2 (9) -> 10 class capsules of 10.
  // Per layer (w, w_pe, m_acc, c): (1000, 4, 160, 4576), (9000, 36, 15760, 324100),
  // (90000, 352, 256, 31680001).
  const std::vector<LayerDescriptor> layers{
      {LayerType::Conv, 28, 1, 1, 5, 1, 24, 40, 1},
      {LayerType::Conv, 24, 40, 1, 5, 2, 10, 9, 1},
      {LayerType::FullyConnectedCapsule, 10, 9, 1, 10, 1, 1, 10, 10}};
  HardwareConfig hw;
  hw.pe_power_mw = 250;
  hw.mem_access_energy_pj = 1000;
  const auto cost = estimate_layers(layers, hw);
  CHECK(cost.total_cycles == 32008677);
  CHECK(cost.total_weights == 100000);
  CHECK(cost.latency_ms == doctest::Approx(96.026031).epsilon(1e-12));
  // (2 + 124 + 2) transactions * 1000 pJ + 32008677 * 3 ns * 250 mW
  CHECK(cost.energy_mj == doctest::Approx(24.00663575).epsilon(1e-12));
  CHECK(cost.memory_mib == doctest::Approx(400000.0 / 1048576.0).epsilon(1e-15));
}

TEST_CASE("totals are sums of the oracle layers") {
  HardwareConfig hw;
  hw.pe_power_mw = 123.5;
  hw.mem_access_energy_pj = 17.25;
  hw.clock_period_ns = 2.5;
  hw.bytes_per_weight = 2;
  const auto layers = cost_cases::descriptors();
  const auto cost = estimate_layers(layers, hw);
  double cycles = 0, transactions = 0, weights = 0;
  for (const auto& d : layers) {
    const auto o = oracle::layer(d);
    cycles += static_cast<double>(o.c);
    transactions += static_cast<double>(oracle::ceil_div(o.m_acc, 128));
    weights += static_cast<double>(o.w);
  }
  CHECK(cost.latency_ms == doctest::Approx(cycles * 2.5e-6).epsilon(1e-12));
  CHECK(cost.energy_mj ==
        doctest::Approx((transactions * 17.25 + cycles * 2.5 * 123.5) * 1e-9).epsilon(1e-12));
  CHECK(cost.memory_mib == doctest::Approx(weights * 2 / 1048576.0).epsilon(1e-12));
}

TEST_CASE("more output channels never cost less") {
  const SearchSpace space;
  HardwareConfig hw;
  hw.pe_power_mw = 1;
  hw.mem_access_energy_pj = 1;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto g = random_genotype(space, seed);
    const auto base = estimate(g, hw);
    for (std::size_t l = 0; l + 1 < g.layers.size(); ++l) {
      if (g.layers[l].out_channels >= space.channel_range.hi) continue;
      auto h = g;
      h.layers[l].out_channels += 1;
      h.layers[l + 1].in_channels += 1;
      const auto more = estimate(h, hw);
      CHECK(more.memory_mib >= base.memory_mib);
      CHECK(more.latency_ms >= base.latency_ms);
    }
  }
}

TEST_CASE("estimates are deterministic") {
  const SearchSpace space;
  const HardwareConfig hw;
  const auto g = random_genotype(space, 5);
  CHECK(estimate(g, hw) == estimate(g, hw));
}

TEST_CASE("absurd layers overflow instead of wrapping") {
  const LayerDescriptor huge{LayerType::FullyConnected, 1 << 20, 1 << 20, 1 << 20, 1, 1, 1, 1 << 20, 1};
  CHECK_THROWS_AS(layer_shape_params(huge), OverflowError);
  // w = 2^36 and w_pe = 2^28, so the cycle count is exactly 2^64.
  const LayerDescriptor big{LayerType::FullyConnected, 64, 64, 64, 64, 1, 1, 64, 64};
  CHECK_THROWS_AS(layer_cost(big, HardwareConfig{}), OverflowError);
}

TEST_CASE("hardware configuration checks") {
  HardwareConfig hw;
  CHECK_NOTHROW(hw.check());
  hw.clock_period_ns = 0;
  CHECK_THROWS_AS(hw.check(), ConfigError);
  hw = {};
  hw.pe_rows = 0;
  CHECK_THROWS_AS(hw.check(), ConfigError);
  hw = {};
  hw.pe_power_mw = -1;
  CHECK_THROWS_AS(hw.check(), ConfigError);
}

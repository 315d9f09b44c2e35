#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hwnas/genotype.hpp"

namespace hwnas {

/// Accelerator constants. Power and per-access energy come from synthesis
/// and memory-modeling tools and must be supplied by the caller.
struct HardwareConfig {
  double clock_period_ns = 3.0;
  double pe_power_mw = 0.0;
  double mem_access_energy_pj = 0.0;
  std::uint64_t load_weights_cycles = 0;  // listed for completeness; unused by the cost equations
  std::uint64_t pe_rows = 16;
  std::uint64_t pe_cols = 16;
  double bytes_per_weight = 4.0;

  /// Throws ConfigError unless all fields are strictly positive
  /// (power and access energy may be zero).
  void check() const;

  friend bool operator==(const HardwareConfig&, const HardwareConfig&) = default;
};

/// Accesses folded into one memory transaction in the energy term.
inline constexpr std::uint64_t kAccessesPerTransaction = 128;

struct ShapeParams {
  std::uint64_t weights = 0;            // w_l
  std::uint64_t summands = 0;           // s_l
  std::uint64_t maps_per_weight = 0;    // f_l

  friend bool operator==(const ShapeParams&, const ShapeParams&) = default;
};

struct LayerCost {
  ShapeParams shape;
  std::uint64_t weight_load_groups = 0;  // w_PEarray
  std::uint64_t memory_accesses = 0;     // m_acc
  std::uint64_t cycles = 0;              // c_l

  friend bool operator==(const LayerCost&, const LayerCost&) = default;
};

struct NetworkCost {
  double latency_ms = 0.0;
  double energy_mj = 0.0;
  double memory_mib = 0.0;
  std::uint64_t total_cycles = 0;
  std::uint64_t total_weights = 0;
  std::vector<LayerCost> per_layer;

  friend bool operator==(const NetworkCost&, const NetworkCost&) = default;
};

/// Weight count, summands per output and feature maps per weight of one
/// layer. Throws OverflowError if a product leaves the 64-bit range.
ShapeParams layer_shape_params(const LayerDescriptor& d);

/// ceil(w / (rows * min(cols, s))).
std::uint64_t weight_load_groups(std::uint64_t weights, std::uint64_t summands,
                                 std::uint64_t pe_rows = 16, std::uint64_t pe_cols = 16);

/// rows*cols when every weight feeds one feature map, otherwise
/// cols * max(s - (rows - 1), 1). With a 16x16 array: 256 / 16*max(s-15, 1).
std::uint64_t memory_accesses(std::uint64_t summands, std::uint64_t maps_per_weight,
                              std::uint64_t pe_rows = 16, std::uint64_t pe_cols = 16);

/// c = w * w_PEarray + f.
std::uint64_t layer_cycles(std::uint64_t weights, std::uint64_t weight_load_groups,
                           std::uint64_t maps_per_weight);

LayerCost layer_cost(const LayerDescriptor& d, const HardwareConfig& hw);

NetworkCost estimate_layers(std::span<const LayerDescriptor> layers, const HardwareConfig& hw);

inline NetworkCost estimate(const Genotype& g, const HardwareConfig& hw) {
  return estimate_layers(g.layers, hw);
}

}  // namespace hwnas

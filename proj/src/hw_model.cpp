#include "hwnas/hw_model.hpp"

#include <algorithm>
#include <string>

#include "hwnas/errors.hpp"

namespace hwnas {

namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_mul_overflow(a, b, &r))
    throw OverflowError("layer cost exceeds 64-bit range");
  return r;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_add_overflow(a, b, &r))
    throw OverflowError("layer cost exceeds 64-bit range");
  return r;
}

std::uint64_t positive(int v, const char* field) {
  if (v < 1) throw OverflowError(std::string("layer field '") + field + "' must be positive");
  return static_cast<std::uint64_t>(v);
}

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return a / b + (a % b != 0); }

}  // namespace

void HardwareConfig::check() const {
  if (!(clock_period_ns > 0.0)) throw ConfigError("clock_period_ns must be > 0");
  if (!(pe_power_mw >= 0.0)) throw ConfigError("pe_power_mw must be >= 0");
  if (!(mem_access_energy_pj >= 0.0)) throw ConfigError("mem_access_energy_pj must be >= 0");
  if (pe_rows == 0 || pe_cols == 0) throw ConfigError("PE array dimensions must be > 0");
  if (!(bytes_per_weight > 0.0)) throw ConfigError("bytes_per_weight must be > 0");
}

ShapeParams layer_shape_params(const LayerDescriptor& d) {
  const auto in_depth =
      checked_mul(positive(d.in_channels, "in_channels"), positive(d.in_capsules, "in_capsules"));
  const auto out_depth = checked_mul(positive(d.out_channels, "out_channels"),
                                     positive(d.out_capsules, "out_capsules"));
  ShapeParams p;
  if (is_conv_type(d.type)) {
    const auto k = positive(d.kernel_size, "kernel_size");
    const auto ofm = positive(d.ofm_size, "ofm_size");
    p.summands = checked_mul(checked_mul(k, k), in_depth);
    p.maps_per_weight = checked_mul(ofm, ofm);
  } else {
    const auto ifm = positive(d.ifm_size, "ifm_size");
    p.summands = checked_mul(checked_mul(ifm, ifm), in_depth);
    p.maps_per_weight = 1;
  }
  p.weights = checked_mul(p.summands, out_depth);
  return p;
}

std::uint64_t weight_load_groups(std::uint64_t weights, std::uint64_t summands,
                                 std::uint64_t pe_rows, std::uint64_t pe_cols) {
  return ceil_div(weights, checked_mul(pe_rows, std::min(pe_cols, summands)));
}

std::uint64_t memory_accesses(std::uint64_t summands, std::uint64_t maps_per_weight,
                              std::uint64_t pe_rows, std::uint64_t pe_cols) {
  if (maps_per_weight == 1) return checked_mul(pe_rows, pe_cols);
  const std::uint64_t excess = summands > pe_rows - 1 ? summands - (pe_rows - 1) : 0;
  return checked_mul(pe_cols, std::max<std::uint64_t>(excess, 1));
}

std::uint64_t layer_cycles(std::uint64_t weights, std::uint64_t weight_load_groups,
                           std::uint64_t maps_per_weight) {
  return checked_add(checked_mul(weights, weight_load_groups), maps_per_weight);
}

LayerCost layer_cost(const LayerDescriptor& d, const HardwareConfig& hw) {
  LayerCost c;
  c.shape = layer_shape_params(d);
  c.weight_load_groups =
      weight_load_groups(c.shape.weights, c.shape.summands, hw.pe_rows, hw.pe_cols);
  c.memory_accesses =
      memory_accesses(c.shape.summands, c.shape.maps_per_weight, hw.pe_rows, hw.pe_cols);
  c.cycles = layer_cycles(c.shape.weights, c.weight_load_groups, c.shape.maps_per_weight);
  return c;
}

NetworkCost estimate_layers(std::span<const LayerDescriptor> layers, const HardwareConfig& hw) {
  NetworkCost out;
  std::uint64_t transactions = 0;
  for (const auto& d : layers) {
    auto c = layer_cost(d, hw);
    out.total_cycles = checked_add(out.total_cycles, c.cycles);
    out.total_weights = checked_add(out.total_weights, c.shape.weights);
    transactions = checked_add(transactions, ceil_div(c.memory_accesses, kAccessesPerTransaction));
    out.per_layer.push_back(c);
  }
  // ns * mW = pJ
  const double cycles = static_cast<double>(out.total_cycles);
  const double energy_pj = static_cast<double>(transactions) * hw.mem_access_energy_pj +
                           cycles * hw.clock_period_ns * hw.pe_power_mw;
  out.latency_ms = cycles * hw.clock_period_ns * 1e-6;
  out.energy_mj = energy_pj * 1e-9;
  out.memory_mib =
      static_cast<double>(out.total_weights) * hw.bytes_per_weight / (1024.0 * 1024.0);
  return out;
}

}  // namespace hwnas

#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hwnas/rng.hpp"

namespace hwnas {

enum class LayerType { Conv, ConvCapsule, FullyConnected, FullyConnectedCapsule };

constexpr bool is_conv_type(LayerType t) {
  return t == LayerType::Conv || t == LayerType::ConvCapsule;
}
constexpr bool is_capsule_type(LayerType t) {
  return t == LayerType::ConvCapsule || t == LayerType::FullyConnectedCapsule;
}

std::string_view to_string(LayerType t);
LayerType layer_type_from_string(std::string_view s);

/// One position of the architecture encoding. Capsule counts are capsule
/// dimensions; they are 1 for plain Conv / FC layers.
struct LayerDescriptor {
  LayerType type = LayerType::Conv;
  int ifm_size = 1;
  int in_channels = 1;
  int in_capsules = 1;
  int kernel_size = 1;
  int stride = 1;
  int ofm_size = 1;
  int out_channels = 1;
  int out_capsules = 1;

  friend bool operator==(const LayerDescriptor&, const LayerDescriptor&) = default;
};

/// Output of layer `source` is added to the input of layer `destination`.
struct SkipConnection {
  int source = 0;
  int destination = 0;

  friend auto operator<=>(const SkipConnection&, const SkipConnection&) = default;
};

struct Genotype {
  std::vector<LayerDescriptor> layers;
  std::set<SkipConnection> skip_connections;
  int input_resize = 1;

  friend bool operator==(const Genotype&, const Genotype&) = default;
};

struct IntRange {
  int lo = 1;
  int hi = 1;

  bool contains(int v) const { return v >= lo && v <= hi; }
  int clamp(int v) const { return v < lo ? lo : (v > hi ? hi : v); }
  int size() const { return hi - lo + 1; }
};

struct SearchSpace {
  std::vector<int> kernel_choices{3, 5, 9};
  std::vector<int> stride_choices{1, 2};
  IntRange channel_range{1, 64};
  IntRange capsule_range{1, 64};
  int min_layers = 2;
  int max_layers = 10;
  int num_classes = 10;
  int input_size = 28;
  int input_channels = 1;

  /// Throws ConfigError on empty ranges or inconsistent bounds.
  void check() const;
};

/// Valid ("no padding") convolution geometry. May return < 1.
constexpr int conv_output_size(int ifm, int kernel, int stride) {
  if (ifm < kernel) return 0;
  return (ifm - kernel) / stride + 1;
}

/// Throws UnsatisfiableSpace when no valid chain exists.
Genotype random_genotype(const SearchSpace& space, std::uint64_t seed);

struct Offspring {
  std::optional<Genotype> first;
  std::optional<Genotype> second;
};

/// Suffix swap at independently drawn split points in [1, len-1].
Offspring crossover(const Genotype& pa, const Genotype& pb,
                    const SearchSpace& space, std::uint64_t seed);

/// Suffix swap at explicit split points in [0, len]: first = pa[:split_a] +
/// pb[split_b:], second = pb[:split_b] + pa[split_a:]. Skip connections that
/// stay inside one part are kept (reindexed); the rest are dropped.
Offspring crossover_at(const Genotype& pa, const Genotype& pb,
                       std::size_t split_a, std::size_t split_b,
                       const SearchSpace& space);

enum class Gene { Kernel, Stride, OutCapsules, Skip };

struct MutationSite {
  Gene gene = Gene::Kernel;
  int layer = -1;  // -1 for Skip
  SkipConnection skip{};
  int old_value = 0;  // for Skip: 1 if the connection existed
  int new_value = 0;
};

struct MutationDraw {
  MutationSite site;
  Genotype mutated;  // before repair
};

/// Draws one gene and a different in-space value for it. Empty when the
/// genotype has no mutable gene in this space.
std::optional<MutationDraw> draw_mutation(const Genotype& g,
                                          const SearchSpace& space, Rng& rng);

std::optional<Genotype> mutate(const Genotype& g, const SearchSpace& space,
                               std::uint64_t seed);

/// Reason the genotype is invalid, or empty if it is valid.
std::optional<std::string> validation_error(const Genotype& g,
                                            const SearchSpace& space);

inline bool validate(const Genotype& g, const SearchSpace& space) {
  return !validation_error(g, space).has_value();
}

/// Re-chains shapes front to back, clamps bounded fields into the space and
/// drops dangling skip connections. Empty when the chain cannot be made valid.
std::optional<Genotype> repair(const Genotype& g, const SearchSpace& space);

nlohmann::json to_json(const Genotype& g);
nlohmann::json to_json(const LayerDescriptor& d);
/// Strict: missing or unknown keys throw FormatError.
Genotype genotype_from_json(const nlohmann::json& j);

/// Canonical text form (sorted keys, no whitespace).
std::string encode(const Genotype& g);
Genotype decode(std::string_view text);

/// 64-bit FNV-1a of the canonical encoding, as 16 hex digits.
std::string genotype_hash(const Genotype& g);

}  // namespace hwnas

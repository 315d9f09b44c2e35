#include "hwnas/genotype.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <limits>

#include "hwnas/errors.hpp"

namespace hwnas {

namespace {

constexpr std::array<std::pair<LayerType, std::string_view>, 4> kTypeNames{{
    {LayerType::Conv, "conv"},
    {LayerType::ConvCapsule, "conv_capsule"},
    {LayerType::FullyConnected, "fully_connected"},
    {LayerType::FullyConnectedCapsule, "fully_connected_capsule"},
}};

constexpr std::array<std::string_view, 9> kLayerKeys{
    "layer_type", "ifm_size",     "in_channels",  "in_capsules", "kernel_size",
    "stride",     "ofm_size",     "out_channels", "out_capsules"};

constexpr double kSkipProbability = 0.1;

// Nearest choice; ties go to the smaller value.
int snap(int v, const std::vector<int>& choices) {
  int best = choices.front();
  for (int c : choices) {
    const int d = std::abs(c - v), bd = std::abs(best - v);
    if (d < bd || (d == bd && c < best)) best = c;
  }
  return best;
}

bool contains(const std::vector<int>& choices, int v) {
  return std::find(choices.begin(), choices.end(), v) != choices.end();
}

int pick(const std::vector<int>& values, Rng& rng) {
  return values[rng.index(values.size())];
}

std::vector<SkipConnection> eligible_skips(int num_layers) {
  std::vector<SkipConnection> out;
  for (int d = 2; d < num_layers; ++d)
    for (int s = 0; s < d - 1; ++s) out.push_back({s, d});
  return out;
}

int int_field(const nlohmann::json& j, std::string_view key) {
  const auto it = j.find(std::string(key));
  if (it == j.end()) throw FormatError("missing key '" + std::string(key) + "'");
  if (!it->is_number_integer())
    throw FormatError("key '" + std::string(key) + "' must be an integer");
  const auto v = it->get<std::int64_t>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw FormatError("key '" + std::string(key) + "' out of range");
  return static_cast<int>(v);
}

void reject_unknown_keys(const nlohmann::json& j,
                         std::initializer_list<std::string_view> allowed,
                         std::string_view what) {
  for (const auto& [k, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw FormatError("unknown key '" + k + "' in " + std::string(what));
  }
}

}  // namespace

std::string_view to_string(LayerType t) {
  for (const auto& [type, name] : kTypeNames)
    if (type == t) return name;
  return "unknown";
}

LayerType layer_type_from_string(std::string_view s) {
  for (const auto& [type, name] : kTypeNames)
    if (name == s) return type;
  throw FormatError("unknown layer_type '" + std::string(s) + "'");
}

void SearchSpace::check() const {
  if (kernel_choices.empty() || stride_choices.empty())
    throw ConfigError("kernel and stride choices must be non-empty");
  for (int k : kernel_choices)
    if (k < 1) throw ConfigError("kernel choices must be positive");
  for (int s : stride_choices)
    if (s < 1) throw ConfigError("stride choices must be positive");
  if (channel_range.lo < 1 || channel_range.hi < channel_range.lo)
    throw ConfigError("channel range must be a non-empty positive interval");
  if (capsule_range.lo < 1 || capsule_range.hi < capsule_range.lo)
    throw ConfigError("capsule range must be a non-empty positive interval");
  if (min_layers < 2 || max_layers < min_layers)
    throw ConfigError("layer bounds require 2 <= min_layers <= max_layers");
  if (num_classes < 1 || input_size < 1 || input_channels < 1)
    throw ConfigError("num_classes, input_size and input_channels must be positive");
}

Genotype random_genotype(const SearchSpace& space, std::uint64_t seed) {
  space.check();
  const int min_kernel =
      *std::min_element(space.kernel_choices.begin(), space.kernel_choices.end());
  if (space.input_size < min_kernel)
    throw UnsatisfiableSpace("input size " + std::to_string(space.input_size) +
                             " is smaller than every kernel choice");

  Rng rng(seed);
  const int num_layers =
      static_cast<int>(rng.range(space.min_layers, space.max_layers));
  const int num_conv = static_cast<int>(rng.range(1, num_layers - 1));

  Genotype g;
  g.input_resize = space.input_size;
  int ifm = space.input_size;
  int channels = space.input_channels;
  int capsules = 1;

  auto push = [&](LayerType type, int kernel, int stride, int ofm, int out_ch) {
    LayerDescriptor d;
    d.type = type;
    d.ifm_size = ifm;
    d.in_channels = channels;
    d.in_capsules = capsules;
    d.kernel_size = kernel;
    d.stride = stride;
    d.ofm_size = ofm;
    d.out_channels = out_ch;
    d.out_capsules = is_capsule_type(type)
                         ? static_cast<int>(rng.range(space.capsule_range.lo,
                                                      space.capsule_range.hi))
                         : 1;
    g.layers.push_back(d);
    ifm = ofm;
    channels = d.out_channels;
    capsules = d.out_capsules;
  };
  auto random_channels = [&] {
    return static_cast<int>(rng.range(space.channel_range.lo, space.channel_range.hi));
  };

  for (int i = 0; i < num_conv; ++i) {
    std::vector<int> feasible;
    for (int k : space.kernel_choices)
      if (k <= ifm) feasible.push_back(k);
    if (feasible.empty()) break;
    const int kernel = pick(feasible, rng);
    const int stride = pick(space.stride_choices, rng);
    const auto type = rng.bernoulli(0.5) ? LayerType::ConvCapsule : LayerType::Conv;
    push(type, kernel, stride, conv_output_size(ifm, kernel, stride), random_channels());
  }
  while (static_cast<int>(g.layers.size()) < num_layers - 1) {
    const auto type = rng.bernoulli(0.5) ? LayerType::FullyConnectedCapsule
                                         : LayerType::FullyConnected;
    push(type, ifm, 1, 1, random_channels());
  }
  push(LayerType::FullyConnectedCapsule, ifm, 1, 1, space.num_classes);

  for (const auto& s : eligible_skips(num_layers))
    if (rng.bernoulli(kSkipProbability)) g.skip_connections.insert(s);
  return g;
}

Offspring crossover_at(const Genotype& pa, const Genotype& pb, std::size_t split_a,
                       std::size_t split_b, const SearchSpace& space) {
  split_a = std::min(split_a, pa.layers.size());
  split_b = std::min(split_b, pb.layers.size());

  auto splice = [&](const Genotype& head, std::size_t head_split,
                    const Genotype& tail, std::size_t tail_split) {
    Genotype child;
    child.input_resize = head_split > 0 ? head.input_resize : tail.input_resize;
    child.layers.assign(head.layers.begin(),
                        head.layers.begin() + static_cast<std::ptrdiff_t>(head_split));
    child.layers.insert(child.layers.end(),
                        tail.layers.begin() + static_cast<std::ptrdiff_t>(tail_split),
                        tail.layers.end());
    const int hs = static_cast<int>(head_split), ts = static_cast<int>(tail_split);
    for (const auto& s : head.skip_connections)
      if (s.destination < hs) child.skip_connections.insert(s);
    // A shortcut travels with its destination layer; its source keeps the
    // same distance when that still lands inside the child.
    for (const auto& s : tail.skip_connections)
      if (s.destination >= ts && s.source - ts + hs >= 0)
        child.skip_connections.insert({s.source - ts + hs, s.destination - ts + hs});
    auto repaired = repair(child, space);
    if (repaired && validate(*repaired, space)) return repaired;
    return std::optional<Genotype>{};
  };

  return {splice(pa, split_a, pb, split_b), splice(pb, split_b, pa, split_a)};
}

Offspring crossover(const Genotype& pa, const Genotype& pb, const SearchSpace& space,
                    std::uint64_t seed) {
  Rng rng(seed);
  auto draw = [&](const Genotype& g) -> std::size_t {
    const auto n = g.layers.size();
    if (n < 2) return n;
    return 1 + rng.index(n - 1);
  };
  const auto split_a = draw(pa);
  const auto split_b = draw(pb);
  return crossover_at(pa, pb, split_a, split_b, space);
}

std::optional<MutationDraw> draw_mutation(const Genotype& g, const SearchSpace& space,
                                          Rng& rng) {
  struct Slot {
    Gene gene;
    int layer;
  };
  std::vector<Slot> slots;
  for (int i = 0; i < static_cast<int>(g.layers.size()); ++i) {
    const auto& d = g.layers[i];
    if (is_conv_type(d.type)) {
      const bool other_kernel = std::any_of(space.kernel_choices.begin(),
                                            space.kernel_choices.end(),
                                            [&](int k) { return k != d.kernel_size; });
      const bool other_stride = std::any_of(space.stride_choices.begin(),
                                            space.stride_choices.end(),
                                            [&](int s) { return s != d.stride; });
      if (other_kernel) slots.push_back({Gene::Kernel, i});
      if (other_stride) slots.push_back({Gene::Stride, i});
    }
    if (is_capsule_type(d.type) &&
        (space.capsule_range.size() > 1 || !space.capsule_range.contains(d.out_capsules)))
      slots.push_back({Gene::OutCapsules, i});
  }
  const auto skips = eligible_skips(static_cast<int>(g.layers.size()));
  if (!skips.empty()) slots.push_back({Gene::Skip, -1});
  if (slots.empty()) return std::nullopt;

  const Slot slot = slots[rng.index(slots.size())];
  MutationDraw out{{slot.gene, slot.layer, {}, 0, 0}, g};
  auto other_value = [&](const std::vector<int>& values, int current) {
    std::vector<int> alt;
    for (int v : values)
      if (v != current) alt.push_back(v);
    return pick(alt, rng);
  };

  switch (slot.gene) {
    case Gene::Kernel: {
      auto& d = out.mutated.layers[slot.layer];
      out.site.old_value = d.kernel_size;
      d.kernel_size = other_value(space.kernel_choices, d.kernel_size);
      out.site.new_value = d.kernel_size;
      break;
    }
    case Gene::Stride: {
      auto& d = out.mutated.layers[slot.layer];
      out.site.old_value = d.stride;
      d.stride = other_value(space.stride_choices, d.stride);
      out.site.new_value = d.stride;
      break;
    }
    case Gene::OutCapsules: {
      auto& d = out.mutated.layers[slot.layer];
      out.site.old_value = d.out_capsules;
      int v = d.out_capsules;
      while (v == d.out_capsules)
        v = static_cast<int>(rng.range(space.capsule_range.lo, space.capsule_range.hi));
      d.out_capsules = v;
      out.site.new_value = v;
      break;
    }
    case Gene::Skip: {
      const auto s = skips[rng.index(skips.size())];
      out.site.skip = s;
      const bool present = out.mutated.skip_connections.erase(s) > 0;
      if (!present) out.mutated.skip_connections.insert(s);
      out.site.old_value = present ? 1 : 0;
      out.site.new_value = present ? 0 : 1;
      break;
    }
  }
  return out;
}

std::optional<Genotype> mutate(const Genotype& g, const SearchSpace& space,
                               std::uint64_t seed) {
  Rng rng(seed);
  auto draw = draw_mutation(g, space, rng);
  if (!draw) return std::nullopt;
  auto repaired = repair(draw->mutated, space);
  if (!repaired || !validate(*repaired, space)) return std::nullopt;
  return repaired;
}

std::optional<std::string> validation_error(const Genotype& g, const SearchSpace& space) {
  const int n = static_cast<int>(g.layers.size());
  if (n < 2) return "genotype needs at least two layers";
  if (n < space.min_layers || n > space.max_layers)
    return "layer count " + std::to_string(n) + " outside search-space bounds";
  if (g.input_resize < 1) return "input_resize must be positive";
  if (!is_conv_type(g.layers.front().type)) return "first layer must be convolutional";

  int ifm = g.input_resize, channels = space.input_channels, capsules = 1;
  for (int i = 0; i < n; ++i) {
    const auto& d = g.layers[i];
    const std::string at = "layer " + std::to_string(i) + ": ";
    if (d.ifm_size != ifm) return at + "ifm_size does not chain";
    if (d.in_channels != channels) return at + "in_channels does not chain";
    if (d.in_capsules != capsules) return at + "in_capsules does not chain";
    if (is_conv_type(d.type)) {
      if (!contains(space.kernel_choices, d.kernel_size)) return at + "kernel out of space";
      if (!contains(space.stride_choices, d.stride)) return at + "stride out of space";
      const int ofm = conv_output_size(d.ifm_size, d.kernel_size, d.stride);
      if (ofm < 1) return at + "kernel larger than input feature map";
      if (d.ofm_size != ofm) return at + "ofm_size inconsistent with geometry";
    } else {
      if (d.kernel_size != d.ifm_size) return at + "fc kernel must equal ifm_size";
      if (d.stride != 1) return at + "fc stride must be 1";
      if (d.ofm_size != 1) return at + "fc ofm_size must be 1";
    }
    const bool last = i == n - 1;
    if (last) {
      if (d.type != LayerType::FullyConnectedCapsule)
        return at + "network must end with a fully-connected capsule layer";
      if (d.out_channels != space.num_classes) return at + "output channels != classes";
    } else if (!space.channel_range.contains(d.out_channels)) {
      return at + "out_channels out of range";
    }
    if (is_capsule_type(d.type)) {
      if (!space.capsule_range.contains(d.out_capsules)) return at + "out_capsules out of range";
    } else if (d.out_capsules != 1) {
      return at + "non-capsule layer must have out_capsules = 1";
    }
    ifm = d.ofm_size;
    channels = d.out_channels;
    capsules = d.out_capsules;
  }
  for (const auto& s : g.skip_connections) {
    if (s.source < 0 || s.destination >= n || s.source >= s.destination - 1)
      return "invalid skip connection (" + std::to_string(s.source) + ", " +
             std::to_string(s.destination) + ")";
  }
  return std::nullopt;
}

std::optional<Genotype> repair(const Genotype& g, const SearchSpace& space) {
  const int n = static_cast<int>(g.layers.size());
  if (n < std::max(2, space.min_layers) || n > space.max_layers) return std::nullopt;
  if (g.input_resize < 1 || !is_conv_type(g.layers.front().type) ||
      g.layers.back().type != LayerType::FullyConnectedCapsule)
    return std::nullopt;

  Genotype out = g;
  int ifm = g.input_resize, channels = space.input_channels, capsules = 1;
  for (int i = 0; i < n; ++i) {
    auto& d = out.layers[i];
    d.ifm_size = ifm;
    d.in_channels = channels;
    d.in_capsules = capsules;
    if (is_conv_type(d.type)) {
      d.kernel_size = snap(d.kernel_size, space.kernel_choices);
      d.stride = snap(d.stride, space.stride_choices);
      d.ofm_size = conv_output_size(ifm, d.kernel_size, d.stride);
      if (d.ofm_size < 1) return std::nullopt;
    } else {
      d.kernel_size = ifm;
      d.stride = 1;
      d.ofm_size = 1;
    }
    d.out_channels = i == n - 1 ? space.num_classes : space.channel_range.clamp(d.out_channels);
    d.out_capsules = is_capsule_type(d.type) ? space.capsule_range.clamp(d.out_capsules) : 1;
    ifm = d.ofm_size;
    channels = d.out_channels;
    capsules = d.out_capsules;
  }
  std::erase_if(out.skip_connections, [n](const SkipConnection& s) {
    return s.source < 0 || s.destination >= n || s.source >= s.destination - 1;
  });
  return out;
}

nlohmann::json to_json(const LayerDescriptor& d) {
  return nlohmann::json{{"layer_type", to_string(d.type)},
                        {"ifm_size", d.ifm_size},
                        {"in_channels", d.in_channels},
                        {"in_capsules", d.in_capsules},
                        {"kernel_size", d.kernel_size},
                        {"stride", d.stride},
                        {"ofm_size", d.ofm_size},
                        {"out_channels", d.out_channels},
                        {"out_capsules", d.out_capsules}};
}

nlohmann::json to_json(const Genotype& g) {
  auto layers = nlohmann::json::array();
  for (const auto& d : g.layers) layers.push_back(to_json(d));
  auto skips = nlohmann::json::array();
  for (const auto& s : g.skip_connections) skips.push_back({s.source, s.destination});
  return nlohmann::json{
      {"layers", std::move(layers)},
      {"skip_connections", std::move(skips)},
      {"input_resize", g.input_resize}};
}

Genotype genotype_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("genotype must be an object");
  reject_unknown_keys(j, {"layers", "skip_connections", "input_resize"}, "genotype");

  Genotype g;
  g.input_resize = int_field(j, "input_resize");

  const auto layers = j.find("layers");
  if (layers == j.end() || !layers->is_array()) throw FormatError("'layers' must be an array");
  for (const auto& lj : *layers) {
    if (!lj.is_object()) throw FormatError("layer descriptor must be an object");
    for (const auto& [k, _] : lj.items()) {
      if (std::find(kLayerKeys.begin(), kLayerKeys.end(), k) == kLayerKeys.end())
        throw FormatError("unknown key '" + k + "' in layer descriptor");
    }
    const auto type = lj.find("layer_type");
    if (type == lj.end() || !type->is_string()) throw FormatError("missing 'layer_type'");
    LayerDescriptor d;
    d.type = layer_type_from_string(type->get<std::string>());
    d.ifm_size = int_field(lj, "ifm_size");
    d.in_channels = int_field(lj, "in_channels");
    d.in_capsules = int_field(lj, "in_capsules");
    d.kernel_size = int_field(lj, "kernel_size");
    d.stride = int_field(lj, "stride");
    d.ofm_size = int_field(lj, "ofm_size");
    d.out_channels = int_field(lj, "out_channels");
    d.out_capsules = int_field(lj, "out_capsules");
    g.layers.push_back(d);
  }

  const auto skips = j.find("skip_connections");
  if (skips == j.end() || !skips->is_array())
    throw FormatError("'skip_connections' must be an array");
  for (const auto& sj : *skips) {
    if (!sj.is_array() || sj.size() != 2 || !sj[0].is_number_integer() ||
        !sj[1].is_number_integer())
      throw FormatError("skip connection must be [source, destination]");
    g.skip_connections.insert({sj[0].get<int>(), sj[1].get<int>()});
  }
  return g;
}

std::string encode(const Genotype& g) { return to_json(g).dump(); }

Genotype decode(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("genotype is not valid JSON: ") + e.what());
  }
  return genotype_from_json(j);
}

std::string genotype_hash(const Genotype& g) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : encode(g)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace hwnas

#include "hwnas/config.hpp"

#include <cstdlib>
#include <set>

#include "hwnas/errors.hpp"
#include "hwnas/external_evaluator.hpp"

namespace hwnas {

namespace {

using nlohmann::json;

// Strict view of one object: every key must be consumed.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError(name_ + " must be an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <class T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(name_ + "." + key + " has the wrong type");
    }
  }

  void get_range(const char* key, IntRange& out) {
    std::vector<int> v;
    get(key, v);
    if (!has(key)) return;
    if (v.size() != 2) throw ConfigError(name_ + "." + key + " must be [lo, hi]");
    out = {v[0], v[1]};
  }

  void done() const {
    for (const auto& [k, _] : j_.items())
      if (!seen_.contains(k)) throw ConfigError("unknown key " + name_ + "." + k);
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

json demo_hardware() {
  // Placeholder constants; real values come from synthesis of the target array.
  return {{"clock_period_ns", 3.0}, {"pe_power_mw", 250.0}, {"mem_access_energy_pj", 1000.0}};
}

json dataset_doc(std::string_view name) {
  const auto* p = find_dataset_preset(name);
  return {{"search",
           {{"mode", "one_eps"},
            {"train_epochs", p->train_epochs},
            {"space",
             {{"input_size", p->input_size},
              {"input_channels", p->input_channels},
              {"num_classes", p->num_classes}}}}},
          {"hardware", demo_hardware()},
          {"evaluator", {{"backend", "surrogate"}}},
          {"epsilon", {{"dataset", std::string(name)}}}};
}

SearchMode parse_mode(const std::string& s) {
  if (s == "one_eps") return SearchMode::OneEps;
  if (s == "two_eps") return SearchMode::TwoEps;
  throw ConfigError("search.mode must be one_eps or two_eps, got '" + s + "'");
}

Strategy parse_strategy(const std::string& s) {
  if (s == "nsga2") return Strategy::Nsga2;
  if (s == "random") return Strategy::Random;
  throw ConfigError("strategy must be nsga2 or random, got '" + s + "'");
}

GridSpacing parse_spacing(const std::string& s) {
  if (s == "log") return GridSpacing::Log;
  if (s == "linear") return GridSpacing::Linear;
  if (s == "one_three") return GridSpacing::OneThree;
  throw ConfigError("epsilon.grid.spacing must be log, linear or one_three, got '" + s + "'");
}

void parse_space(const json& j, SearchSpace& sp) {
  Section s(j, "search.space");
  s.get("kernels", sp.kernel_choices);
  s.get("strides", sp.stride_choices);
  s.get_range("channels", sp.channel_range);
  s.get_range("capsules", sp.capsule_range);
  s.get("min_layers", sp.min_layers);
  s.get("max_layers", sp.max_layers);
  s.get("num_classes", sp.num_classes);
  s.get("input_size", sp.input_size);
  s.get("input_channels", sp.input_channels);
  s.done();
}

void parse_search(const json& j, RunConfig& cfg) {
  Section s(j, "search");
  std::string text;
  if (s.has("strategy")) {
    s.get("strategy", text);
    cfg.strategy = parse_strategy(text);
  }
  if (s.has("mode")) {
    s.get("mode", text);
    cfg.search.mode = parse_mode(text);
  }
  if (s.has("indicator")) {
    s.get("indicator", text);
    if (text == "raw")
      cfg.search.indicator = IndicatorScale::Raw;
    else if (text == "log_costs")
      cfg.search.indicator = IndicatorScale::LogCosts;
    else
      throw ConfigError("search.indicator must be raw or log_costs");
  }
  s.get("population", cfg.search.population);
  s.get("generations", cfg.search.generations);
  s.get("offspring", cfg.search.offspring);
  s.get("mutation_prob", cfg.search.mutation_prob);
  s.get("train_epochs", cfg.search.train_epochs);
  if (s.has("space")) parse_space(s.raw("space"), cfg.search.space);
  s.done();
}

void parse_hardware(const json& j, HardwareConfig& hw) {
  Section s(j, "hardware");
  s.get("clock_period_ns", hw.clock_period_ns);
  s.get("pe_power_mw", hw.pe_power_mw);
  s.get("mem_access_energy_pj", hw.mem_access_energy_pj);
  s.get("load_weights_cycles", hw.load_weights_cycles);
  s.get("pe_rows", hw.pe_rows);
  s.get("pe_cols", hw.pe_cols);
  s.get("bytes_per_weight", hw.bytes_per_weight);
  s.done();
}

void parse_evaluator(const json& j, EvaluatorConfig& ev) {
  Section s(j, "evaluator");
  if (s.has("backend")) {
    std::string spec;
    s.get("backend", spec);
    set_backend(ev, spec);
  }
  s.get("workers", ev.workers);
  s.get("timeout_s", ev.timeout_s);
  if (s.has("surrogate")) {
    Section p(s.raw("surrogate"), "evaluator.surrogate");
    p.get("log_params_weight", ev.surrogate.log_params_weight);
    p.get("depth_weight", ev.surrogate.depth_weight);
    p.get("bias", ev.surrogate.bias);
    p.get("eps_base", ev.surrogate.eps_base);
    p.get("jitter", ev.surrogate.jitter);
    p.done();
  }
  s.done();
}

void parse_toy(const json& j, ToyOptions& t) {
  Section s(j, "toy");
  s.get("classes", t.classes);
  s.get("dim", t.dim);
  s.get("train_size", t.train_size);
  s.get("test_size", t.test_size);
  s.get("spread", t.spread);
  s.get("data_seed", t.data_seed);
  s.get("lr", t.lr);
  s.get("batch_size", t.batch_size);
  s.get("pgd_steps", t.pgd_steps);
  s.get("pgd_alpha_ratio", t.pgd_alpha_ratio);
  s.done();
}

void parse_epsilon(const json& j, EpsilonConfig& e) {
  Section s(j, "epsilon");
  if (s.has("values")) {
    const auto& v = s.raw("values");
    if (v.is_string() && v.get<std::string>() == "auto") {
      e.automatic = true;
      e.values.clear();
    } else if (v.is_array()) {
      e.automatic = false;
      e.values.clear();
      for (const auto& x : v) {
        if (!x.is_number()) throw ConfigError("epsilon.values must hold numbers");
        e.values.push_back(x.get<double>());
      }
    } else {
      throw ConfigError("epsilon.values must be a list or \"auto\"");
    }
  }
  if (s.has("dataset")) {
    s.get("dataset", e.dataset);
    if (!find_dataset_preset(e.dataset)) throw ConfigError("unknown dataset '" + e.dataset + "'");
  }
  if (s.has("grid")) {
    Section g(s.raw("grid"), "epsilon.grid");
    g.get("min", e.grid.eps_min);
    g.get("max", e.grid.eps_max);
    g.get("points", e.grid.points);
    if (g.has("spacing")) {
      std::string text;
      g.get("spacing", text);
      e.grid.spacing = parse_spacing(text);
    }
    g.done();
  }
  if (s.has("probe")) {
    try {
      e.probe = genotype_from_json(s.raw("probe"));
    } catch (const FormatError& ex) {
      throw ConfigError(std::string("epsilon.probe: ") + ex.what());
    }
  }
  s.done();
}

}  // namespace

std::vector<std::string_view> config_preset_names() {
  return {"surrogate-demo", "toy-demo", "mnist", "fmnist", "cifar10"};
}

nlohmann::json config_preset(std::string_view name) {
  if (name == "surrogate-demo") {
    return {{"search",
             {{"strategy", "nsga2"},
              {"mode", "one_eps"},
              {"population", 10},
              {"generations", 20},
              {"offspring", 10},
              {"mutation_prob", 0.1},
              {"train_epochs", 5}}},
            {"hardware", demo_hardware()},
            {"evaluator", {{"backend", "surrogate"}}},
            {"epsilon", {{"values", {0.01}}}}};
  }
  if (name == "toy-demo") {
    return {{"search",
             {{"strategy", "nsga2"},
              {"mode", "one_eps"},
              {"population", 6},
              {"generations", 3},
              {"offspring", 6},
              {"mutation_prob", 0.1},
              {"train_epochs", 3},
              {"space", {{"max_layers", 5}, {"channels", {1, 32}}, {"capsules", {1, 8}}}}}},
            {"hardware", demo_hardware()},
            {"evaluator", {{"backend", "toy"}}},
            {"toy", {{"train_size", 1000}, {"test_size", 200}}},
            {"epsilon", {{"values", {0.05}}}}};
  }
  if (find_dataset_preset(name)) return dataset_doc(name);
  throw ConfigError("unknown preset '" + std::string(name) + "'");
}

RunConfig parse_run_config(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("configuration must be a JSON object");
  json merged = json::object();
  std::string preset;
  if (doc.contains("preset")) {
    if (!doc["preset"].is_string()) throw ConfigError("preset must be a string");
    preset = doc["preset"].get<std::string>();
    merged = config_preset(preset);
  }
  json rest = doc;
  rest.erase("preset");
  merged.merge_patch(rest);

  RunConfig cfg;
  cfg.preset = preset;
  Section top(merged, "config");
  top.get("seed", cfg.seed);
  if (top.has("search")) parse_search(top.raw("search"), cfg);
  if (top.has("hardware")) parse_hardware(top.raw("hardware"), cfg.hardware);
  if (top.has("evaluator")) parse_evaluator(top.raw("evaluator"), cfg.evaluator);
  if (top.has("toy")) parse_toy(top.raw("toy"), cfg.toy);
  if (top.has("epsilon")) parse_epsilon(top.raw("epsilon"), cfg.epsilon);
  top.done();

  cfg.hardware.check();
  cfg.search.space.check();
  if (cfg.evaluator.workers < 1) throw ConfigError("evaluator.workers must be >= 1");
  if (!(cfg.evaluator.timeout_s > 0.0)) throw ConfigError("evaluator.timeout_s must be > 0");
  return cfg;
}

void set_backend(EvaluatorConfig& ev, std::string_view spec) {
  constexpr std::string_view ext = "external:";
  if (spec == "surrogate") {
    ev.backend = Backend::Surrogate;
  } else if (spec == "toy") {
    ev.backend = Backend::Toy;
  } else if (spec.starts_with(ext) && spec.size() > ext.size()) {
    ev.backend = Backend::External;
    ev.command = std::string(spec.substr(ext.size()));
  } else {
    throw ConfigError("backend must be surrogate, toy or external:<command>, got '" +
                      std::string(spec) + "'");
  }
}

void apply_environment(RunConfig& cfg) {
  const char* v = std::getenv("ROHNAS_WORKERS");
  if (!v || !*v) return;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1 || n > 4096)
    throw ConfigError(std::string("ROHNAS_WORKERS must be a positive integer, got '") + v + "'");
  cfg.evaluator.workers = static_cast<int>(n);
}

std::unique_ptr<Evaluator> make_evaluator(const RunConfig& cfg) {
  switch (cfg.evaluator.backend) {
    case Backend::Surrogate:
      return std::make_unique<SurrogateEvaluator>(cfg.evaluator.surrogate);
    case Backend::Toy: {
      ToyOptions t = cfg.toy;
      t.workers = cfg.evaluator.workers;
      return std::make_unique<ToyEvaluator>(t);
    }
    case Backend::External:
      return std::make_unique<ExternalEvaluator>(
          ExternalOptions{cfg.evaluator.command, cfg.evaluator.timeout_s, cfg.evaluator.workers});
  }
  throw ConfigError("unknown backend");
}

bool resolve_static_epsilons(RunConfig& cfg) {
  if (cfg.epsilon.automatic) return false;
  if (!cfg.epsilon.values.empty()) {
    cfg.search.epsilons = cfg.epsilon.values;
  } else if (!cfg.epsilon.dataset.empty()) {
    const auto* p = find_dataset_preset(cfg.epsilon.dataset);
    if (cfg.search.mode == SearchMode::OneEps)
      cfg.search.epsilons = {p->eps_nas};
    else
      cfg.search.epsilons = {p->eps_low, p->eps_high};
  }
  return true;
}

Genotype probe_genotype(const RunConfig& cfg) {
  if (cfg.epsilon.probe) return *cfg.epsilon.probe;
  return random_genotype(cfg.search.space, cfg.seed);
}

std::vector<double> epsilons_for_mode(const EpsilonSelection& sel, SearchMode mode) {
  if (mode == SearchMode::OneEps) return {sel.eps_nas};
  return {sel.eps_low, sel.eps_high};
}

nlohmann::json hardware_to_json(const HardwareConfig& hw) {
  return {{"clock_period_ns", hw.clock_period_ns},
          {"pe_power_mw", hw.pe_power_mw},
          {"mem_access_energy_pj", hw.mem_access_energy_pj},
          {"load_weights_cycles", hw.load_weights_cycles},
          {"pe_rows", hw.pe_rows},
          {"pe_cols", hw.pe_cols},
          {"bytes_per_weight", hw.bytes_per_weight}};
}

}  // namespace hwnas

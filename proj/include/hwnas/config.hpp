#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hwnas/eps_select.hpp"
#include "hwnas/evaluator.hpp"
#include "hwnas/hw_model.hpp"
#include "hwnas/search.hpp"
#include "hwnas/toy_model.hpp"

namespace hwnas {

enum class Backend { Surrogate, Toy, External };

struct EvaluatorConfig {
  Backend backend = Backend::Surrogate;
  std::string command;  // external only
  int workers = 1;
  double timeout_s = 3600.0;
  SurrogateParams surrogate;
};

struct EpsilonConfig {
  bool automatic = false;               // "auto": resolve through eps-select
  std::vector<double> values;           // explicit values, ascending
  std::string dataset;                  // dataset preset supplying defaults
  EpsilonGrid grid;
  std::optional<Genotype> probe;        // sweep network; random from the seed if absent
};

struct RunConfig {
  std::string preset;
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::Nsga2;
  SearchConfig search;
  HardwareConfig hardware;
  EvaluatorConfig evaluator;
  ToyOptions toy;
  EpsilonConfig epsilon;
};

/// Names accepted by `preset`.
std::vector<std::string_view> config_preset_names();

/// Built-in configuration document; throws ConfigError for unknown names.
nlohmann::json config_preset(std::string_view name);

/// Builds a RunConfig from a document (optionally naming a preset that the
/// document then overrides). Unknown keys and bad values throw ConfigError.
RunConfig parse_run_config(const nlohmann::json& doc);

/// "surrogate", "toy" or "external:<command>".
void set_backend(EvaluatorConfig& ev, std::string_view spec);

/// Applies ROHNAS_WORKERS if it is set.
void apply_environment(RunConfig& cfg);

std::unique_ptr<Evaluator> make_evaluator(const RunConfig& cfg);

/// Fills search.epsilons from the explicit values or the dataset preset.
/// Returns false when the values must come from an epsilon sweep.
bool resolve_static_epsilons(RunConfig& cfg);

/// Probe network for the epsilon sweep.
Genotype probe_genotype(const RunConfig& cfg);

/// Values for search.epsilons from a sweep result and the search mode.
std::vector<double> epsilons_for_mode(const EpsilonSelection& sel, SearchMode mode);

nlohmann::json hardware_to_json(const HardwareConfig& hw);

}  // namespace hwnas

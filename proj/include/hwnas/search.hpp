#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hwnas/evaluator.hpp"
#include "hwnas/genotype.hpp"
#include "hwnas/hw_model.hpp"
#include "hwnas/nsga2.hpp"

namespace hwnas {

enum class SearchMode { OneEps, TwoEps };
enum class Strategy { Nsga2, Random };

/// Space in which the progress indicator (hypervolume) is measured. Costs
/// span many orders of magnitude, so by default they enter as log10.
enum class IndicatorScale { Raw, LogCosts };

struct SearchConfig {
  SearchSpace space;
  int population = 10;
  int generations = 20;
  int offspring = 10;
  double mutation_prob = 0.1;
  SearchMode mode = SearchMode::OneEps;
  std::vector<double> epsilons{0.01};  // one_eps: [eps_nas]; two_eps: [eps_low, eps_high]
  int train_epochs = 5;
  IndicatorScale indicator = IndicatorScale::LogCosts;

  /// Throws ConfigError.
  void check() const;
};

struct ObjectiveLayout {
  std::vector<std::string> names;
  std::vector<Sense> senses;
};

ObjectiveLayout objective_layout(const SearchConfig& cfg);

/// [adv_acc..., energy, latency, memory]; failures get accuracy 0 and
/// infinite costs.
FitnessVector assemble_fitness(const SearchConfig& cfg, const EvaluationResult& res,
                               const NetworkCost* cost);

/// Fitness mapped into the indicator space.
FitnessVector indicator_point(const FitnessVector& f, IndicatorScale scale);

struct IndividualRecord {
  int generation = 0;
  std::int64_t id = 0;
  Genotype genotype;
  std::string hash;
  EvaluationResult result;
  FitnessVector fitness;
  int rank = -1;
  double crowding = 0.0;
  bool cached = false;
};

struct GenerationSummary {
  int generation = 0;
  std::size_t evaluations = 0;      // cumulative individuals evaluated (incl. cache hits)
  std::size_t evaluator_calls = 0;  // cumulative requests sent to the backend
  std::vector<std::size_t> front_sizes;
  double hypervolume = 0.0;  // archive, indicator space, worst-so-far reference
  std::vector<double> reference;
  std::vector<std::int64_t> population;
};

struct RunLog {
  Strategy strategy = Strategy::Nsga2;
  std::uint64_t seed = 0;
  SearchConfig config;
  ObjectiveLayout layout;
  std::vector<IndividualRecord> records;
  std::vector<GenerationSummary> generations;
  std::vector<std::int64_t> final_population;
  std::vector<std::int64_t> front;  // non-dominated successfully evaluated archive members

  const IndividualRecord* find(std::int64_t id) const;

  /// Newline-delimited JSON; see README for the record schema.
  void write(std::ostream& out) const;
};

/// Inverse of RunLog::write. Throws FormatError.
RunLog read_run_log(std::istream& in);

/// Fitness vectors of all successfully evaluated records.
std::vector<FitnessVector> archive_points(const RunLog& log);

/// Non-dominated subset (record indices) of successfully evaluated records,
/// one per distinct genotype.
std::vector<std::size_t> archive_front(const RunLog& log);

/// Hypervolume of the archive front in indicator space against `reference`
/// (an indicator-space point).
double archive_hypervolume(const RunLog& log, const FitnessVector& reference);

RunLog evolve(const SearchConfig& cfg, Evaluator& evaluator, const HardwareConfig& hw,
              std::uint64_t seed);

/// Same budget as evolve (population + generations * offspring), spent on
/// independent random genotypes.
RunLog random_search(const SearchConfig& cfg, Evaluator& evaluator, const HardwareConfig& hw,
                     std::uint64_t seed);

}  // namespace hwnas

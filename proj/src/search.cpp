#include "hwnas/search.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "hwnas/errors.hpp"
#include "hwnas/rng.hpp"

namespace hwnas {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_eps(double e) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", e);
  return buf;
}

nlohmann::json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

nlohmann::json numbers(const std::vector<double>& vs) {
  auto a = nlohmann::json::array();
  for (double v : vs) a.push_back(number(v));
  return a;
}

std::string_view strategy_name(Strategy s) { return s == Strategy::Nsga2 ? "nsga2" : "random"; }
std::string_view mode_name(SearchMode m) { return m == SearchMode::OneEps ? "one_eps" : "two_eps"; }

/// Evaluation bookkeeping shared by both strategies.
class Campaign {
 public:
  Campaign(const SearchConfig& cfg, Evaluator& evaluator, const HardwareConfig& hw,
           std::uint64_t seed, Strategy strategy)
      : cfg_(cfg), evaluator_(evaluator), hw_(hw), seed_(seed) {
    cfg_.check();
    hw_.check();
    log_.strategy = strategy;
    log_.seed = seed;
    log_.config = cfg;
    log_.layout = objective_layout(cfg);
  }

  /// Evaluates the genotypes (deduplicated through the cache) and appends
  /// one record per genotype.
  std::vector<Individual> evaluate(const std::vector<Genotype>& genotypes, int generation) {
    std::vector<Individual> out(genotypes.size());
    std::vector<std::string> hashes(genotypes.size());
    std::vector<bool> cached(genotypes.size(), false);
    std::vector<EvaluationRequest> requests;
    std::vector<std::size_t> owner;
    std::map<std::string, std::size_t> first_in_batch;

    for (std::size_t i = 0; i < genotypes.size(); ++i) {
      hashes[i] = genotype_hash(genotypes[i]);
      out[i].id = next_id_++;
      out[i].genotype = genotypes[i];
      out[i].birth_generation = generation;
      if (cache_.contains(hashes[i]) || first_in_batch.contains(hashes[i])) {
        cached[i] = true;
        continue;
      }
      first_in_batch[hashes[i]] = i;
      EvaluationRequest req;
      req.id = out[i].id;
      req.genotype = genotypes[i];
      req.epsilons = cfg_.epsilons;
      req.train_epochs = cfg_.train_epochs;
      req.seed = seed_;
      requests.push_back(std::move(req));
      owner.push_back(i);
    }

    // Results are merged in request order, so backend concurrency never
    // changes the outcome.
    const auto results = evaluator_.evaluate_batch(requests);
    calls_ += requests.size();
    for (std::size_t k = 0; k < results.size(); ++k) {
      auto res = results[k];
      res.id = requests[k].id;
      cache_[hashes[owner[k]]] = res;
    }

    for (std::size_t i = 0; i < genotypes.size(); ++i) {
      EvaluationResult res = cache_.at(hashes[i]);
      res.id = out[i].id;
      std::optional<NetworkCost> cost;
      if (res.ok()) {
        try {
          cost = estimate(genotypes[i], hw_);
        } catch (const OverflowError& e) {
          res = EvaluationResult::failed(res.id, e.what(), cfg_.epsilons.size());
        }
      }
      out[i].fitness = assemble_fitness(cfg_, res, cost ? &*cost : nullptr);

      IndividualRecord rec;
      rec.generation = generation;
      rec.id = out[i].id;
      rec.genotype = genotypes[i];
      rec.hash = hashes[i];
      rec.result = std::move(res);
      rec.fitness = out[i].fitness;
      rec.cached = cached[i];
      record_index_[rec.id] = log_.records.size();
      log_.records.push_back(std::move(rec));
    }
    evaluations_ += genotypes.size();
    return out;
  }

  void set_rank(const Individual& ind) {
    auto& rec = log_.records[record_index_.at(ind.id)];
    rec.rank = ind.rank;
    rec.crowding = ind.crowding;
  }

  void summarize(int generation, std::span<const FitnessVector> ranked_pool,
                 const std::vector<Individual>& population) {
    GenerationSummary s;
    s.generation = generation;
    s.evaluations = evaluations_;
    s.evaluator_calls = calls_;
    for (const auto& f : non_dominated_sort(ranked_pool)) s.front_sizes.push_back(f.size());
    for (const auto& ind : population) s.population.push_back(ind.id);

    std::vector<FitnessVector> pts;
    for (const auto& f : archive_points(log_)) pts.push_back(indicator_point(f, cfg_.indicator));
    if (!pts.empty()) {
      const auto ref = worst_point(pts);
      s.reference = ref.values;
      s.hypervolume = archive_hypervolume(log_, ref);
    }
    log_.generations.push_back(std::move(s));
  }

  RunLog finish(const std::vector<Individual>& population) {
    for (const auto& ind : population) log_.final_population.push_back(ind.id);
    for (std::size_t i : archive_front(log_)) log_.front.push_back(log_.records[i].id);
    return std::move(log_);
  }

  Genotype random(Rng& rng) { return random_genotype(cfg_.space, rng.next()); }

 private:
  SearchConfig cfg_;
  Evaluator& evaluator_;
  HardwareConfig hw_;
  std::uint64_t seed_;
  RunLog log_;
  std::int64_t next_id_ = 0;
  std::size_t evaluations_ = 0;
  std::size_t calls_ = 0;
  std::map<std::string, EvaluationResult> cache_;
  std::map<std::int64_t, std::size_t> record_index_;
};

std::vector<FitnessVector> fitness_of(const std::vector<Individual>& v) {
  std::vector<FitnessVector> out;
  for (const auto& ind : v) out.push_back(ind.fitness);
  return out;
}

}  // namespace

void SearchConfig::check() const {
  space.check();
  if (population < 1) throw ConfigError("population must be >= 1");
  if (generations < 0) throw ConfigError("generations must be >= 0");
  if (offspring < 0) throw ConfigError("offspring must be >= 0");
  if (!(mutation_prob >= 0.0 && mutation_prob <= 1.0))
    throw ConfigError("mutation_prob must lie in [0, 1]");
  if (train_epochs < 1) throw ConfigError("train_epochs must be >= 1");
  const std::size_t want = mode == SearchMode::OneEps ? 1 : 2;
  if (epsilons.size() != want)
    throw ConfigError(std::string(mode_name(mode)) + " search needs " + std::to_string(want) +
                      " epsilon value(s)");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!std::isfinite(epsilons[i]) || epsilons[i] < 0.0)
      throw ConfigError("epsilons must be finite and non-negative");
    if (i > 0 && !(epsilons[i] > epsilons[i - 1]))
      throw ConfigError("epsilons must be strictly ascending");
  }
}

ObjectiveLayout objective_layout(const SearchConfig& cfg) {
  ObjectiveLayout l;
  for (double e : cfg.epsilons) {
    l.names.push_back("adv_acc@" + format_eps(e));
    l.senses.push_back(Sense::Maximize);
  }
  for (const char* n : {"energy_mj", "latency_ms", "memory_mib"}) {
    l.names.push_back(n);
    l.senses.push_back(Sense::Minimize);
  }
  return l;
}

FitnessVector assemble_fitness(const SearchConfig& cfg, const EvaluationResult& res,
                               const NetworkCost* cost) {
  FitnessVector f;
  const bool ok = res.ok() && cost != nullptr &&
                  res.adversarial_accuracies.size() == cfg.epsilons.size();
  for (std::size_t i = 0; i < cfg.epsilons.size(); ++i) {
    f.values.push_back(ok ? res.adversarial_accuracies[i] : 0.0);
    f.senses.push_back(Sense::Maximize);
  }
  for (double c : {ok ? cost->energy_mj : kInf, ok ? cost->latency_ms : kInf,
                   ok ? cost->memory_mib : kInf}) {
    f.values.push_back(c);
    f.senses.push_back(Sense::Minimize);
  }
  return f;
}

FitnessVector indicator_point(const FitnessVector& f, IndicatorScale scale) {
  if (scale == IndicatorScale::Raw) return f;
  FitnessVector out = f;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out.senses[i] == Sense::Minimize)
      out.values[i] = std::log10(std::max(out.values[i], 1e-300));
  return out;
}

const IndividualRecord* RunLog::find(std::int64_t id) const {
  for (const auto& r : records)
    if (r.id == id) return &r;
  return nullptr;
}

std::vector<FitnessVector> archive_points(const RunLog& log) {
  std::vector<FitnessVector> out;
  for (const auto& r : log.records)
    if (r.result.ok()) out.push_back(r.fitness);
  return out;
}

std::vector<std::size_t> archive_front(const RunLog& log) {
  std::vector<std::size_t> idx;
  std::map<std::string, bool> seen;
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const auto& r = log.records[i];
    if (!r.result.ok() || seen[r.hash]) continue;
    seen[r.hash] = true;
    idx.push_back(i);
  }
  std::vector<FitnessVector> fit;
  for (std::size_t i : idx) fit.push_back(log.records[i].fitness);
  std::vector<std::size_t> out;
  if (fit.empty()) return out;
  const auto fronts = non_dominated_sort(fit);
  for (std::size_t k : fronts.front()) out.push_back(idx[k]);
  return out;
}

double archive_hypervolume(const RunLog& log, const FitnessVector& reference) {
  std::vector<FitnessVector> pts;
  for (std::size_t i : archive_front(log))
    pts.push_back(indicator_point(log.records[i].fitness, log.config.indicator));
  return hypervolume(pts, reference);
}

void RunLog::write(std::ostream& out) const {
  auto objectives = nlohmann::json::array();
  for (std::size_t i = 0; i < layout.names.size(); ++i)
    objectives.push_back({{"name", layout.names[i]},
                          {"sense", layout.senses[i] == Sense::Maximize ? "max" : "min"}});
  nlohmann::json header{{"type", "run"},
                        {"strategy", strategy_name(strategy)},
                        {"seed", seed},
                        {"mode", mode_name(config.mode)},
                        {"epsilons", config.epsilons},
                        {"train_epochs", config.train_epochs},
                        {"population", config.population},
                        {"generations", config.generations},
                        {"offspring", config.offspring},
                        {"mutation_prob", config.mutation_prob},
                        {"indicator", config.indicator == IndicatorScale::Raw ? "raw" : "log_costs"},
                        {"objectives", objectives}};
  out << header.dump() << '\n';

  std::size_t next_record = 0;
  auto flush_records = [&](int generation) {
    for (; next_record < records.size() && records[next_record].generation <= generation;
         ++next_record) {
      const auto& r = records[next_record];
      nlohmann::json j{{"type", "individual"},
                       {"generation", r.generation},
                       {"id", r.id},
                       {"hash", r.hash},
                       {"genotype", to_json(r.genotype)},
                       {"status", r.result.ok() ? "ok" : "failed"},
                       {"clean_accuracy", number(r.result.clean_accuracy)},
                       {"adversarial_accuracies", numbers(r.result.adversarial_accuracies)},
                       {"fitness", numbers(r.fitness.values)},
                       {"rank", r.rank},
                       {"crowding", number(r.crowding)},
                       {"cached", r.cached}};
      if (!r.result.ok() && !r.result.error.empty()) j["error"] = r.result.error;
      out << j.dump() << '\n';
    }
  };
  for (const auto& g : generations) {
    flush_records(g.generation);
    nlohmann::json j{{"type", "generation"},
                     {"generation", g.generation},
                     {"evaluations", g.evaluations},
                     {"evaluator_calls", g.evaluator_calls},
                     {"front_sizes", g.front_sizes},
                     {"hypervolume", number(g.hypervolume)},
                     {"reference", numbers(g.reference)},
                     {"population", g.population}};
    out << j.dump() << '\n';
  }
  flush_records(std::numeric_limits<int>::max());
  out << nlohmann::json{{"type", "final"}, {"population", final_population}, {"front", front}}.dump()
      << '\n';
}

namespace {

double read_number(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw FormatError("expected a number, got " + j.dump());
}

std::vector<double> read_numbers(const nlohmann::json& j) {
  if (!j.is_array()) throw FormatError("expected a list of numbers");
  std::vector<double> out;
  for (const auto& x : j) out.push_back(read_number(x));
  return out;
}

}  // namespace

RunLog read_run_log(std::istream& in) {
  RunLog log;
  bool have_header = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("type"))
      throw FormatError("run log line " + std::to_string(lineno) + " is not a record");
    try {
      const auto type = j.at("type").get<std::string>();
      if (type == "run") {
        have_header = true;
        const auto strategy = j.at("strategy").get<std::string>();
        if (strategy != "nsga2" && strategy != "random")
          throw FormatError("unknown strategy " + strategy);
        log.strategy = strategy == "nsga2" ? Strategy::Nsga2 : Strategy::Random;
        log.seed = j.at("seed").get<std::uint64_t>();
        auto& c = log.config;
        c.mode = j.at("mode").get<std::string>() == "two_eps" ? SearchMode::TwoEps
                                                               : SearchMode::OneEps;
        c.epsilons = read_numbers(j.at("epsilons"));
        c.train_epochs = j.at("train_epochs").get<int>();
        c.population = j.at("population").get<int>();
        c.generations = j.at("generations").get<int>();
        c.offspring = j.at("offspring").get<int>();
        c.mutation_prob = j.at("mutation_prob").get<double>();
        c.indicator = j.at("indicator").get<std::string>() == "raw" ? IndicatorScale::Raw
                                                                     : IndicatorScale::LogCosts;
        for (const auto& o : j.at("objectives")) {
          log.layout.names.push_back(o.at("name").get<std::string>());
          log.layout.senses.push_back(o.at("sense").get<std::string>() == "max" ? Sense::Maximize
                                                                                : Sense::Minimize);
        }
      } else if (type == "individual") {
        if (!have_header) throw FormatError("individual record before the run header");
        IndividualRecord r;
        r.generation = j.at("generation").get<int>();
        r.id = j.at("id").get<std::int64_t>();
        r.hash = j.at("hash").get<std::string>();
        r.genotype = genotype_from_json(j.at("genotype"));
        r.result.id = r.id;
        r.result.status = j.at("status").get<std::string>() == "ok" ? EvaluationStatus::Ok
                                                                    : EvaluationStatus::Failed;
        r.result.clean_accuracy = read_number(j.at("clean_accuracy"));
        r.result.adversarial_accuracies = read_numbers(j.at("adversarial_accuracies"));
        if (j.contains("error")) r.result.error = j.at("error").get<std::string>();
        r.fitness.values = read_numbers(j.at("fitness"));
        r.fitness.senses = log.layout.senses;
        if (r.fitness.values.size() != r.fitness.senses.size())
          throw FormatError("fitness length does not match the objectives");
        r.rank = j.at("rank").get<int>();
        r.crowding = read_number(j.at("crowding"));
        r.cached = j.at("cached").get<bool>();
        log.records.push_back(std::move(r));
      } else if (type == "generation") {
        GenerationSummary g;
        g.generation = j.at("generation").get<int>();
        g.evaluations = j.at("evaluations").get<std::size_t>();
        g.evaluator_calls = j.at("evaluator_calls").get<std::size_t>();
        g.front_sizes = j.at("front_sizes").get<std::vector<std::size_t>>();
        g.hypervolume = read_number(j.at("hypervolume"));
        g.reference = read_numbers(j.at("reference"));
        g.population = j.at("population").get<std::vector<std::int64_t>>();
        log.generations.push_back(std::move(g));
      } else if (type == "final") {
        log.final_population = j.at("population").get<std::vector<std::int64_t>>();
        log.front = j.at("front").get<std::vector<std::int64_t>>();
      } else {
        throw FormatError("unknown record type " + type);
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("run log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_header) throw FormatError("run log has no header record");
  return log;
}

RunLog evolve(const SearchConfig& cfg, Evaluator& evaluator, const HardwareConfig& hw,
              std::uint64_t seed) {
  Campaign run(cfg, evaluator, hw, seed, Strategy::Nsga2);
  Rng rng(seed);

  std::vector<Genotype> initial;
  for (int i = 0; i < cfg.population; ++i) initial.push_back(run.random(rng));
  auto population = run.evaluate(initial, 0);
  assign_rank_and_crowding(population);
  for (const auto& ind : population) run.set_rank(ind);
  run.summarize(0, fitness_of(population), population);

  const auto n = static_cast<std::uint64_t>(population.size());
  for (int gen = 1; gen <= cfg.generations; ++gen) {
    // Invalid children are dropped and replaced by further crossovers so a
    // generation spends its full offspring budget; the attempt cap only
    // matters for spaces where crossover almost never yields a valid chain.
    std::vector<Genotype> children;
    const int max_attempts = 20 * std::max(cfg.offspring, 1);
    for (int attempt = 0;
         static_cast<int>(children.size()) < cfg.offspring && attempt < max_attempts; ++attempt) {
      const auto a = rng.index(n);
      auto b = rng.index(n > 1 ? n - 1 : 1);
      if (n > 1 && b >= a) ++b;
      auto off = crossover(population[a].genotype, population[b].genotype, cfg.space, rng.next());
      for (auto* child : {&off.first, &off.second}) {
        if (!*child || static_cast<int>(children.size()) >= cfg.offspring) continue;
        if (rng.bernoulli(cfg.mutation_prob)) {
          auto mutated = mutate(**child, cfg.space, rng.next());
          if (!mutated) continue;
          *child = std::move(mutated);
        }
        children.push_back(**child);
      }
    }

    auto offspring = run.evaluate(children, gen);
    std::vector<Individual> pool = population;
    pool.insert(pool.end(), offspring.begin(), offspring.end());
    assign_rank_and_crowding(pool);
    for (std::size_t i = population.size(); i < pool.size(); ++i) run.set_rank(pool[i]);

    population = select_next_population(std::move(population), std::move(offspring),
                                        static_cast<std::size_t>(cfg.population));
    run.summarize(gen, fitness_of(pool), population);
  }
  return run.finish(population);
}

RunLog random_search(const SearchConfig& cfg, Evaluator& evaluator, const HardwareConfig& hw,
                     std::uint64_t seed) {
  Campaign run(cfg, evaluator, hw, seed, Strategy::Random);
  Rng rng(seed);
  std::vector<Individual> archive;

  for (int gen = 0; gen <= cfg.generations; ++gen) {
    const int count = gen == 0 ? cfg.population : cfg.offspring;
    std::vector<Genotype> batch;
    for (int i = 0; i < count; ++i) batch.push_back(run.random(rng));
    auto fresh = run.evaluate(batch, gen);
    const std::size_t start = archive.size();
    archive.insert(archive.end(), fresh.begin(), fresh.end());
    assign_rank_and_crowding(archive);
    for (std::size_t i = start; i < archive.size(); ++i) run.set_rank(archive[i]);

    std::vector<Individual> best;
    for (const auto& ind : archive)
      if (ind.rank == 0) best.push_back(ind);
    run.summarize(gen, fitness_of(archive), best);
    if (gen == cfg.generations) return run.finish(best);
  }
  return run.finish({});
}

}  // namespace hwnas

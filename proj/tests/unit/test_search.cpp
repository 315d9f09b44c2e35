#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "hwnas/errors.hpp"
#include "hwnas/search.hpp"
#include "search_quality.hpp"

using namespace hwnas;

namespace {

class FailingEvaluator final : public Evaluator {
 public:
  EvaluationResult evaluate(const EvaluationRequest& req) override {
    ++calls;
    return EvaluationResult::failed(req.id, "no accelerator", req.epsilons.size());
  }
  int calls = 0;
};

class CountingEvaluator final : public Evaluator {
 public:
  EvaluationResult evaluate(const EvaluationRequest& req) override {
    ++calls;
    return inner.evaluate(req);
  }
  SurrogateEvaluator inner;
  int calls = 0;
};

std::string dump(const RunLog& log) {
  std::ostringstream s;
  log.write(s);
  return s.str();
}

SearchConfig small_config() {
  SearchConfig cfg;
  cfg.population = 6;
  cfg.generations = 4;
  cfg.offspring = 6;
  return cfg;
}

}  // namespace

TEST_CASE("configuration checks") {
  CHECK_NOTHROW(SearchConfig{}.check());
  auto cfg = SearchConfig{};
  cfg.population = 0;
  CHECK_THROWS_AS(cfg.check(), ConfigError);
  cfg = {};
  cfg.mutation_prob = 1.5;
  CHECK_THROWS_AS(cfg.check(), ConfigError);
  cfg = {};
  cfg.mode = SearchMode::TwoEps;
  CHECK_THROWS_AS(cfg.check(), ConfigError);
  cfg.epsilons = {0.03, 0.003};
  CHECK_THROWS_AS(cfg.check(), ConfigError);
  cfg.epsilons = {0.003, 0.03};
  CHECK_NOTHROW(cfg.check());
  cfg.epsilons = {0.003, NAN};
  CHECK_THROWS_AS(cfg.check(), ConfigError);
}

TEST_CASE("objective layout") {
  SearchConfig cfg;
  cfg.mode = SearchMode::TwoEps;
  cfg.epsilons = {0.003, 0.1};
  const auto l = objective_layout(cfg);
  CHECK(l.names ==
        std::vector<std::string>{"adv_acc@0.003", "adv_acc@0.1", "energy_mj", "latency_ms", "memory_mib"});
  CHECK(l.senses[0] == Sense::Maximize);
  CHECK(l.senses[4] == Sense::Minimize);
}

TEST_CASE("failed evaluations get the sentinel fitness") {
  const SearchConfig cfg;
  const auto f = assemble_fitness(cfg, EvaluationResult::failed(1, "x", 1), nullptr);
  CHECK(f.values[0] == 0.0);
  for (std::size_t i = 1; i < f.size(); ++i) CHECK(std::isinf(f.values[i]));

  FailingEvaluator ev;
  auto small = small_config();
  const auto log = evolve(small, ev, search_quality::demo_hardware(), 1);
  CHECK(log.records.size() >= 6);
  for (const auto& r : log.records) {
    CHECK_FALSE(r.result.ok());
    CHECK(r.fitness.values[0] == 0.0);
  }
  CHECK(log.front.empty());
  CHECK(log.final_population.size() == 6);
  for (const auto& g : log.generations) CHECK(g.hypervolume == 0.0);
}

TEST_CASE("one generation has the expected arity") {
  auto cfg = small_config();
  cfg.generations = 1;
  SurrogateEvaluator ev;
  const auto log = evolve(cfg, ev, search_quality::demo_hardware(), 3);
  CHECK(log.records.size() == 12);
  REQUIRE(log.generations.size() == 2);
  CHECK(log.generations[0].population.size() == 6);
  CHECK(log.generations[1].population.size() == 6);
  CHECK(log.final_population == log.generations[1].population);
  CHECK(log.generations[1].evaluations == 12);
  for (const auto& r : log.records) {
    CHECK(r.rank >= 0);
    CHECK(r.fitness.size() == 4);
    CHECK(r.hash == genotype_hash(r.genotype));
    CHECK(validate(r.genotype, cfg.space));
  }
}

TEST_CASE("archive hypervolume never decreases") {
  SurrogateEvaluator ev;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto a = evolve(SearchConfig{}, ev, search_quality::demo_hardware(), seed);
    const auto b = random_search(SearchConfig{}, ev, search_quality::demo_hardware(), seed);
    CHECK(search_quality::non_decreasing(a));
    CHECK(search_quality::non_decreasing(b));
    CHECK(a.generations.back().hypervolume > 0.0);
  }
}

TEST_CASE("the final front covers the initial population") {
  SurrogateEvaluator ev;
  const auto log = evolve(SearchConfig{}, ev, search_quality::demo_hardware(), 4);
  for (const auto& r : log.records) {
    if (r.generation != 0) continue;
    bool covered = false;
    for (auto id : log.front) {
      const auto& f = log.find(id)->fitness;
      covered = covered || f == r.fitness || dominates(f, r.fitness);
    }
    CHECK(covered);
  }
}

TEST_CASE("non-dominated members survive when they fit") {
  SurrogateEvaluator ev;
  const auto log = evolve(SearchConfig{}, ev, search_quality::demo_hardware(), 6);
  for (std::size_t g = 1; g < log.generations.size(); ++g) {
    std::vector<std::int64_t> pool = log.generations[g - 1].population;
    for (const auto& r : log.records)
      if (r.generation == static_cast<int>(g)) pool.push_back(r.id);
    std::vector<FitnessVector> fit;
    for (auto id : pool) fit.push_back(log.find(id)->fitness);
    const auto fronts = non_dominated_sort(fit);
    const auto& next = log.generations[g].population;
    if (fronts[0].size() > next.size()) continue;
    for (auto k : fronts[0]) CHECK(std::count(next.begin(), next.end(), pool[k]) == 1);
  }
}

TEST_CASE("searches are deterministic") {
  SurrogateEvaluator ev;
  const auto hw = search_quality::demo_hardware();
  CHECK(dump(evolve(SearchConfig{}, ev, hw, 0)) == dump(evolve(SearchConfig{}, ev, hw, 0)));
  CHECK(dump(random_search(SearchConfig{}, ev, hw, 0)) ==
        dump(random_search(SearchConfig{}, ev, hw, 0)));
  CHECK(dump(evolve(SearchConfig{}, ev, hw, 0)) != dump(evolve(SearchConfig{}, ev, hw, 1)));
}

TEST_CASE("random search spends the same budget") {
  SurrogateEvaluator ev;
  auto cfg = small_config();
  cfg.generations = 0;
  cfg.population = 10;
  const auto zero = random_search(cfg, ev, search_quality::demo_hardware(), 2);
  CHECK(zero.records.size() == 10);
  CHECK(zero.strategy == Strategy::Random);

  const auto full = random_search(SearchConfig{}, ev, search_quality::demo_hardware(), 2);
  CHECK(full.records.size() == 210);
  CHECK(full.generations.size() == 21);
  for (auto id : full.final_population) CHECK(full.find(id)->rank == 0);
}

TEST_CASE("duplicates are answered from the cache") {
  CountingEvaluator ev;
  SearchConfig cfg;
  cfg.space.max_layers = 2;
  cfg.space.kernel_choices = {3};
  cfg.space.stride_choices = {1};
  cfg.space.channel_range = {1, 2};
  cfg.space.capsule_range = {1, 1};
  const auto log = evolve(cfg, ev, search_quality::demo_hardware(), 0);
  std::size_t cached = 0;
  std::set<std::string> hashes;
  for (const auto& r : log.records) {
    cached += r.cached ? 1 : 0;
    hashes.insert(r.hash);
  }
  CHECK(cached > 0);
  CHECK(static_cast<std::size_t>(ev.calls) == log.records.size() - cached);
  CHECK(log.generations.back().evaluator_calls == static_cast<std::size_t>(ev.calls));
  CHECK(log.generations.back().evaluations == log.records.size());
  CHECK(hashes.size() == static_cast<std::size_t>(ev.calls));
}

TEST_CASE("run logs round-trip") {
  SurrogateEvaluator ev;
  auto cfg = small_config();
  cfg.mode = SearchMode::TwoEps;
  cfg.epsilons = {0.003, 0.03};
  const auto log = evolve(cfg, ev, search_quality::demo_hardware(), 8);
  std::istringstream in(dump(log));
  const auto back = read_run_log(in);
  CHECK(dump(back) == dump(log));
  CHECK(back.records.size() == log.records.size());
  CHECK(back.front == log.front);
  CHECK(back.layout.names == log.layout.names);

  std::istringstream empty("");
  CHECK_THROWS_AS(read_run_log(empty), FormatError);
  std::istringstream junk("{\"type\":\"run\"\n");
  CHECK_THROWS_AS(read_run_log(junk), FormatError);
}

TEST_CASE("failed records survive the round trip") {
  FailingEvaluator ev;
  const auto log = evolve(small_config(), ev, search_quality::demo_hardware(), 1);
  std::istringstream in(dump(log));
  const auto back = read_run_log(in);
  CHECK(std::isinf(back.records[0].fitness.values[1]));
  CHECK_FALSE(back.records[0].result.ok());
}

TEST_CASE("nsga2 beats random search on most seeds") {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto p = search_quality::paired_run(SearchConfig{}, seed);
    CHECK(p.nsga2_monotone);
    CHECK(p.random_monotone);
    wins += p.nsga2 >= p.random ? 1 : 0;
  }
  CHECK(wins >= 2);
}

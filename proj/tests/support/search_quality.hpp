#pragma once

#include <vector>

#include "hwnas/evaluator.hpp"
#include "hwnas/search.hpp"

namespace search_quality {

inline hwnas::HardwareConfig demo_hardware() {
  hwnas::HardwareConfig hw;
  hw.pe_power_mw = 250;
  hw.mem_access_energy_pj = 1000;
  return hw;
}

struct Pair {
  double nsga2 = 0.0;
  double random = 0.0;
  bool nsga2_monotone = true;
  bool random_monotone = true;
};

inline bool non_decreasing(const hwnas::RunLog& log) {
  for (std::size_t i = 1; i < log.generations.size(); ++i)
    if (log.generations[i].hypervolume < log.generations[i - 1].hypervolume) return false;
  return true;
}

/// Final archive hypervolume of both strategies for one seed, measured
/// against the worst indicator-space point seen by either run.
inline Pair paired_run(const hwnas::SearchConfig& cfg, std::uint64_t seed) {
  hwnas::SurrogateEvaluator ev;
  const auto hw = demo_hardware();
  const auto a = hwnas::evolve(cfg, ev, hw, seed);
  const auto b = hwnas::random_search(cfg, ev, hw, seed);
  std::vector<hwnas::FitnessVector> pts;
  for (const auto* log : {&a, &b})
    for (const auto& f : hwnas::archive_points(*log))
      pts.push_back(hwnas::indicator_point(f, cfg.indicator));
  const auto ref = hwnas::worst_point(pts);
  return {hwnas::archive_hypervolume(a, ref), hwnas::archive_hypervolume(b, ref),
          non_decreasing(a), non_decreasing(b)};
}

}  // namespace search_quality

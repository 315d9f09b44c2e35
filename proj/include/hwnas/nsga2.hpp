#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hwnas/evaluator.hpp"
#include "hwnas/genotype.hpp"

namespace hwnas {

enum class Sense { Minimize, Maximize };

struct FitnessVector {
  std::vector<double> values;
  std::vector<Sense> senses;

  std::size_t size() const { return values.size(); }
  friend bool operator==(const FitnessVector&, const FitnessVector&) = default;
};

/// True iff a is no worse than b everywhere and strictly better somewhere.
/// Throws LayoutMismatch when sizes or senses differ.
bool dominates(const FitnessVector& a, const FitnessVector& b);

/// Indices into the population, best front first.
using Front = std::vector<std::size_t>;

/// Fast non-dominated sort. Fronts partition the population; indices inside
/// a front are ascending.
std::vector<Front> non_dominated_sort(std::span<const FitnessVector> population);

/// Crowding distance of each member of `front` (same order). Boundary members
/// of every objective get +inf; an objective with zero or non-finite range
/// contributes nothing to interior members.
std::vector<double> crowding_distance(std::span<const FitnessVector> population,
                                      const Front& front);

struct Individual {
  std::int64_t id = -1;
  Genotype genotype;
  FitnessVector fitness;
  int rank = -1;
  double crowding = 0.0;
  int birth_generation = 0;
};

/// Sets rank and crowding of every individual from a sort of the whole set.
void assign_rank_and_crowding(std::span<Individual> individuals);

/// Fills whole fronts of parents + offspring in rank order; the front that
/// does not fit is cut by descending crowding distance (ties keep the
/// earlier individual). Rank and crowding are set on the returned members.
/// Throws std::invalid_argument if target is 0 or exceeds the pool.
std::vector<Individual> select_next_population(std::vector<Individual> parents,
                                               std::vector<Individual> offspring,
                                               std::size_t target);

/// Exact dominated volume between the front and the reference point, by
/// recursive slicing. Throws BadReference if some member does not weakly
/// dominate the reference, or if there are more than 6 objectives.
double hypervolume(std::span<const FitnessVector> front, const FitnessVector& reference);

/// Worst value of each objective over the points (all must share a layout).
FitnessVector worst_point(std::span<const FitnessVector> points);

}  // namespace hwnas

#include "hwnas/nsga2.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "hwnas/errors.hpp"

namespace hwnas {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxHypervolumeObjectives = 6;

// Oriented so that smaller is better.
double cost(const FitnessVector& f, std::size_t i) {
  return f.senses[i] == Sense::Maximize ? -f.values[i] : f.values[i];
}

void check_layout(const FitnessVector& a, const FitnessVector& b) {
  if (a.values.size() != b.values.size() || a.senses != b.senses ||
      a.senses.size() != a.values.size())
    throw LayoutMismatch("fitness vectors have different objective layouts");
}

using Point = std::vector<double>;

bool weakly_dominates(const Point& a, const Point& b, std::size_t dims) {
  for (std::size_t i = 0; i < dims; ++i)
    if (a[i] > b[i]) return false;
  return true;
}

// Minimization; every point weakly dominates `ref` in the first `dims` coordinates.
double slice_volume(std::vector<Point> pts, const Point& ref, std::size_t dims) {
  if (pts.empty()) return 0.0;
  if (dims == 1) {
    double best = pts[0][0];
    for (const auto& p : pts) best = std::min(best, p[0]);
    return ref[0] - best;
  }
  // drop points dominated in the active dimensions
  std::vector<bool> keep(pts.size(), true);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = 0; j < pts.size() && keep[i]; ++j) {
      if (i == j) continue;
      if (weakly_dominates(pts[j], pts[i], dims) &&
          (!weakly_dominates(pts[i], pts[j], dims) || j < i))
        keep[i] = false;
    }
  }
  std::vector<Point> kept;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (keep[i]) kept.push_back(std::move(pts[i]));
  const std::size_t axis = dims - 1;
  std::sort(kept.begin(), kept.end(),
            [axis](const Point& a, const Point& b) { return a[axis] < b[axis]; });
  double volume = 0.0;
  std::vector<Point> prefix;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    prefix.push_back(kept[i]);
    const double next = i + 1 < kept.size() ? kept[i + 1][axis] : ref[axis];
    const double depth = next - kept[i][axis];
    if (depth > 0.0) volume += slice_volume(prefix, ref, dims - 1) * depth;
  }
  return volume;
}

}  // namespace

bool dominates(const FitnessVector& a, const FitnessVector& b) {
  check_layout(a, b);
  bool strictly = false;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double ca = cost(a, i), cb = cost(b, i);
    if (ca > cb) return false;
    if (ca < cb) strictly = true;
  }
  return strictly;
}

std::vector<Front> non_dominated_sort(std::span<const FitnessVector> population) {
  const std::size_t n = population.size();
  std::vector<std::vector<std::size_t>> dominated(n);
  std::vector<std::size_t> dom_count(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (dominates(population[i], population[j])) {
        dominated[i].push_back(j);
        ++dom_count[j];
      } else if (dominates(population[j], population[i])) {
        dominated[j].push_back(i);
        ++dom_count[i];
      }
    }
  }
  std::vector<Front> fronts;
  Front current;
  for (std::size_t i = 0; i < n; ++i)
    if (dom_count[i] == 0) current.push_back(i);
  while (!current.empty()) {
    Front next;
    for (std::size_t i : current)
      for (std::size_t j : dominated[i])
        if (--dom_count[j] == 0) next.push_back(j);
    std::sort(next.begin(), next.end());
    fronts.push_back(std::move(current));
    current = std::move(next);
  }
  return fronts;
}

std::vector<double> crowding_distance(std::span<const FitnessVector> population,
                                      const Front& front) {
  const std::size_t n = front.size();
  std::vector<double> dist(n, 0.0);
  if (n == 0) return dist;
  if (n <= 2) {
    std::fill(dist.begin(), dist.end(), kInf);
    return dist;
  }
  const std::size_t m = population[front[0]].size();
  std::vector<std::size_t> order(n);
  for (std::size_t obj = 0; obj < m; ++obj) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return population[front[a]].values[obj] < population[front[b]].values[obj];
    });
    dist[order.front()] = kInf;
    dist[order.back()] = kInf;
    const double lo = population[front[order.front()]].values[obj];
    const double hi = population[front[order.back()]].values[obj];
    const double range = hi - lo;
    if (!(range > 0.0) || !std::isfinite(range)) continue;
    for (std::size_t k = 1; k + 1 < n; ++k) {
      const double gap = population[front[order[k + 1]]].values[obj] -
                         population[front[order[k - 1]]].values[obj];
      dist[order[k]] += gap / range;
    }
  }
  return dist;
}

void assign_rank_and_crowding(std::span<Individual> individuals) {
  std::vector<FitnessVector> fit;
  fit.reserve(individuals.size());
  for (const auto& ind : individuals) fit.push_back(ind.fitness);
  const auto fronts = non_dominated_sort(fit);
  for (std::size_t r = 0; r < fronts.size(); ++r) {
    const auto cd = crowding_distance(fit, fronts[r]);
    for (std::size_t k = 0; k < fronts[r].size(); ++k) {
      auto& ind = individuals[fronts[r][k]];
      ind.rank = static_cast<int>(r);
      ind.crowding = cd[k];
    }
  }
}

std::vector<Individual> select_next_population(std::vector<Individual> parents,
                                               std::vector<Individual> offspring,
                                               std::size_t target) {
  std::vector<Individual> pool = std::move(parents);
  pool.insert(pool.end(), std::make_move_iterator(offspring.begin()),
              std::make_move_iterator(offspring.end()));
  if (target == 0) throw std::invalid_argument("target population size must be > 0");
  if (target > pool.size())
    throw std::invalid_argument("not enough candidates to fill the next population");

  assign_rank_and_crowding(pool);
  std::vector<FitnessVector> fit;
  for (const auto& ind : pool) fit.push_back(ind.fitness);
  const auto fronts = non_dominated_sort(fit);

  std::vector<Individual> next;
  next.reserve(target);
  for (const auto& front : fronts) {
    if (next.size() + front.size() <= target) {
      for (std::size_t i : front) next.push_back(pool[i]);
      if (next.size() == target) break;
      continue;
    }
    Front order = front;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return pool[a].crowding > pool[b].crowding;
    });
    for (std::size_t k = 0; next.size() < target; ++k) next.push_back(pool[order[k]]);
    break;
  }
  return next;
}

double hypervolume(std::span<const FitnessVector> front, const FitnessVector& reference) {
  if (front.empty()) return 0.0;
  const std::size_t m = reference.size();
  if (m == 0 || m > kMaxHypervolumeObjectives)
    throw BadReference("hypervolume supports 1 to 6 objectives");
  Point ref(m);
  for (std::size_t i = 0; i < m; ++i) ref[i] = cost(reference, i);
  std::vector<Point> pts;
  for (const auto& f : front) {
    check_layout(f, reference);
    Point p(m);
    for (std::size_t i = 0; i < m; ++i) {
      p[i] = cost(f, i);
      if (!(p[i] <= ref[i]) || !std::isfinite(p[i]))
        throw BadReference("reference point is not dominated by every front member");
    }
    pts.push_back(std::move(p));
  }
  return slice_volume(std::move(pts), ref, m);
}

FitnessVector worst_point(std::span<const FitnessVector> points) {
  if (points.empty()) throw std::invalid_argument("worst_point of an empty set");
  FitnessVector w = points.front();
  for (const auto& p : points) {
    check_layout(p, w);
    for (std::size_t i = 0; i < w.size(); ++i)
      w.values[i] = w.senses[i] == Sense::Maximize ? std::min(w.values[i], p.values[i])
                                                   : std::max(w.values[i], p.values[i]);
  }
  return w;
}

}  // namespace hwnas

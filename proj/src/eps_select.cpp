#include "hwnas/eps_select.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

#include "hwnas/errors.hpp"

namespace hwnas {

namespace {

constexpr std::array<DatasetPreset, 3> kPresets{{
    {"mnist", 3e-3, 3e-2, 1e-1, 5, 28, 1, 10},
    {"fmnist", 1e-3, 1e-2, 3e-2, 5, 28, 1, 10},
    {"cifar10", 3e-5, 3e-4, 1e-3, 10, 32, 3, 10},
}};

// m * 10^k, correctly rounded for |k| <= 22
double decade_value(int mantissa, int exponent) {
  double p = 1.0;
  for (int i = 0; i < std::abs(exponent); ++i) p *= 10.0;
  return exponent < 0 ? mantissa / p : mantissa * p;
}

double distance(double a, double b, GridSpacing spacing) {
  if (spacing == GridSpacing::Linear) return std::abs(a - b);
  return std::abs(std::log(a) - std::log(b));
}

std::size_t nearest(const std::vector<double>& grid, double target, GridSpacing spacing) {
  std::size_t best = 0;
  double best_d = distance(grid[0], target, spacing);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double d = distance(grid[i], target, spacing);
    if (d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

}  // namespace

void EpsilonGrid::check() const {
  if (!(eps_min >= 0.0) || !(eps_max > eps_min) || !std::isfinite(eps_max))
    throw std::invalid_argument("epsilon grid requires 0 <= eps_min < eps_max");
  if (spacing != GridSpacing::Linear && !(eps_min > 0.0))
    throw std::invalid_argument("log-spaced epsilon grids need eps_min > 0");
  if (spacing != GridSpacing::OneThree && points < 3)
    throw std::invalid_argument("epsilon grid needs at least 3 points");
  if (spacing == GridSpacing::OneThree && values().size() < 3)
    throw std::invalid_argument("1-3 epsilon grid spans fewer than 3 points");
}

std::vector<double> EpsilonGrid::values() const {
  std::vector<double> out;
  switch (spacing) {
    case GridSpacing::Linear:
      for (int i = 0; i < points; ++i)
        out.push_back(i == points - 1 ? eps_max
                                      : eps_min + (eps_max - eps_min) * i / (points - 1));
      break;
    case GridSpacing::Log: {
      const double ratio = std::log(eps_max / eps_min);
      for (int i = 0; i < points; ++i)
        out.push_back(i == 0            ? eps_min
                      : i == points - 1 ? eps_max
                                        : eps_min * std::exp(ratio * i / (points - 1)));
      break;
    }
    case GridSpacing::OneThree: {
      const int lo = static_cast<int>(std::floor(std::log10(eps_min))) - 1;
      const int hi = static_cast<int>(std::ceil(std::log10(eps_max))) + 1;
      const double slack = 1e-9;
      for (int k = lo; k <= hi; ++k)
        for (int m : {1, 3}) {
          const double v = decade_value(m, k);
          if (v >= eps_min * (1 - slack) && v <= eps_max * (1 + slack)) out.push_back(v);
        }
      break;
    }
  }
  return out;
}

AccuracyCurve sweep_accuracy(Evaluator& evaluator, const Genotype& probe, const EpsilonGrid& grid,
                             int train_epochs, std::uint64_t seed) {
  grid.check();
  EvaluationRequest req;
  req.id = 0;
  req.genotype = probe;
  req.epsilons = grid.values();
  req.epsilons.insert(req.epsilons.begin(), 0.0);
  req.train_epochs = train_epochs;
  req.seed = seed;
  const auto res = evaluator.evaluate(req);
  if (!res.ok()) throw EvaluatorError("accuracy sweep failed: " + res.error);
  if (res.adversarial_accuracies.size() != req.epsilons.size())
    throw ProtocolError("sweep result length does not match the grid");

  AccuracyCurve curve;
  curve.spacing = grid.spacing;
  curve.clean_accuracy = res.adversarial_accuracies.front();
  curve.epsilons.assign(req.epsilons.begin() + 1, req.epsilons.end());
  curve.accuracies.assign(res.adversarial_accuracies.begin() + 1, res.adversarial_accuracies.end());
  return curve;
}

EpsilonSelection select_epsilons(const AccuracyCurve& curve) {
  const auto& eps = curve.epsilons;
  const auto& acc = curve.accuracies;
  if (eps.size() < 3 || eps.size() != acc.size())
    throw std::invalid_argument("curve needs >= 3 grid points with one accuracy each");
  for (std::size_t i = 1; i < eps.size(); ++i)
    if (!(eps[i] > eps[i - 1])) throw std::invalid_argument("curve epsilons must be ascending");
  if (curve.spacing != GridSpacing::Linear && !(eps.front() > 0.0))
    throw std::invalid_argument("log-spaced curve needs positive epsilons");

  const double acc0 = curve.clean_accuracy;
  bool drops = false;
  for (double a : acc) drops = drops || a < acc0;
  if (!(acc0 > 0.0) || !drops)
    throw DegenerateCurve("accuracy never drops below the clean value; extend the epsilon grid");

  const double half = acc0 / 2.0;
  std::size_t nas = 0;
  for (std::size_t i = 1; i < acc.size(); ++i)
    if (std::abs(acc[i] - half) < std::abs(acc[nas] - half)) nas = i;

  EpsilonSelection sel;
  sel.curve = curve;
  sel.eps_nas = eps[nas];
  const double low_target = sel.eps_nas / 10.0, high_target = 3.0 * sel.eps_nas;
  sel.eps_low = eps[nearest(eps, low_target, curve.spacing)];
  sel.eps_high = eps[nearest(eps, high_target, curve.spacing)];
  sel.low_clamped = low_target < eps.front();
  sel.high_clamped = high_target > eps.back();
  return sel;
}

std::span<const DatasetPreset> dataset_presets() { return kPresets; }

const DatasetPreset* find_dataset_preset(std::string_view name) {
  for (const auto& p : kPresets)
    if (p.name == name) return &p;
  return nullptr;
}

}  // namespace hwnas

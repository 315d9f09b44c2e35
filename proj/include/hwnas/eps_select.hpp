#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "hwnas/evaluator.hpp"

namespace hwnas {

enum class GridSpacing {
  Log,
  Linear,
  OneThree,  // 1, 3, 10, 30, ... within [eps_min, eps_max]
};

struct EpsilonGrid {
  double eps_min = 1e-5;
  double eps_max = 1e-1;
  int points = 9;  // ignored for OneThree
  GridSpacing spacing = GridSpacing::OneThree;

  /// Throws std::invalid_argument on an unusable grid.
  void check() const;
  /// Ascending grid values.
  std::vector<double> values() const;
};

struct AccuracyCurve {
  double clean_accuracy = 0.0;  // Acc_0, the epsilon = 0 entry
  std::vector<double> epsilons;  // ascending, excludes 0
  std::vector<double> accuracies;
  GridSpacing spacing = GridSpacing::OneThree;
};

/// One evaluator call with [0, grid...].
AccuracyCurve sweep_accuracy(Evaluator& evaluator, const Genotype& probe, const EpsilonGrid& grid,
                             int train_epochs, std::uint64_t seed);

struct EpsilonSelection {
  double eps_nas = 0.0;
  double eps_low = 0.0;
  double eps_high = 0.0;
  bool low_clamped = false;   // eps_nas / 10 lies below the grid
  bool high_clamped = false;  // 3 * eps_nas lies above the grid
  AccuracyCurve curve;
};

/// eps_nas: grid point whose accuracy is closest to half the clean accuracy.
/// eps_low / eps_high: grid points nearest eps_nas / 10 and 3 * eps_nas
/// (log distance on Log/OneThree grids). Ties go to the smaller epsilon.
/// Throws DegenerateCurve if no grid point lowers the accuracy.
EpsilonSelection select_epsilons(const AccuracyCurve& curve);

/// Perturbation values and fast-training budgets per dataset.
struct DatasetPreset {
  std::string_view name;
  double eps_low;
  double eps_nas;
  double eps_high;
  int train_epochs;
  int input_size;
  int input_channels;
  int num_classes;
};

std::span<const DatasetPreset> dataset_presets();
/// nullptr if unknown.
const DatasetPreset* find_dataset_preset(std::string_view name);

}  // namespace hwnas

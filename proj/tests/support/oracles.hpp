#pragma once

// Reference implementations used to cross-check the library. Written from
// the defining formulas, deliberately without sharing code with src/.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hwnas/genotype.hpp"
#include "hwnas/nsga2.hpp"

namespace oracle {

struct LayerNumbers {
  std::int64_t w = 0, s = 0, f = 0, w_pe = 0, m_acc = 0, c = 0;
};

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if (q * b < a) ++q;
  return q;
}

/// 16x16 array, formulas written out literally.
inline LayerNumbers layer(const hwnas::LayerDescriptor& d) {
  LayerNumbers n;
  const std::int64_t k = hwnas::is_conv_type(d.type) ? d.kernel_size : d.ifm_size;
  n.s = k * k * d.in_channels * d.in_capsules;
  n.w = n.s * d.out_channels * d.out_capsules;
  n.f = hwnas::is_conv_type(d.type) ? std::int64_t(d.ofm_size) * d.ofm_size : 1;
  n.w_pe = ceil_div(n.w, 16 * std::min<std::int64_t>(16, n.s));
  n.m_acc = n.f == 1 ? 256 : 16 * std::max<std::int64_t>(n.s - 15, 1);
  n.c = n.w * n.w_pe + n.f;
  return n;
}

inline bool dominates(const std::vector<double>& a, const std::vector<double>& b,
                      const std::vector<hwnas::Sense>& senses) {
  bool better = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool max = senses[i] == hwnas::Sense::Maximize;
    const double x = max ? -a[i] : a[i];
    const double y = max ? -b[i] : b[i];
    if (x > y) return false;
    if (x < y) better = true;
  }
  return better;
}

/// Peels fronts by checking every pair against the remaining set.
inline std::vector<std::vector<std::size_t>> fronts(const std::vector<hwnas::FitnessVector>& pop) {
  std::vector<bool> left(pop.size(), true);
  std::size_t remaining = pop.size();
  std::vector<std::vector<std::size_t>> out;
  while (remaining > 0) {
    std::vector<std::size_t> front;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      if (!left[i]) continue;
      bool dominated = false;
      for (std::size_t j = 0; j < pop.size() && !dominated; ++j)
        if (left[j] && j != i && dominates(pop[j].values, pop[i].values, pop[i].senses))
          dominated = true;
      if (!dominated) front.push_back(i);
    }
    for (auto i : front) left[i] = false;
    remaining -= front.size();
    out.push_back(front);
  }
  return out;
}

/// Minimization form of a point.
inline std::vector<double> as_min(const hwnas::FitnessVector& f) {
  std::vector<double> v(f.values);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (f.senses[i] == hwnas::Sense::Maximize) v[i] = -v[i];
  return v;
}

/// Union volume of boxes [p, ref] by inclusion-exclusion over all subsets.
inline double hypervolume_ie(const std::vector<hwnas::FitnessVector>& pts,
                             const hwnas::FitnessVector& ref) {
  const std::size_t n = pts.size();
  if (n == 0) return 0.0;
  std::vector<std::vector<double>> p;
  for (const auto& f : pts) p.push_back(as_min(f));
  const auto r = as_min(ref);
  double total = 0.0;
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
    std::vector<double> corner(r.size(), -INFINITY);
    int bits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(mask >> i & 1)) continue;
      ++bits;
      for (std::size_t k = 0; k < r.size(); ++k) corner[k] = std::max(corner[k], p[i][k]);
    }
    double vol = 1.0;
    for (std::size_t k = 0; k < r.size(); ++k) vol *= std::max(0.0, r[k] - corner[k]);
    total += (bits % 2 == 1) ? vol : -vol;
  }
  return total;
}

inline double hypervolume_mc(const std::vector<hwnas::FitnessVector>& pts,
                             const hwnas::FitnessVector& ref, int samples, std::uint64_t seed) {
  std::vector<std::vector<double>> p;
  for (const auto& f : pts) p.push_back(as_min(f));
  const auto r = as_min(ref);
  std::vector<double> lo(r.size(), INFINITY);
  for (const auto& q : p)
    for (std::size_t k = 0; k < r.size(); ++k) lo[k] = std::min(lo[k], q[k]);
  double box = 1.0;
  for (std::size_t k = 0; k < r.size(); ++k) box *= r[k] - lo[k];
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int hits = 0;
  std::vector<double> x(r.size());
  for (int s = 0; s < samples; ++s) {
    for (std::size_t k = 0; k < r.size(); ++k) x[k] = lo[k] + u(gen) * (r[k] - lo[k]);
    for (const auto& q : p) {
      bool in = true;
      for (std::size_t k = 0; k < r.size() && in; ++k) in = q[k] <= x[k];
      if (in) {
        ++hits;
        break;
      }
    }
  }
  return box * hits / samples;
}

inline hwnas::FitnessVector fv(std::vector<double> v, std::vector<hwnas::Sense> s) {
  return {std::move(v), std::move(s)};
}

inline hwnas::FitnessVector fv_min(std::vector<double> v) {
  std::vector<hwnas::Sense> s(v.size(), hwnas::Sense::Minimize);
  return {std::move(v), std::move(s)};
}

inline hwnas::FitnessVector fv_max(std::vector<double> v) {
  std::vector<hwnas::Sense> s(v.size(), hwnas::Sense::Maximize);
  return {std::move(v), std::move(s)};
}

}  // namespace oracle

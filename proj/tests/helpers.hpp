#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "lebound/model.hpp"

namespace testing {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

inline double normal_logpdf(double x, double mean, double var) {
  return -0.5 * (kLog2Pi + std::log(var) + (x - mean) * (x - mean) / var);
}

/// M groups of N rows with standard normal covariates and outcomes.
inline lebound::HierarchicalDataset random_dataset(std::size_t M, std::size_t N, std::size_t d,
                                                   std::uint64_t seed, bool binary = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  lebound::HierarchicalDataset data;
  data.d_z = d;
  for (std::size_t i = 0; i < M; ++i) {
    std::vector<double> x(N * d);
    std::vector<double> y(N);
    for (double& v : x) v = normal(rng);
    for (double& v : y) v = binary ? (normal(rng) > 0 ? 1.0 : 0.0) : normal(rng);
    data.groups.emplace_back(std::move(x), std::move(y));
  }
  return data;
}

inline std::vector<double> normals(std::size_t n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> normal(0.0, sd);
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

/// Composite trapezoid rule on [lo, hi] with n intervals.
inline double trapezoid(const std::function<double(double)>& f, double lo, double hi, int n) {
  const double h = (hi - lo) / n;
  double s = 0.5 * (f(lo) + f(hi));
  for (int k = 1; k < n; ++k) s += f(lo + k * h);
  return s * h;
}

struct Stats {
  double mean = 0.0;
  double se = 0.0;
};

inline Stats stats(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  const double var = ss / static_cast<double>(xs.size() - 1);
  return {m, std::sqrt(var / static_cast<double>(xs.size()))};
}

}  // namespace testing

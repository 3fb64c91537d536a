#pragma once

// Plain-double counterparts of the tape primitives. Each forward kernel here is
// also what the tape uses to compute node values, so a computation templated
// on the scalar type gives bit-identical values for double and Var.

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>

namespace lebound {

inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

inline double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

inline double sigmoid(double x) { return std::exp(log_sigmoid(x)); }

inline double exp(double x) { return std::exp(x); }
inline double log(double x) { return std::log(x); }
inline double sqrt(double x) { return std::sqrt(x); }
inline double tanh(double x) { return std::tanh(x); }

inline double pow_int(double x, int n) {
  double result = 1.0;
  const bool invert = n < 0;
  for (int k = 0; k < (invert ? -n : n); ++k) result *= x;
  return invert ? 1.0 / result : result;
}

inline double sum(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("sum of an empty list");
  double s = 0.0;
  for (double x : xs) s += x;
  return s;
}

inline double dot(std::span<const double> xs, std::span<const double> ys) {
  if (xs.empty()) throw std::invalid_argument("dot of an empty list");
  if (xs.size() != ys.size()) throw std::invalid_argument("dot length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) s += xs[i] * ys[i];
  return s;
}

inline double affine(double offset, std::span<const double> xs,
                     std::span<const double> weights) {
  if (xs.size() != weights.size()) throw std::invalid_argument("affine length mismatch");
  double s = offset;
  for (std::size_t i = 0; i < xs.size(); ++i) s += weights[i] * xs[i];
  return s;
}

inline double logsumexp(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("logsumexp of an empty list");
  double m = xs[0];
  for (double x : xs) m = x > m ? x : m;
  if (std::isinf(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace lebound

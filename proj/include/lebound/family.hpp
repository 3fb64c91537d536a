#pragma once

// Factorized Gaussian variational families q(θ) Π_i q(z_i), parameterized by
// mean and log-scale. The same template serves plain values (double) and tape
// variables (Var).

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "lebound/math.hpp"
#include "lebound/model.hpp"
#include "lebound/tape.hpp"

namespace lebound {

template <class T>
struct Gaussian {
  std::vector<T> mean;
  std::vector<T> log_scale;

  std::size_t dim() const { return mean.size(); }
};

using GaussianValues = Gaussian<double>;

/// Sampler-side UHA parameters after the constraining transforms:
/// step sizes ε > 0 and damping η in (0, 1).
template <class T>
struct UhaParams {
  std::vector<T> step_size;
  T damping{};
};

/// Stored, unconstrained UHA parameters.
struct UhaValues {
  std::vector<double> log_step_size;
  double damping_logit = 0.0;
};

struct VariationalState {
  GaussianValues global;
  std::vector<GaussianValues> locals;
  std::optional<UhaValues> uha;

  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  /// Overwrites every parameter from `flat`, in flatten() order.
  void assign(std::span<const double> flat);
};

/// Read view of a state on scalar type T.
template <class T>
struct StateView {
  Gaussian<T> global;
  std::vector<Gaussian<T>> locals;
  std::optional<UhaParams<T>> uha;
};

/// Copies values into a double-typed view (constraining transforms applied).
StateView<double> view_of(const VariationalState& state);

/// Puts every parameter on `tape` as a leaf, in flatten() order, and returns
/// the view plus the leaf handles.
StateView<Var> lift(Tape& tape, const VariationalState& state,
                    std::vector<std::uint32_t>* leaf_handles);

template <class T>
UhaParams<T> constrain_uha(std::span<const T> log_step_size, const T& damping_logit) {
  UhaParams<T> out;
  out.step_size.reserve(log_step_size.size());
  for (const T& v : log_step_size) out.step_size.push_back(exp(v));
  out.damping = sigmoid(damping_logit);
  return out;
}

/// mean + exp(log_scale) ⊙ noise.
template <class T>
std::vector<T> sample_reparam(const Gaussian<T>& params, std::span<const double> noise) {
  if (noise.size() != params.dim() || params.log_scale.size() != params.dim()) {
    throw std::invalid_argument("sample_reparam: noise length " + std::to_string(noise.size()) +
                                " does not match dimension " + std::to_string(params.dim()));
  }
  std::vector<T> out;
  out.reserve(params.dim());
  for (std::size_t d = 0; d < params.dim(); ++d) {
    out.push_back(params.mean[d] + exp(params.log_scale[d]) * noise[d]);
  }
  return out;
}

/// Σ_d [−log_scale_d − ½ log 2π − ½ ((x_d − mean_d) / scale_d)²].
template <class T>
T log_density(const Gaussian<T>& params, std::span<const T> point) {
  if (point.size() != params.dim() || params.log_scale.size() != params.dim()) {
    throw std::invalid_argument("log_density: dimension mismatch");
  }
  std::vector<T> std_resid;
  std_resid.reserve(point.size());
  for (std::size_t d = 0; d < point.size(); ++d) {
    std_resid.push_back((point[d] - params.mean[d]) * exp(-params.log_scale[d]));
  }
  const std::span<const T> r(std_resid);
  return dot(r, r) * -0.5 - sum(std::span<const T>(params.log_scale)) -
         0.5 * static_cast<double>(point.size()) * kLogTwoPi;
}

/// ∇_x log q(x) = −(x − mean) / scale².
template <class T>
std::vector<T> grad_log_density(const Gaussian<T>& params, std::span<const T> point) {
  std::vector<T> out;
  out.reserve(point.size());
  for (std::size_t d = 0; d < point.size(); ++d) {
    out.push_back((params.mean[d] - point[d]) * exp(params.log_scale[d] * -2.0));
  }
  return out;
}

enum class InitMode { std_normal, prior_matched };

struct UhaInit {
  double step_size = 0.05;
  double damping = 0.9;
};

/// Fresh state for `model`. `uha`, when set, adds per-dimension step sizes
/// (shared across groups) and a damping coefficient.
VariationalState init_state(const ModelInstance& model, InitMode mode,
                            std::optional<UhaInit> uha = std::nullopt);

}  // namespace lebound

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lebound/bounds.hpp"
#include "lebound/family.hpp"
#include "lebound/model.hpp"

namespace lebound {

/// Bias-corrected Adam, used for gradient ascent on a bound.
struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t t = 0;
  double eta = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;

  explicit AdamState(std::size_t n, double step_size = 0.001)
      : first_moment(n, 0.0), second_moment(n, 0.0), eta(step_size) {}
};

/// One ascent step: params += η m̂ / (sqrt(v̂) + ε̂).
void adam_step(AdamState& adam, std::span<double> params, std::span<const double> grad);

struct TrainConfig {
  std::size_t steps = 50000;
  std::size_t pretrain_steps = 5000;
  std::optional<std::size_t> minibatch = 10;
  std::size_t eval_samples = 1000;
  std::size_t log_every = 100;
  double learning_rate = 0.001;
};

struct TracePoint {
  std::size_t step;
  double estimate;
};

struct TrainResult {
  VariationalState state;
  std::vector<TracePoint> trace;  // steps are counted across both phases
  double wall_seconds = 0.0;      // phase 2 only
};

/// Phase 1 maximizes plain VI for pretrain_steps; phase 2 maximizes `spec` for
/// config.steps from the phase-1 optimum with a fresh Adam state. Global
/// scope never subsamples; local scopes use config.minibatch unless the spec
/// sets its own.
TrainResult train(const ModelInstance& model, const BoundSpec& spec, const TrainConfig& config,
                  std::uint64_t seed);

struct FinalEstimate {
  double mean = 0.0;
  std::optional<double> std_error;  // unavailable for a single sample
};

/// `count` independent full-batch estimates keyed by (seed, index). The
/// parallel and serial versions return bit-identical vectors.
std::vector<double> mc_estimates(const VariationalState& state, const ModelInstance& model,
                                 const BoundSpec& spec, std::size_t count, std::uint64_t seed);
std::vector<double> mc_estimates_serial(const VariationalState& state, const ModelInstance& model,
                                        const BoundSpec& spec, std::size_t count,
                                        std::uint64_t seed);

FinalEstimate summarize(std::span<const double> samples);

/// Mean and standard error of eval_samples full-batch estimates of `spec`.
FinalEstimate evaluate_final(const VariationalState& state, const ModelInstance& model,
                             const BoundSpec& spec, std::size_t eval_samples, std::uint64_t seed);

}  // namespace lebound

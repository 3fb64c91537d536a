#include "lebound/train.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace lebound {

void adam_step(AdamState& adam, std::span<double> params, std::span<const double> grad) {
  if (params.size() != grad.size() || params.size() != adam.first_moment.size()) {
    throw std::invalid_argument("adam_step: parameter, gradient and moment lengths differ");
  }
  ++adam.t;
  const double correction1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.t));
  const double correction2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    // Ascent: descend on the negated objective.
    const double g = -grad[k];
    double& m = adam.first_moment[k];
    double& v = adam.second_moment[k];
    m = adam.beta1 * m + (1.0 - adam.beta1) * g;
    v = adam.beta2 * v + (1.0 - adam.beta2) * g * g;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[k] -= adam.eta * m_hat / (std::sqrt(v_hat) + adam.eps_hat);
  }
}

namespace {

void run_phase(const ModelInstance& model, const BoundSpec& spec, std::size_t steps,
               std::size_t first_step, Purpose purpose, const TrainConfig& config,
               std::uint64_t seed, VariationalState& state, std::vector<TracePoint>& trace) {
  Tape tape;
  AdamState adam(state.parameter_count(), config.learning_rate);
  std::vector<double> params = state.flatten();
  for (std::size_t s = 0; s < steps; ++s) {
    const NoiseStreams noise(seed, purpose, s);
    const BoundEstimate est = bound_estimate(state, model, spec, noise, tape);
    adam_step(adam, params, est.gradient);
    state.assign(params);
    const std::size_t step = first_step + s + 1;
    if (config.log_every > 0 && step % config.log_every == 0) trace.push_back({step, est.value});
  }
}

}  // namespace

TrainResult train(const ModelInstance& model, const BoundSpec& spec, const TrainConfig& config,
                  std::uint64_t seed) {
  if (config.steps < 1) throw std::invalid_argument("train: steps must be >= 1");
  BoundSpec main = spec;
  if (main.scope == Scope::global) {
    main.minibatch.reset();
  } else if (!main.minibatch && config.minibatch && *config.minibatch < model.num_groups()) {
    main.minibatch = config.minibatch;
  }
  main.validate(model.num_groups());

  BoundSpec pre = BoundSpec::vi();
  if (config.minibatch && *config.minibatch < model.num_groups()) pre.minibatch = config.minibatch;
  pre.validate(model.num_groups());

  std::optional<UhaInit> uha_init;
  if (main.op == OperatorKind::uha) uha_init = main.uha_init;

  TrainResult result;
  result.state = init_state(model, InitMode::std_normal, uha_init);
  run_phase(model, pre, config.pretrain_steps, 0, Purpose::pretrain, config, seed, result.state,
            result.trace);

  const auto start = std::chrono::steady_clock::now();
  run_phase(model, main, config.steps, config.pretrain_steps, Purpose::train, config, seed,
            result.state, result.trace);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

namespace {

BoundSpec full_batch(const BoundSpec& spec) {
  BoundSpec out = spec;
  out.minibatch.reset();
  return out;
}

}  // namespace

std::vector<double> mc_estimates(const VariationalState& state, const ModelInstance& model,
                                 const BoundSpec& spec, std::size_t count, std::uint64_t seed) {
  const BoundSpec eval = full_batch(spec);
  eval.validate(model.num_groups());
  std::vector<double> out(count);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(count); ++n) {
    out[static_cast<std::size_t>(n)] = estimate_value(
        state, model, eval, NoiseStreams(seed, Purpose::evaluate, static_cast<std::uint64_t>(n)));
  }
  return out;
}

std::vector<double> mc_estimates_serial(const VariationalState& state, const ModelInstance& model,
                                        const BoundSpec& spec, std::size_t count,
                                        std::uint64_t seed) {
  const BoundSpec eval = full_batch(spec);
  std::vector<double> out(count);
  for (std::size_t n = 0; n < count; ++n) {
    out[n] = estimate_value(state, model, eval, NoiseStreams(seed, Purpose::evaluate, n));
  }
  return out;
}

FinalEstimate summarize(std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("summarize: no samples");
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= n;
  FinalEstimate out{mean, std::nullopt};
  if (samples.size() > 1) {
    double ss = 0.0;
    for (double v : samples) ss += (v - mean) * (v - mean);
    out.std_error = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

FinalEstimate evaluate_final(const VariationalState& state, const ModelInstance& model,
                             const BoundSpec& spec, std::size_t eval_samples, std::uint64_t seed) {
  const std::vector<double> samples = mc_estimates(state, model, spec, eval_samples, seed);
  return summarize(samples);
}

}  // namespace lebound

#include "lebound/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lebound/math.hpp"

namespace lebound {

const char* to_string(OperatorKind op) {
  switch (op) {
    case OperatorKind::vi: return "VI";
    case OperatorKind::iw: return "IW";
    case OperatorKind::uha: return "UHA";
  }
  return "?";
}

const char* to_string(Scope scope) { return scope == Scope::local ? "local" : "global"; }

void BoundSpec::validate(std::size_t num_groups) const {
  if (K < 1) throw BoundError("K must be >= 1, got " + std::to_string(K));
  if (op == OperatorKind::vi && K != 1) throw BoundError("VI takes no K");
  if (op == OperatorKind::uha && leapfrog_steps < 1) {
    throw BoundError("leapfrog_steps must be >= 1");
  }
  if (scope == Scope::global) {
    if (op == OperatorKind::uha) throw BoundError("UHA is only available as a local operator");
    if (minibatch) throw BoundError("global IW is incompatible with subsampling");
  }
  if (minibatch && (*minibatch < 1 || *minibatch > num_groups)) {
    throw BoundError("minibatch size " + std::to_string(*minibatch) + " outside [1, " +
                     std::to_string(num_groups) + "]");
  }
}

std::string BoundSpec::label() const {
  if (op == OperatorKind::vi) return "VI";
  return std::string(to_string(op)) + "-" + to_string(scope) + "-K" + std::to_string(K);
}

template <class T>
T vi_local_operator(const Gaussian<T>& q, const ModelInstance& model, std::span<const T> theta,
                    std::size_t group, std::span<const double> noise) {
  const std::vector<T> z = sample_reparam(q, noise);
  const std::span<const T> zs(z);
  return model.log_group_joint(theta, group, zs) - log_density(q, zs);
}

template <class T>
T iw_local_operator(const Gaussian<T>& q, const ModelInstance& model, std::span<const T> theta,
                    std::size_t group, std::span<const std::vector<double>> noises) {
  if (noises.empty()) throw BoundError("IW needs at least one sample");
  std::vector<T> log_weights;
  log_weights.reserve(noises.size());
  for (const auto& eps : noises) log_weights.push_back(vi_local_operator(q, model, theta, group, eps));
  return logsumexp(std::span<const T>(log_weights)) - std::log(static_cast<double>(noises.size()));
}

template <class T>
T local_operator(const BoundSpec& spec, const Gaussian<T>& q, const std::optional<UhaParams<T>>& uha,
                 const ModelInstance& model, std::span<const T> theta, std::size_t group,
                 const NoiseStreams& noise) {
  const std::size_t d = q.dim();
  switch (spec.op) {
    case OperatorKind::vi:
      return vi_local_operator(q, model, theta, group,
                               NormalSource(noise.rng(Stream::local, group)).draw(d));
    case OperatorKind::iw: {
      NormalSource source(noise.rng(Stream::local, group));
      std::vector<std::vector<double>> noises;
      noises.reserve(static_cast<std::size_t>(spec.K));
      for (int k = 0; k < spec.K; ++k) noises.push_back(source.draw(d));
      return iw_local_operator(q, model, theta, group, std::span<const std::vector<double>>(noises));
    }
    case OperatorKind::uha:
      if (!uha) throw BoundError("UHA operator needs UHA parameters in the state");
      return uha_operator(q, model, theta, group, *uha, spec.uha_settings(),
                          draw_uha_noise(noise, group, d, spec.K));
  }
  throw BoundError("unknown operator");
}

std::vector<std::size_t> sample_minibatch(std::size_t num_groups, std::size_t size, Rng& rng) {
  if (size < 1 || size > num_groups) {
    throw BoundError("minibatch size " + std::to_string(size) + " outside [1, " +
                     std::to_string(num_groups) + "]");
  }
  std::vector<std::size_t> all(num_groups);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> picked;
  picked.reserve(size);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), size, rng);
  std::sort(picked.begin(), picked.end());
  return picked;
}

namespace {

template <class T>
T global_term(const Gaussian<T>& q_theta, const ModelInstance& model, std::span<const double> noise,
              std::vector<T>& theta_out) {
  theta_out = sample_reparam(q_theta, noise);
  const std::span<const T> theta(theta_out);
  return model.log_prior_global(theta) - log_density(q_theta, theta);
}

std::optional<std::vector<std::size_t>> draw_subset(const BoundSpec& spec, std::size_t num_groups,
                                                    const NoiseStreams& noise) {
  if (!spec.minibatch || *spec.minibatch >= num_groups) return std::nullopt;
  Rng rng = noise.rng(Stream::minibatch);
  return sample_minibatch(num_groups, *spec.minibatch, rng);
}

}  // namespace

template <class T>
T local_bound(const StateView<T>& state, const ModelInstance& model, const BoundSpec& spec,
              const NoiseStreams& noise, std::span<const std::size_t> subset) {
  const std::size_t M = model.num_groups();
  if (state.locals.size() != M) throw BoundError("state has the wrong number of local factors");
  std::vector<T> theta;
  const T global = global_term(state.global, model,
                               NormalSource(noise.rng(Stream::theta)).draw(model.d_theta()), theta);
  const std::span<const T> th(theta);

  std::vector<T> locals;
  if (subset.empty()) {
    locals.reserve(M);
    for (std::size_t i = 0; i < M; ++i) {
      locals.push_back(local_operator(spec, state.locals[i], state.uha, model, th, i, noise));
    }
    return global + sum(std::span<const T>(locals));
  }
  locals.reserve(subset.size());
  for (std::size_t i : subset) {
    if (i >= M) throw BoundError("minibatch index out of range");
    locals.push_back(local_operator(spec, state.locals[i], state.uha, model, th, i, noise));
  }
  const double scale = static_cast<double>(M) / static_cast<double>(subset.size());
  return global + sum(std::span<const T>(locals)) * scale;
}

template <class T>
T global_iw_bound(const StateView<T>& state, const ModelInstance& model, int K,
                  const NoiseStreams& noise) {
  if (K < 1) throw BoundError("K must be >= 1");
  const std::size_t M = model.num_groups();
  if (state.locals.size() != M) throw BoundError("state has the wrong number of local factors");
  NormalSource theta_source(noise.rng(Stream::theta));
  std::vector<NormalSource> group_sources;
  group_sources.reserve(M);
  for (std::size_t i = 0; i < M; ++i) group_sources.emplace_back(noise.rng(Stream::local, i));

  std::vector<T> log_weights;
  log_weights.reserve(static_cast<std::size_t>(K));
  std::vector<T> theta;
  std::vector<T> locals;
  for (int k = 0; k < K; ++k) {
    const T global = global_term(state.global, model, theta_source.draw(model.d_theta()), theta);
    const std::span<const T> th(theta);
    locals.clear();
    for (std::size_t i = 0; i < M; ++i) {
      locals.push_back(vi_local_operator(state.locals[i], model, th, i,
                                         group_sources[i].draw(model.d_z())));
    }
    log_weights.push_back(global + sum(std::span<const T>(locals)));
  }
  return logsumexp(std::span<const T>(log_weights)) - std::log(static_cast<double>(K));
}

double estimate_value(const VariationalState& state, const ModelInstance& model,
                      const BoundSpec& spec, const NoiseStreams& noise) {
  spec.validate(model.num_groups());
  const StateView<double> view = view_of(state);
  if (spec.scope == Scope::global && spec.op == OperatorKind::iw) {
    return global_iw_bound(view, model, spec.K, noise);
  }
  const auto subset = draw_subset(spec, model.num_groups(), noise);
  return local_bound(view, model, spec,
                     noise, subset ? std::span<const std::size_t>(*subset) : std::span<const std::size_t>());
}

namespace {

std::vector<double> gather(const Gradient& grad, const std::vector<std::uint32_t>& handles) {
  std::vector<double> out(handles.size());
  for (std::size_t k = 0; k < handles.size(); ++k) out[k] = grad.at(handles[k]);
  return out;
}

}  // namespace

BoundEstimate local_bound_estimate(const VariationalState& state, const ModelInstance& model,
                                   const BoundSpec& spec, const NoiseStreams& noise, Tape& tape) {
  spec.validate(model.num_groups());
  if (spec.scope != Scope::local && spec.op != OperatorKind::vi) {
    throw BoundError("local_bound_estimate needs a local-scope spec");
  }
  tape.reset();
  std::vector<std::uint32_t> handles;
  const StateView<Var> view = lift(tape, state, &handles);
  BoundEstimate out;
  out.minibatch_indices = draw_subset(spec, model.num_groups(), noise);
  const Var value = local_bound(view, model, spec, noise,
                                out.minibatch_indices
                                    ? std::span<const std::size_t>(*out.minibatch_indices)
                                    : std::span<const std::size_t>());
  out.value = value.value();
  out.gradient = gather(tape.backward(value), handles);
  return out;
}

BoundEstimate global_iw_estimate(const VariationalState& state, const ModelInstance& model, int K,
                                 const NoiseStreams& noise, Tape& tape,
                                 std::optional<std::size_t> minibatch) {
  if (minibatch) throw BoundError("global IW is incompatible with subsampling");
  tape.reset();
  std::vector<std::uint32_t> handles;
  const StateView<Var> view = lift(tape, state, &handles);
  const Var value = global_iw_bound(view, model, K, noise);
  BoundEstimate out;
  out.value = value.value();
  out.gradient = gather(tape.backward(value), handles);
  return out;
}

BoundEstimate bound_estimate(const VariationalState& state, const ModelInstance& model,
                             const BoundSpec& spec, const NoiseStreams& noise, Tape& tape) {
  spec.validate(model.num_groups());
  if (spec.scope == Scope::global && spec.op == OperatorKind::iw) {
    return global_iw_estimate(state, model, spec.K, noise, tape, spec.minibatch);
  }
  return local_bound_estimate(state, model, spec, noise, tape);
}

double kl_to_global_posterior(const GaussianValues& q_theta, const ModelInstance& model) {
  const GaussianMoments post = model.global_posterior();
  const auto d = static_cast<Eigen::Index>(q_theta.dim());
  if (post.mean.size() != d) throw BoundError("q(theta) dimension does not match the model");
  Eigen::VectorXd mean(d);
  Eigen::VectorXd var(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    mean(k) = q_theta.mean[static_cast<std::size_t>(k)];
    var(k) = std::exp(2.0 * q_theta.log_scale[static_cast<std::size_t>(k)]);
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(post.covariance);
  const Eigen::MatrixXd precision = llt.solve(Eigen::MatrixXd::Identity(d, d));
  const Eigen::VectorXd diff = post.mean - mean;
  const double log_det_p = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double log_det_q = var.array().log().sum();
  const double trace = (precision.diagonal().array() * var.array()).sum();
  return 0.5 * (trace + diff.dot(precision * diff) - static_cast<double>(d) + log_det_p - log_det_q);
}

LocalOperatorFn make_local_operator(const BoundSpec& spec, const VariationalState& state,
                                    const ModelInstance& model) {
  if (spec.op == OperatorKind::uha && !state.uha) {
    throw BoundError("UHA operator needs UHA parameters in the state");
  }
  std::optional<UhaParams<double>> uha = view_of(state).uha;
  return [spec, uha, &model](const GaussianValues& q, std::span<const double> theta,
                             std::size_t group, const NoiseStreams& noise) {
    return local_operator<double>(spec, q, uha, model, theta, group, noise);
  };
}

GapDecomposition gap_decomposition(const VariationalState& state, const ModelInstance& model,
                                   const LocalOperatorFn& op, std::size_t samples,
                                   std::uint64_t seed) {
  if (model.kind() != ModelKind::conjugate_oracle) {
    throw BoundError("gap_decomposition needs a conjugate_oracle model");
  }
  if (samples < 2) throw BoundError("gap_decomposition needs at least two samples");
  const std::size_t M = model.num_groups();
  std::vector<double> gaps(samples * M);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(samples); ++s) {
    const NoiseStreams noise(seed, Purpose::evaluate, static_cast<std::uint64_t>(s));
    const std::vector<double> theta = sample_reparam(
        state.global, NormalSource(noise.rng(Stream::theta)).draw(model.d_theta()));
    for (std::size_t i = 0; i < M; ++i) {
      gaps[static_cast<std::size_t>(s) * M + i] =
          model.analytic_group_log_marginal(theta, i) - op(state.locals[i], theta, i, noise);
    }
  }

  GapDecomposition out;
  out.kl_term = kl_to_global_posterior(state.global, model);
  out.local_gaps.assign(M, 0.0);
  out.local_gap_errors.assign(M, 0.0);
  const double n = static_cast<double>(samples);
  for (std::size_t i = 0; i < M; ++i) {
    double mean = 0.0;
    for (std::size_t s = 0; s < samples; ++s) mean += gaps[s * M + i];
    mean /= n;
    double ss = 0.0;
    for (std::size_t s = 0; s < samples; ++s) ss += (gaps[s * M + i] - mean) * (gaps[s * M + i] - mean);
    out.local_gaps[i] = mean;
    out.local_gap_errors[i] = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

template double vi_local_operator<double>(const Gaussian<double>&, const ModelInstance&,
                                          std::span<const double>, std::size_t,
                                          std::span<const double>);
template Var vi_local_operator<Var>(const Gaussian<Var>&, const ModelInstance&, std::span<const Var>,
                                    std::size_t, std::span<const double>);
template double iw_local_operator<double>(const Gaussian<double>&, const ModelInstance&,
                                          std::span<const double>, std::size_t,
                                          std::span<const std::vector<double>>);
template Var iw_local_operator<Var>(const Gaussian<Var>&, const ModelInstance&, std::span<const Var>,
                                    std::size_t, std::span<const std::vector<double>>);
template double local_operator<double>(const BoundSpec&, const Gaussian<double>&,
                                       const std::optional<UhaParams<double>>&,
                                       const ModelInstance&, std::span<const double>, std::size_t,
                                       const NoiseStreams&);
template Var local_operator<Var>(const BoundSpec&, const Gaussian<Var>&,
                                 const std::optional<UhaParams<Var>>&, const ModelInstance&,
                                 std::span<const Var>, std::size_t, const NoiseStreams&);
template double local_bound<double>(const StateView<double>&, const ModelInstance&,
                                    const BoundSpec&, const NoiseStreams&,
                                    std::span<const std::size_t>);
template Var local_bound<Var>(const StateView<Var>&, const ModelInstance&, const BoundSpec&,
                              const NoiseStreams&, std::span<const std::size_t>);
template double global_iw_bound<double>(const StateView<double>&, const ModelInstance&, int,
                                        const NoiseStreams&);
template Var global_iw_bound<Var>(const StateView<Var>&, const ModelInstance&, int,
                                  const NoiseStreams&);

}  // namespace lebound

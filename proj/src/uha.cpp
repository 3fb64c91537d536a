#include "lebound/uha.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace lebound {

AnnealingSchedule AnnealingSchedule::linear(int num_distributions) {
  if (num_distributions < 1) throw std::invalid_argument("annealing needs K >= 1");
  std::vector<double> betas;
  for (int k = 1; k < num_distributions; ++k) {
    betas.push_back(static_cast<double>(k) / num_distributions);
  }
  return AnnealingSchedule(std::move(betas));
}

AnnealingSchedule::AnnealingSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  double prev = 0.0;
  for (double b : betas_) {
    if (!(b > prev && b < 1.0)) {
      throw std::invalid_argument("annealing schedule must be strictly increasing inside (0, 1)");
    }
    prev = b;
  }
}

double AnnealingSchedule::beta(int k) const {
  const int K = num_distributions();
  if (k < 0 || k > K) {
    throw std::out_of_range("bridging level " + std::to_string(k) + " outside [0, " +
                            std::to_string(K) + "]");
  }
  if (k == 0) return 0.0;
  if (k == K) return 1.0;
  return betas_[static_cast<std::size_t>(k - 1)];
}

UhaNoise draw_uha_noise(const NoiseStreams& noise, std::size_t group, std::size_t dim,
                        int num_distributions) {
  UhaNoise out;
  out.z = NormalSource(noise.rng(Stream::local, group)).draw(dim);
  NormalSource momentum(noise.rng(Stream::momentum, group));
  out.rho = momentum.draw(dim);
  for (int k = 1; k < num_distributions; ++k) out.refresh.push_back(momentum.draw(dim));
  return out;
}

template <class T>
T geometric_bridge(double beta, const Gaussian<T>& q, const ModelInstance& model,
                   std::span<const T> theta, std::size_t group, std::span<const T> z) {
  if (beta == 0.0) return log_density(q, z);
  if (beta == 1.0) return model.log_group_joint(theta, group, z);
  return log_density(q, z) * (1.0 - beta) + model.log_group_joint(theta, group, z) * beta;
}

template <class T>
T bridging_logdensity(const AnnealingSchedule& schedule, int k, const Gaussian<T>& q,
                      const ModelInstance& model, std::span<const T> theta, std::size_t group,
                      std::span<const T> z) {
  return geometric_bridge(schedule.beta(k), q, model, theta, group, z);
}

template <class T>
std::vector<T> bridging_grad(double beta, const Gaussian<T>& q, const ModelInstance& model,
                             std::span<const T> theta, std::size_t group, std::span<const T> z) {
  std::vector<T> gq = grad_log_density(q, z);
  std::vector<T> gp = model.grad_group_joint_z(theta, group, z);
  std::vector<T> out;
  out.reserve(z.size());
  for (std::size_t d = 0; d < z.size(); ++d) out.push_back(gq[d] * (1.0 - beta) + gp[d] * beta);
  return out;
}

template <class T>
T uha_operator(const Gaussian<T>& q, const ModelInstance& model, std::span<const T> theta,
               std::size_t group, const UhaParams<T>& params, const UhaSettings& settings,
               const UhaNoise& noise) {
  const int K = settings.num_distributions;
  if (K < 1) throw std::invalid_argument("UHA needs K >= 1");
  if (settings.leapfrog_steps < 1) throw std::invalid_argument("UHA needs leapfrog_steps >= 1");
  if (params.step_size.size() != q.dim()) {
    throw std::invalid_argument("UHA step size dimension does not match the local latent");
  }
  if (noise.refresh.size() + 1 != static_cast<std::size_t>(K)) {
    throw std::invalid_argument("UHA noise does not match K");
  }

  std::vector<T> z = sample_reparam(q, noise.z);
  const T log_q_start = log_density(q, std::span<const T>(z));
  if (K == 1) return model.log_group_joint(theta, group, std::span<const T>(z)) - log_q_start;

  const AnnealingSchedule schedule = AnnealingSchedule::linear(K);
  const std::span<const T> eps(params.step_size);
  std::vector<T> rho;
  std::vector<T> kinetic_terms;
  kinetic_terms.reserve(static_cast<std::size_t>(K - 1));

  for (int k = 1; k < K; ++k) {
    const auto& xi = noise.refresh[static_cast<std::size_t>(k - 1)];
    std::vector<T> rho_tilde =
        k == 1 ? momentum_refresh<T, double>(noise.rho, params.damping, xi)
               : momentum_refresh<T, T>(std::span<const T>(rho), params.damping, xi);
    const double beta = schedule.beta(k);
    auto grad = [&](std::span<const T> at) { return bridging_grad(beta, q, model, theta, group, at); };
    auto [z_next, rho_next] = leapfrog(std::move(z), rho_tilde, eps, settings.leapfrog_steps, grad);
    z = std::move(z_next);
    rho = std::move(rho_next);
    // log m(ρ^{k+1}) − log m(ρ̃^k) = ½|ρ̃^k|² − ½|ρ^{k+1}|².
    const std::span<const T> rt(rho_tilde);
    const std::span<const T> rn(rho);
    kinetic_terms.push_back((dot(rt, rt) - dot(rn, rn)) * 0.5);
  }
  return (model.log_group_joint(theta, group, std::span<const T>(z)) - log_q_start) +
         sum(std::span<const T>(kinetic_terms));
}

AisResult ais_evaluate(const GaussianValues& q, const ModelInstance& model,
                       std::span<const double> theta, std::size_t group, int num_distributions,
                       const HmcSettings& hmc, Rng& rng) {
  const int K = num_distributions;
  if (K < 1) throw std::invalid_argument("AIS needs K >= 1");
  if (hmc.step_size.size() != q.dim()) {
    throw std::invalid_argument("AIS step size dimension does not match the local latent");
  }
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;

  std::vector<double> noise(q.dim());
  for (double& v : noise) v = normal(rng);
  std::vector<double> z = sample_reparam(q, noise);
  double log_weight = -log_density(q, std::span<const double>(z));
  if (K == 1) {
    return {log_weight + model.log_group_joint(theta, group, std::span<const double>(z)),
            std::numeric_limits<double>::quiet_NaN()};
  }

  const AnnealingSchedule schedule = AnnealingSchedule::linear(K);
  int accepted = 0;
  for (int k = 1; k < K; ++k) {
    const double beta = schedule.beta(k);
    auto log_pi = [&](std::span<const double> at) {
      return geometric_bridge(beta, q, model, theta, group, at);
    };
    auto grad = [&](std::span<const double> at) {
      return bridging_grad(beta, q, model, theta, group, at);
    };
    std::vector<double> rho(q.dim());
    for (double& v : rho) v = normal(rng);

    const double log_pi_start = log_pi(z);
    auto [z_prop, rho_prop] =
        leapfrog(z, rho, std::span<const double>(hmc.step_size), hmc.leapfrog_steps, grad);
    const double log_pi_prop = log_pi(z_prop);
    const double h_start = -log_pi_start + 0.5 * dot(rho, rho);
    const double h_prop = -log_pi_prop + 0.5 * dot(rho_prop, rho_prop);
    const double log_accept = h_start - h_prop;
    if (std::isfinite(log_accept) && std::log(uniform(rng)) < log_accept) {
      z = std::move(z_prop);
      // π^k is held invariant, so the incremental weight uses π^k at both ends.
      log_weight += log_pi_start - log_pi_prop;
      ++accepted;
    }
  }
  log_weight += model.log_group_joint(theta, group, std::span<const double>(z));
  return {log_weight, static_cast<double>(accepted) / (K - 1)};
}

template double geometric_bridge<double>(double, const Gaussian<double>&, const ModelInstance&,
                                         std::span<const double>, std::size_t,
                                         std::span<const double>);
template Var geometric_bridge<Var>(double, const Gaussian<Var>&, const ModelInstance&,
                                   std::span<const Var>, std::size_t, std::span<const Var>);
template double bridging_logdensity<double>(const AnnealingSchedule&, int, const Gaussian<double>&,
                                            const ModelInstance&, std::span<const double>,
                                            std::size_t, std::span<const double>);
template Var bridging_logdensity<Var>(const AnnealingSchedule&, int, const Gaussian<Var>&,
                                      const ModelInstance&, std::span<const Var>, std::size_t,
                                      std::span<const Var>);
template std::vector<double> bridging_grad<double>(double, const Gaussian<double>&,
                                                   const ModelInstance&, std::span<const double>,
                                                   std::size_t, std::span<const double>);
template std::vector<Var> bridging_grad<Var>(double, const Gaussian<Var>&, const ModelInstance&,
                                             std::span<const Var>, std::size_t,
                                             std::span<const Var>);
template double uha_operator<double>(const Gaussian<double>&, const ModelInstance&,
                                     std::span<const double>, std::size_t,
                                     const UhaParams<double>&, const UhaSettings&,
                                     const UhaNoise&);
template Var uha_operator<Var>(const Gaussian<Var>&, const ModelInstance&, std::span<const Var>,
                               std::size_t, const UhaParams<Var>&, const UhaSettings&,
                               const UhaNoise&);

}  // namespace lebound

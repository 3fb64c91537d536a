#pragma once

// Uncorrected Hamiltonian annealing (UHA) as a differentiable local bounding
// operator, and Metropolis-corrected Hamiltonian AIS as an evaluation-only
// reference.
//
// Bridging densities are geometric, π^k ∝ q^{1−β_k} p^{β_k}, with the linear
// schedule β_k = k/K. Momentum has a standard normal law m(ρ).

#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "lebound/family.hpp"
#include "lebound/model.hpp"
#include "lebound/noise.hpp"

namespace lebound {

class AnnealingSchedule {
 public:
  /// β_k = k / num_distributions for k = 1..num_distributions−1.
  static AnnealingSchedule linear(int num_distributions);
  explicit AnnealingSchedule(std::vector<double> betas);

  int num_distributions() const { return static_cast<int>(betas_.size()) + 1; }
  /// β at level k in [0, K]; endpoints are 0 and 1.
  double beta(int k) const;
  std::span<const double> betas() const { return betas_; }

 private:
  std::vector<double> betas_;
};

struct UhaSettings {
  int num_distributions = 1;  // K; K − 1 transitions
  int leapfrog_steps = 1;     // L per transition
};

/// Noise consumed by one UHA run: z¹ noise, ρ¹, and K − 1 refresh draws.
struct UhaNoise {
  std::vector<double> z;
  std::vector<double> rho;
  std::vector<std::vector<double>> refresh;
};

/// Draws UHA noise for `group`. The z-noise is the first draw of the group's
/// local stream, so it coincides with what plain VI uses under the same key.
UhaNoise draw_uha_noise(const NoiseStreams& noise, std::size_t group, std::size_t dim,
                        int num_distributions);

/// (1 − β) log q(z) + β log p(z, y_i | θ) for an arbitrary β in [0, 1].
template <class T>
T geometric_bridge(double beta, const Gaussian<T>& q, const ModelInstance& model,
                   std::span<const T> theta, std::size_t group, std::span<const T> z);

/// log π^k(z). k = 0 gives log q exactly, k = K gives log p exactly.
template <class T>
T bridging_logdensity(const AnnealingSchedule& schedule, int k, const Gaussian<T>& q,
                      const ModelInstance& model, std::span<const T> theta, std::size_t group,
                      std::span<const T> z);

/// ∇_z log π at a given β, differentiable on a tape.
template <class T>
std::vector<T> bridging_grad(double beta, const Gaussian<T>& q, const ModelInstance& model,
                             std::span<const T> theta, std::size_t group, std::span<const T> z);

/// `steps` leapfrog steps of size eps (per dimension) on the potential whose
/// log density gradient is `grad`. Half kick, full drift, half kick.
template <class T, class GradFn>
std::pair<std::vector<T>, std::vector<T>> leapfrog(std::vector<T> z, std::vector<T> rho,
                                                   std::span<const T> eps, int steps,
                                                   GradFn&& grad) {
  if (z.size() != rho.size() || z.size() != eps.size()) {
    throw std::invalid_argument("leapfrog: dimension mismatch");
  }
  std::vector<T> half_eps;
  half_eps.reserve(eps.size());
  for (const T& e : eps) half_eps.push_back(e * 0.5);

  std::vector<T> g = grad(std::span<const T>(z));
  for (int l = 0; l < steps; ++l) {
    for (std::size_t d = 0; d < z.size(); ++d) rho[d] = rho[d] + half_eps[d] * g[d];
    for (std::size_t d = 0; d < z.size(); ++d) z[d] = z[d] + eps[d] * rho[d];
    g = grad(std::span<const T>(z));
    for (std::size_t d = 0; d < z.size(); ++d) rho[d] = rho[d] + half_eps[d] * g[d];
  }
  return {std::move(z), std::move(rho)};
}

/// ρ̃ = η ρ + sqrt(1 − η²) ξ.
template <class T, class R>
std::vector<T> momentum_refresh(std::span<const R> rho, const T& damping,
                                std::span<const double> xi) {
  if (rho.size() != xi.size()) throw std::invalid_argument("momentum_refresh: dimension mismatch");
  const double one_minus = 1.0 - value_of(damping) * value_of(damping);
  if (one_minus < 0.0) throw std::invalid_argument("momentum_refresh: damping must be in [0, 1]");
  std::vector<T> out;
  out.reserve(rho.size());
  if (one_minus == 0.0) {
    for (const R& r : rho) out.push_back(damping * r);
    return out;
  }
  const T noise_scale = sqrt(1.0 - damping * damping);
  for (std::size_t d = 0; d < rho.size(); ++d) out.push_back(damping * rho[d] + noise_scale * xi[d]);
  return out;
}

/// One-sample UHA estimate of the local bound for group `group`:
///   log p(z^K, y_i | θ) − log q(z¹) + Σ_k [log m(ρ^{k+1}) − log m(ρ̃^k)].
template <class T>
T uha_operator(const Gaussian<T>& q, const ModelInstance& model, std::span<const T> theta,
               std::size_t group, const UhaParams<T>& params, const UhaSettings& settings,
               const UhaNoise& noise);

struct HmcSettings {
  std::vector<double> step_size;
  int leapfrog_steps = 1;
};

struct AisResult {
  double log_weight = 0.0;
  double acceptance_rate = 0.0;  // NaN when K = 1
};

/// Hamiltonian AIS with Metropolis correction and full momentum refresh.
/// Not differentiable; used to cross-check the annealed bounds.
AisResult ais_evaluate(const GaussianValues& q, const ModelInstance& model,
                       std::span<const double> theta, std::size_t group, int num_distributions,
                       const HmcSettings& hmc, Rng& rng);

}  // namespace lebound

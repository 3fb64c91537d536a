#pragma once

// Bound algebra for hierarchical models.
//
// A local operator L(q(z_i) || p(z_i, y_i | θ)) lower-bounds log p(y_i | θ).
// The locally-enhanced objective is
//     E_{q(θ)} [ log p(θ)/q(θ) + Σ_i L(q(z_i) || p(z_i, y_i | θ)) ],
// estimated with one θ sample and, optionally, a uniform minibatch I of
// groups scaled by M/|I|. The global importance-weighted objective takes a
// logmeanexp over K joint samples of (θ, z_1..z_M) and cannot be subsampled.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lebound/family.hpp"
#include "lebound/model.hpp"
#include "lebound/noise.hpp"
#include "lebound/tape.hpp"
#include "lebound/uha.hpp"

namespace lebound {

class BoundError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class OperatorKind { vi, iw, uha };
enum class Scope { local, global };

const char* to_string(OperatorKind op);
const char* to_string(Scope scope);

struct BoundSpec {
  OperatorKind op = OperatorKind::vi;
  int K = 1;
  Scope scope = Scope::local;
  std::optional<std::size_t> minibatch;
  int leapfrog_steps = 1;   // UHA only
  UhaInit uha_init;         // UHA only: starting ε and η

  static BoundSpec vi() { return {}; }
  static BoundSpec local_iw(int K) { return with(OperatorKind::iw, K, Scope::local); }
  static BoundSpec global_iw(int K) { return with(OperatorKind::iw, K, Scope::global); }
  static BoundSpec local_uha(int K, int leapfrog_steps = 1) {
    BoundSpec s = with(OperatorKind::uha, K, Scope::local);
    s.leapfrog_steps = leapfrog_steps;
    return s;
  }

  /// Throws BoundError when the spec is inconsistent for a model with
  /// `num_groups` groups.
  void validate(std::size_t num_groups) const;
  UhaSettings uha_settings() const { return {K, leapfrog_steps}; }
  /// Short label such as "VI", "IW-local-K5", "UHA-local-K10".
  std::string label() const;

 private:
  static BoundSpec with(OperatorKind op, int K, Scope scope) {
    BoundSpec s;
    s.op = op;
    s.K = K;
    s.scope = scope;
    return s;
  }
};

struct BoundEstimate {
  double value = 0.0;
  std::vector<double> gradient;  // aligned with VariationalState::flatten()
  std::optional<std::vector<std::size_t>> minibatch_indices;
};

// --- Local operators -------------------------------------------------------

/// log p(z, y_i | θ) − log q(z) at z = mean + scale ⊙ noise.
template <class T>
T vi_local_operator(const Gaussian<T>& q, const ModelInstance& model, std::span<const T> theta,
                    std::size_t group, std::span<const double> noise);

/// logsumexp_k [log p(z^k, y_i | θ) − log q(z^k)] − log K.
template <class T>
T iw_local_operator(const Gaussian<T>& q, const ModelInstance& model, std::span<const T> theta,
                    std::size_t group, std::span<const std::vector<double>> noises);

/// Applies the operator named by `spec` to group `group`, drawing its noise
/// from the group's streams under `noise`.
template <class T>
T local_operator(const BoundSpec& spec, const Gaussian<T>& q, const std::optional<UhaParams<T>>& uha,
                 const ModelInstance& model, std::span<const T> theta, std::size_t group,
                 const NoiseStreams& noise);

// --- Composite objectives ---------------------------------------------------

/// Uniform sample of `size` distinct group indices, returned sorted.
std::vector<std::size_t> sample_minibatch(std::size_t num_groups, std::size_t size, Rng& rng);

/// Locally-enhanced objective on an explicit group subset (all groups when
/// `subset` is empty).
template <class T>
T local_bound(const StateView<T>& state, const ModelInstance& model, const BoundSpec& spec,
              const NoiseStreams& noise, std::span<const std::size_t> subset);

/// Global importance-weighted objective over K joint samples.
template <class T>
T global_iw_bound(const StateView<T>& state, const ModelInstance& model, int K,
                  const NoiseStreams& noise);

/// Value of one estimate of `spec` without gradients. Minibatching follows
/// spec.minibatch, using the minibatch stream of `noise`.
double estimate_value(const VariationalState& state, const ModelInstance& model,
                      const BoundSpec& spec, const NoiseStreams& noise);

/// Locally-enhanced estimate with its gradient.
BoundEstimate local_bound_estimate(const VariationalState& state, const ModelInstance& model,
                                   const BoundSpec& spec, const NoiseStreams& noise,
                                   Tape& tape);

/// Global IW estimate with its gradient. Rejects any minibatch request.
BoundEstimate global_iw_estimate(const VariationalState& state, const ModelInstance& model,
                                 int K, const NoiseStreams& noise, Tape& tape,
                                 std::optional<std::size_t> minibatch = std::nullopt);

/// Dispatches on spec.scope.
BoundEstimate bound_estimate(const VariationalState& state, const ModelInstance& model,
                             const BoundSpec& spec, const NoiseStreams& noise, Tape& tape);

// --- Gap decomposition (conjugate oracle) -----------------------------------

/// KL(q(θ) || p(θ | y)) for a factorized Gaussian q(θ).
double kl_to_global_posterior(const GaussianValues& q_theta, const ModelInstance& model);

/// Per-group bound value for a fixed θ; the hook used to plug in custom
/// operators (for example an exact one) into the gap decomposition.
using LocalOperatorFn = std::function<double(const GaussianValues& q, std::span<const double> theta,
                                             std::size_t group, const NoiseStreams& noise)>;

LocalOperatorFn make_local_operator(const BoundSpec& spec, const VariationalState& state,
                                    const ModelInstance& model);

struct GapDecomposition {
  double kl_term = 0.0;
  std::vector<double> local_gaps;       // Monte Carlo means
  std::vector<double> local_gap_errors; // their standard errors
};

/// KL(q(θ) || p(θ|y)) and E_{q(θ)}[log p(y_i | θ) − L_i] for every group,
/// the latter averaged over `samples` draws of θ and operator noise.
GapDecomposition gap_decomposition(const VariationalState& state, const ModelInstance& model,
                                   const LocalOperatorFn& op, std::size_t samples,
                                   std::uint64_t seed);

}  // namespace lebound

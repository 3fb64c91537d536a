#pragma once

// Two-level hierarchical models p(θ) Π_i p(z_i, y_i | θ).
//
// Three instances share one interface:
//   synthetic_linear    θ = (μ_z ∈ R^d, ψ_z ∈ R^d, ψ_y),  z_i ~ N(μ_z, diag e^{ψ_z}),
//                       y_ij ~ N(z_i·x_ij, e^{ψ_y})
//   movielens_logistic  θ = (μ_z, ψ_z) ∈ R^{2d},          y_ij ~ Bernoulli(σ(z_i·x_ij))
//   conjugate_oracle    θ = μ_z ∈ R^d, fixed variances,    closed-form log p(y)
//
// e^{ψ} is always a variance. Every global coordinate has a standard normal
// prior, except conjugate_oracle whose prior variance is configurable.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "lebound/tape.hpp"

namespace lebound {

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Observations of one group: N_i rows of covariates and N_i outcomes.
class GroupData {
 public:
  GroupData() = default;
  /// `features` is row-major with `outcomes.size()` rows.
  GroupData(std::vector<double> features, std::vector<double> outcomes);

  std::size_t size() const { return outcomes_.size(); }
  std::size_t width() const { return width_; }
  std::span<const double> row(std::size_t j) const {
    return {features_.data() + j * width_, width_};
  }
  std::span<const double> column(std::size_t d) const {
    return {columns_.data() + d * size(), size()};
  }
  std::span<const double> features() const { return features_; }
  std::span<const double> outcomes() const { return outcomes_; }

 private:
  std::vector<double> features_;
  std::vector<double> columns_;
  std::vector<double> outcomes_;
  std::size_t width_ = 0;
};

struct HierarchicalDataset {
  std::vector<GroupData> groups;
  std::size_t d_z = 0;

  std::size_t num_groups() const { return groups.size(); }
};

enum class ModelKind { synthetic_linear, movielens_logistic, conjugate_oracle };

const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct ConjugateVariances {
  double prior = 1.0;        // θ ~ N(0, prior·I)
  double local = 1.0;        // z_i | θ ~ N(θ, local·I)
  double observation = 1.0;  // y_ij | z_i ~ N(z_i·x_ij, observation)
};

struct GaussianMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

class ModelInstance {
 public:
  static ModelInstance synthetic_linear(HierarchicalDataset data);
  static ModelInstance movielens_logistic(HierarchicalDataset data);
  static ModelInstance conjugate_oracle(HierarchicalDataset data,
                                        ConjugateVariances variances = {});

  ModelKind kind() const { return kind_; }
  const HierarchicalDataset& dataset() const { return data_; }
  std::size_t num_groups() const { return data_.num_groups(); }
  std::size_t d_z() const { return data_.d_z; }
  std::size_t d_theta() const;
  const ConjugateVariances& variances() const { return variances_; }

  /// log p(θ).
  template <class T>
  T log_prior_global(std::span<const T> theta) const;

  /// log p(z_i, y_i | θ).
  template <class T>
  T log_group_joint(std::span<const T> theta, std::size_t group,
                    std::span<const T> z) const;

  /// ∇_z log p(z_i, y_i | θ), built from primitives so it stays differentiable
  /// on a tape.
  template <class T>
  std::vector<T> grad_group_joint_z(std::span<const T> theta, std::size_t group,
                                    std::span<const T> z) const;

  // Closed forms, conjugate_oracle only.
  double analytic_log_marginal() const;
  /// log p(y_i | θ).
  double analytic_group_log_marginal(std::span<const double> theta,
                                     std::size_t group) const;
  /// p(z_i | θ, y_i).
  GaussianMoments local_posterior(std::span<const double> theta, std::size_t group) const;
  /// p(θ | y).
  GaussianMoments global_posterior() const;

 private:
  ModelInstance(ModelKind kind, HierarchicalDataset data, ConjugateVariances variances);
  void require_conjugate(const char* what) const;
  void check_group(std::size_t group, std::size_t z_size) const;
  // y_i = X_i z_i + e has marginal covariance local·X Xᵀ + observation·I given θ.
  Eigen::MatrixXd group_marginal_covariance(std::size_t group) const;
  Eigen::MatrixXd design(std::size_t group) const;

  ModelKind kind_;
  HierarchicalDataset data_;
  ConjugateVariances variances_;
};

}  // namespace lebound

#include "lebound/model.hpp"

#include <cmath>
#include <string>

#include "lebound/math.hpp"

namespace lebound {

GroupData::GroupData(std::vector<double> features, std::vector<double> outcomes)
    : features_(std::move(features)), outcomes_(std::move(outcomes)) {
  if (outcomes_.empty()) throw ModelError("a group needs at least one observation");
  if (features_.size() % outcomes_.size() != 0) {
    throw ModelError("feature count is not a multiple of the outcome count");
  }
  width_ = features_.size() / outcomes_.size();
  columns_.resize(features_.size());
  for (std::size_t j = 0; j < size(); ++j) {
    for (std::size_t d = 0; d < width_; ++d) columns_[d * size() + j] = features_[j * width_ + d];
  }
}

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::synthetic_linear: return "synthetic_linear";
    case ModelKind::movielens_logistic: return "movielens_logistic";
    case ModelKind::conjugate_oracle: return "conjugate_oracle";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "synthetic_linear") return ModelKind::synthetic_linear;
  if (name == "movielens_logistic") return ModelKind::movielens_logistic;
  if (name == "conjugate_oracle") return ModelKind::conjugate_oracle;
  throw ModelError("unknown model kind '" + name + "'");
}

ModelInstance::ModelInstance(ModelKind kind, HierarchicalDataset data,
                             ConjugateVariances variances)
    : kind_(kind), data_(std::move(data)), variances_(variances) {
  if (data_.groups.empty()) throw ModelError("dataset has no groups");
  if (data_.d_z == 0) throw ModelError("d_z must be positive");
  for (std::size_t i = 0; i < data_.groups.size(); ++i) {
    const GroupData& g = data_.groups[i];
    if (g.size() == 0) throw ModelError("group " + std::to_string(i) + " is empty");
    if (g.width() != data_.d_z) {
      throw ModelError("group " + std::to_string(i) + " has feature width " +
                       std::to_string(g.width()) + ", expected d_z = " +
                       std::to_string(data_.d_z));
    }
    if (kind_ == ModelKind::movielens_logistic) {
      for (double y : g.outcomes()) {
        if (y != 0.0 && y != 1.0) {
          throw ModelError("Bernoulli outcome in group " + std::to_string(i) + " is not 0/1");
        }
      }
    }
  }
  if (!(variances_.prior > 0 && variances_.local > 0 && variances_.observation > 0)) {
    throw ModelError("conjugate variances must be positive");
  }
}

ModelInstance ModelInstance::synthetic_linear(HierarchicalDataset data) {
  return ModelInstance(ModelKind::synthetic_linear, std::move(data), {});
}

ModelInstance ModelInstance::movielens_logistic(HierarchicalDataset data) {
  return ModelInstance(ModelKind::movielens_logistic, std::move(data), {});
}

ModelInstance ModelInstance::conjugate_oracle(HierarchicalDataset data,
                                              ConjugateVariances variances) {
  return ModelInstance(ModelKind::conjugate_oracle, std::move(data), variances);
}

std::size_t ModelInstance::d_theta() const {
  switch (kind_) {
    case ModelKind::synthetic_linear: return 2 * d_z() + 1;
    case ModelKind::movielens_logistic: return 2 * d_z();
    case ModelKind::conjugate_oracle: return d_z();
  }
  return 0;
}

void ModelInstance::check_group(std::size_t group, std::size_t z_size) const {
  if (group >= num_groups()) {
    throw ModelError("group index " + std::to_string(group) + " out of range [0, " +
                     std::to_string(num_groups()) + ")");
  }
  if (z_size != d_z()) {
    throw ModelError("local latent has dimension " + std::to_string(z_size) +
                     ", expected " + std::to_string(d_z()));
  }
}

template <class T>
T ModelInstance::log_prior_global(std::span<const T> theta) const {
  if (theta.size() != d_theta()) {
    throw ModelError("theta has dimension " + std::to_string(theta.size()) + ", expected " +
                     std::to_string(d_theta()));
  }
  const double n = static_cast<double>(theta.size());
  const double var = kind_ == ModelKind::conjugate_oracle ? variances_.prior : 1.0;
  const T ss = dot(theta, theta);
  return ss * (-0.5 / var) - 0.5 * n * (kLogTwoPi + std::log(var));
}

template <class T>
T ModelInstance::log_group_joint(std::span<const T> theta, std::size_t group,
                                 std::span<const T> z) const {
  check_group(group, z.size());
  if (theta.size() != d_theta()) throw ModelError("theta has the wrong dimension");
  const GroupData& g = data_.groups[group];
  const std::size_t d = d_z();
  const double n_obs = static_cast<double>(g.size());

  if (kind_ == ModelKind::conjugate_oracle) {
    std::vector<T> diff;
    diff.reserve(d);
    for (std::size_t k = 0; k < d; ++k) diff.push_back(z[k] - theta[k]);
    const T local = dot(std::span<const T>(diff), std::span<const T>(diff)) *
                        (-0.5 / variances_.local) -
                    0.5 * static_cast<double>(d) * (kLogTwoPi + std::log(variances_.local));
    std::vector<T> resid;
    resid.reserve(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) resid.push_back(g.outcomes()[j] - dot(z, g.row(j)));
    const T lik = dot(std::span<const T>(resid), std::span<const T>(resid)) *
                      (-0.5 / variances_.observation) -
                  0.5 * n_obs * (kLogTwoPi + std::log(variances_.observation));
    return local + lik;
  }

  // Shared prior over z_i for both models: N(μ_z, diag e^{ψ_z}).
  const auto mu = theta.subspan(0, d);
  const auto psi = theta.subspan(d, d);
  std::vector<T> quad;
  quad.reserve(d);
  for (std::size_t k = 0; k < d; ++k) {
    const T diff = z[k] - mu[k];
    quad.push_back(diff * diff * exp(-psi[k]));
  }
  const T local = sum(std::span<const T>(quad)) * -0.5 - 0.5 * sum(psi) -
                  0.5 * static_cast<double>(d) * kLogTwoPi;

  if (kind_ == ModelKind::synthetic_linear) {
    const T& psi_y = theta[2 * d];
    std::vector<T> resid;
    resid.reserve(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) resid.push_back(g.outcomes()[j] - dot(z, g.row(j)));
    const T ss = dot(std::span<const T>(resid), std::span<const T>(resid));
    const T lik = ss * exp(-psi_y) * -0.5 - 0.5 * n_obs * psi_y - 0.5 * n_obs * kLogTwoPi;
    return local + lik;
  }

  std::vector<T> terms;
  terms.reserve(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    const T logit = dot(z, g.row(j));
    terms.push_back(g.outcomes()[j] == 1.0 ? log_sigmoid(logit) : log_sigmoid(-logit));
  }
  return local + sum(std::span<const T>(terms));
}

template <class T>
std::vector<T> ModelInstance::grad_group_joint_z(std::span<const T> theta, std::size_t group,
                                                 std::span<const T> z) const {
  check_group(group, z.size());
  if (theta.size() != d_theta()) throw ModelError("theta has the wrong dimension");
  const GroupData& g = data_.groups[group];
  const std::size_t d = d_z();

  // Per-observation "residual" r_j such that the likelihood gradient is
  // scale · Σ_j r_j x_j.
  std::vector<T> resid;
  resid.reserve(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    const T fitted = dot(z, g.row(j));
    if (kind_ == ModelKind::movielens_logistic) {
      resid.push_back(g.outcomes()[j] - sigmoid(fitted));
    } else {
      resid.push_back(g.outcomes()[j] - fitted);
    }
  }

  std::vector<T> grad;
  grad.reserve(d);
  for (std::size_t k = 0; k < d; ++k) {
    const T lik = dot(std::span<const T>(resid), g.column(k));
    switch (kind_) {
      case ModelKind::conjugate_oracle:
        grad.push_back((theta[k] - z[k]) * (1.0 / variances_.local) +
                       lik * (1.0 / variances_.observation));
        break;
      case ModelKind::synthetic_linear:
        grad.push_back((theta[k] - z[k]) * exp(-theta[d + k]) + lik * exp(-theta[2 * d]));
        break;
      case ModelKind::movielens_logistic:
        grad.push_back((theta[k] - z[k]) * exp(-theta[d + k]) + lik);
        break;
    }
  }
  return grad;
}

template double ModelInstance::log_prior_global<double>(std::span<const double>) const;
template Var ModelInstance::log_prior_global<Var>(std::span<const Var>) const;
template double ModelInstance::log_group_joint<double>(std::span<const double>, std::size_t,
                                                       std::span<const double>) const;
template Var ModelInstance::log_group_joint<Var>(std::span<const Var>, std::size_t,
                                                 std::span<const Var>) const;
template std::vector<double> ModelInstance::grad_group_joint_z<double>(
    std::span<const double>, std::size_t, std::span<const double>) const;
template std::vector<Var> ModelInstance::grad_group_joint_z<Var>(std::span<const Var>,
                                                                 std::size_t,
                                                                 std::span<const Var>) const;

// ---------------------------------------------------------------------------
// Closed forms for the conjugate oracle.

namespace {

double gaussian_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& cov) {
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw ModelError("covariance is not positive definite");
  const Eigen::VectorXd white = llt.matrixL().solve(x - mean);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(x.size()) * kLogTwoPi + log_det + white.squaredNorm());
}

Eigen::VectorXd to_eigen(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void ModelInstance::require_conjugate(const char* what) const {
  if (kind_ != ModelKind::conjugate_oracle) {
    throw ModelError(std::string(what) + " requires a conjugate_oracle model, got " +
                     to_string(kind_));
  }
}

Eigen::MatrixXd ModelInstance::design(std::size_t group) const {
  const GroupData& g = data_.groups.at(group);
  Eigen::MatrixXd x(g.size(), g.width());
  for (std::size_t j = 0; j < g.size(); ++j) {
    for (std::size_t k = 0; k < g.width(); ++k) x(j, k) = g.row(j)[k];
  }
  return x;
}

Eigen::MatrixXd ModelInstance::group_marginal_covariance(std::size_t group) const {
  const Eigen::MatrixXd x = design(group);
  Eigen::MatrixXd cov = variances_.local * x * x.transpose();
  cov.diagonal().array() += variances_.observation;
  return cov;
}

double ModelInstance::analytic_group_log_marginal(std::span<const double> theta,
                                                  std::size_t group) const {
  require_conjugate("analytic_group_log_marginal");
  check_group(group, d_z());
  if (theta.size() != d_theta()) throw ModelError("theta has the wrong dimension");
  const Eigen::MatrixXd x = design(group);
  return gaussian_log_density(to_eigen(data_.groups[group].outcomes()), x * to_eigen(theta),
                              group_marginal_covariance(group));
}

GaussianMoments ModelInstance::local_posterior(std::span<const double> theta,
                                               std::size_t group) const {
  require_conjugate("local_posterior");
  check_group(group, d_z());
  const Eigen::MatrixXd x = design(group);
  const Eigen::VectorXd y = to_eigen(data_.groups[group].outcomes());
  Eigen::MatrixXd precision = x.transpose() * x / variances_.observation;
  precision.diagonal().array() += 1.0 / variances_.local;
  const Eigen::MatrixXd cov = precision.inverse();
  const Eigen::VectorXd mean =
      cov * (to_eigen(theta) / variances_.local + x.transpose() * y / variances_.observation);
  return {mean, cov};
}

GaussianMoments ModelInstance::global_posterior() const {
  require_conjugate("global_posterior");
  const auto d = static_cast<Eigen::Index>(d_z());
  Eigen::MatrixXd precision = Eigen::MatrixXd::Identity(d, d) / variances_.prior;
  Eigen::VectorXd shift = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < num_groups(); ++i) {
    const Eigen::MatrixXd x = design(i);
    const Eigen::LLT<Eigen::MatrixXd> s(group_marginal_covariance(i));
    precision += x.transpose() * s.solve(x);
    shift += x.transpose() * s.solve(to_eigen(data_.groups[i].outcomes()));
  }
  const Eigen::MatrixXd cov = precision.inverse();
  return {cov * shift, cov};
}

double ModelInstance::analytic_log_marginal() const {
  require_conjugate("analytic_log_marginal");
  // log p(y) = log p(θ) + log p(y | θ) − log p(θ | y), evaluated at the
  // posterior mean.
  const GaussianMoments post = global_posterior();
  const auto d = static_cast<Eigen::Index>(d_z());
  const Eigen::VectorXd& theta = post.mean;
  double total = gaussian_log_density(theta, Eigen::VectorXd::Zero(d),
                                      Eigen::MatrixXd::Identity(d, d) * variances_.prior);
  for (std::size_t i = 0; i < num_groups(); ++i) {
    total += analytic_group_log_marginal({theta.data(), d_z()}, i);
  }
  return total - gaussian_log_density(theta, post.mean, post.covariance);
}

}  // namespace lebound

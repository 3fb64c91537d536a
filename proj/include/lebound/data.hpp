#pragma once

// Dataset construction: ancestral sampling from the synthetic and conjugate
// models, and MovieLens-100K ingestion.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "lebound/model.hpp"

namespace lebound {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SyntheticConfig {
  std::size_t M = 10;
  std::size_t N = 10;                    // used when group_sizes is empty
  std::vector<std::size_t> group_sizes;  // explicit N_i, length M
  std::size_t d_z = 1;
  std::uint64_t seed = 0;

  std::vector<std::size_t> sizes() const;
};

/// Group sizes of the heterogeneous 100-group configuration:
/// 50 groups of 2, 30 of 5 and 20 of 30 observations.
std::vector<std::size_t> heterogeneous_group_sizes();

struct TrueLatents {
  std::vector<double> theta;
  std::vector<std::vector<double>> z;
};

struct GeneratedData {
  HierarchicalDataset dataset;
  TrueLatents truth;
};

/// θ = (μ_z, ψ_z, ψ_y) from standard normals, z_i ~ N(μ_z, diag e^{ψ_z}),
/// x_ij ~ N(0, I), y_ij ~ N(z_i·x_ij, e^{ψ_y}).
GeneratedData generate_synthetic(const SyntheticConfig& config);

/// Same sampling scheme for the conjugate oracle (θ = μ_z, fixed variances).
GeneratedData generate_conjugate(const SyntheticConfig& config,
                                 const ConjugateVariances& variances = {});

// --- MovieLens -------------------------------------------------------------

inline constexpr std::size_t kGenreCount = 18;

struct Rating {
  std::uint32_t user;
  std::uint32_t item;
  int rating;
  std::int64_t timestamp;
};

/// 1, 2, 3 → 0 (dislike); 4, 5 → 1 (like).
int binarize(int rating);

/// Tab-separated "user item rating timestamp" rows.
std::vector<Rating> parse_ratings(const std::filesystem::path& path);

/// Pipe-separated item rows ending in 19 genre flags. The leading "unknown"
/// flag is dropped, leaving 18 features per item.
std::map<std::uint32_t, std::vector<double>> parse_items(const std::filesystem::path& path);

struct MovieLensConfig {
  std::filesystem::path ratings_path;
  std::filesystem::path items_path;
  std::size_t num_users = 10;
  std::size_t ratings_per_user = 30;
  std::uint64_t seed = 0;

  /// Standard file names under an ML-100K directory.
  static MovieLensConfig in_directory(const std::filesystem::path& root);
};

/// One group per selected user, with N binarized ratings and the rated
/// items' genre vectors as features. Users with at least N ratings are
/// ordered by id, shuffled by the seed, and the first M are kept.
HierarchicalDataset load_movielens(const MovieLensConfig& config);

}  // namespace lebound

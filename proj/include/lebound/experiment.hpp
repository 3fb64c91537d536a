#pragma once

// Experiment grids: config parsing, execution across methods and seeds, and
// the comparison table.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lebound/bounds.hpp"
#include "lebound/data.hpp"
#include "lebound/io.hpp"
#include "lebound/model.hpp"
#include "lebound/train.hpp"

namespace lebound {

/// Environment variable naming the ML-100K directory; a config's
/// model.data_root takes precedence.
inline constexpr const char* kMovieLensEnv = "LEBOUND_MOVIELENS_DIR";

/// Invalid configuration. what() starts with the offending field path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& why)
      : std::runtime_error(field + ": " + why), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct ModelConfig {
  ModelKind kind = ModelKind::conjugate_oracle;
  SyntheticConfig synthetic;  // synthetic_linear and conjugate_oracle
  ConjugateVariances variances;
  std::optional<std::filesystem::path> data_root;  // movielens_logistic
  std::size_t num_users = 10;
  std::size_t ratings_per_user = 30;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  ModelConfig model;
  std::vector<BoundSpec> grid;
  TrainConfig train;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir;
  json source;  // the parsed document, echoed into the summary
};

/// Validates every field; unknown keys are rejected.
ExperimentConfig parse_experiment_config(const json& doc);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct SeedResult {
  std::uint64_t seed = 0;
  FinalEstimate final;
  double wall_seconds = 0.0;
  std::string trace_file;
  std::string state_file;
};

struct MethodResult {
  BoundSpec spec;
  std::vector<SeedResult> seeds;
  double mean_final_bound = 0.0;
  double std_final_bound = 0.0;  // across seeds, sample std (0 for one seed)
};

struct RunResult {
  json config;
  std::vector<MethodResult> methods;
};

/// Builds the model named by the config (generating or loading its data).
ModelInstance build_model(const ModelConfig& config, json* dataset_artifact = nullptr);

/// Runs the grid × seeds with up to `jobs` concurrent workers, writing
/// dataset.json, one trace CSV and state JSON per (method, seed), and
/// summary.json into config.output_dir.
RunResult run_experiment(const ExperimentConfig& config, int jobs = 1);

json run_result_to_json(const RunResult& result);

struct CompareRow {
  std::string method;
  std::string scope;
  std::optional<int> K;
  std::uint64_t seed = 0;
  double final_bound = 0.0;
  std::optional<double> std_error;
  double wall_seconds = 0.0;
};

/// Rows of every summary.json under `dir` (searched non-recursively plus one
/// level of subdirectories). Throws when none is found.
std::vector<CompareRow> collect_results(const std::filesystem::path& dir);

/// Writes the comparison CSV and returns the number of data rows.
std::size_t write_compare_csv(const std::filesystem::path& dir, const std::filesystem::path& out);

std::vector<CompareRow> read_compare_csv(const std::filesystem::path& path);

}  // namespace lebound

#pragma once

// Text artifacts: JSON for states and datasets, CSV for traces.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lebound/data.hpp"
#include "lebound/family.hpp"
#include "lebound/train.hpp"

namespace lebound {

using json = nlohmann::json;

json state_to_json(const VariationalState& state);
VariationalState state_from_json(const json& j);

/// Groups with features (row lists) and outcomes, plus d_z and optional
/// extra metadata (generation config, true latents).
json dataset_to_json(const HierarchicalDataset& dataset, const json& config = json::object(),
                     const std::optional<TrueLatents>& truth = std::nullopt);
HierarchicalDataset dataset_from_json(const json& j);

/// Doubles printed with 17 significant digits in the "C" locale.
std::string format_double(double v);

void write_trace_csv(const std::filesystem::path& path, const std::vector<TracePoint>& trace);
std::vector<TracePoint> read_trace_csv(const std::filesystem::path& path);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

}  // namespace lebound

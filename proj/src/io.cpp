#include "lebound/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lebound {

namespace {

json gaussian_to_json(const GaussianValues& q) {
  return {{"mean", q.mean}, {"log_scale", q.log_scale}};
}

GaussianValues gaussian_from_json(const json& j) {
  GaussianValues q;
  q.mean = j.at("mean").get<std::vector<double>>();
  q.log_scale = j.at("log_scale").get<std::vector<double>>();
  if (q.mean.size() != q.log_scale.size()) {
    throw std::runtime_error("state: mean and log_scale lengths differ");
  }
  return q;
}

}  // namespace

json state_to_json(const VariationalState& state) {
  json locals = json::array();
  for (const auto& q : state.locals) locals.push_back(gaussian_to_json(q));
  json out = {{"global", gaussian_to_json(state.global)}, {"locals", std::move(locals)}};
  if (state.uha) {
    out["uha"] = {{"log_step_size", state.uha->log_step_size},
                  {"damping_logit", state.uha->damping_logit}};
  } else {
    out["uha"] = nullptr;
  }
  return out;
}

VariationalState state_from_json(const json& j) {
  VariationalState state;
  state.global = gaussian_from_json(j.at("global"));
  for (const auto& q : j.at("locals")) state.locals.push_back(gaussian_from_json(q));
  if (j.contains("uha") && !j.at("uha").is_null()) {
    const json& u = j.at("uha");
    state.uha = UhaValues{u.at("log_step_size").get<std::vector<double>>(),
                          u.at("damping_logit").get<double>()};
  }
  return state;
}

json dataset_to_json(const HierarchicalDataset& dataset, const json& config,
                     const std::optional<TrueLatents>& truth) {
  json groups = json::array();
  for (const GroupData& g : dataset.groups) {
    json rows = json::array();
    for (std::size_t j = 0; j < g.size(); ++j) {
      rows.push_back(std::vector<double>(g.row(j).begin(), g.row(j).end()));
    }
    groups.push_back({{"features", std::move(rows)},
                      {"outcomes", std::vector<double>(g.outcomes().begin(), g.outcomes().end())}});
  }
  json out = {{"d_z", dataset.d_z}, {"config", config}, {"groups", std::move(groups)}};
  if (truth) {
    out["true_latents"] = {{"theta", truth->theta}, {"z", truth->z}};
  }
  return out;
}

HierarchicalDataset dataset_from_json(const json& j) {
  HierarchicalDataset dataset;
  dataset.d_z = j.at("d_z").get<std::size_t>();
  for (const json& g : j.at("groups")) {
    std::vector<double> features;
    for (const json& row : g.at("features")) {
      const auto r = row.get<std::vector<double>>();
      if (r.size() != dataset.d_z) throw std::runtime_error("dataset: feature row width != d_z");
      features.insert(features.end(), r.begin(), r.end());
    }
    dataset.groups.emplace_back(std::move(features), g.at("outcomes").get<std::vector<double>>());
  }
  return dataset;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TracePoint>& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "step,estimate\n";
  for (const TracePoint& p : trace) out << p.step << ',' << format_double(p.estimate) << '\n';
}

std::vector<TracePoint> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "step,estimate") {
    throw std::runtime_error(path.string() + ": missing 'step,estimate' header");
  }
  std::vector<TracePoint> trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error(path.string() + ": malformed row");
    trace.push_back({std::stoul(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
  }
  return trace;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace lebound

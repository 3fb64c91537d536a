#include "lebound/experiment.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace lebound {

namespace {

void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!keys.count(key)) {
      throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
    }
  }
}

std::string field(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::uint64_t get_uint(const json& obj, const std::string& path, const std::string& key,
                       std::uint64_t fallback, std::uint64_t min_value = 0) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && v.get<std::int64_t>() < 0)) {
    throw ConfigError(field(path, key), "expected a non-negative integer");
  }
  const auto out = v.get<std::uint64_t>();
  if (out < min_value) {
    throw ConfigError(field(path, key), "must be >= " + std::to_string(min_value));
  }
  return out;
}

double get_positive(const json& obj, const std::string& path, const std::string& key,
                    double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number() || !(v.get<double>() > 0.0)) {
    throw ConfigError(field(path, key), "expected a positive number");
  }
  return v.get<double>();
}

std::string get_string(const json& obj, const std::string& path, const std::string& key) {
  if (!obj.contains(key)) throw ConfigError(field(path, key), "missing required field");
  if (!obj.at(key).is_string()) throw ConfigError(field(path, key), "expected a string");
  return obj.at(key).get<std::string>();
}

ModelConfig parse_model(const json& m) {
  const std::string path = "model";
  if (!m.is_object()) throw ConfigError(path, "expected an object");
  ModelConfig out;
  const std::string kind = get_string(m, path, "kind");
  try {
    out.kind = model_kind_from_string(kind);
  } catch (const ModelError&) {
    throw ConfigError("model.kind", "unknown model kind '" + kind + "'");
  }
  out.seed = get_uint(m, path, "seed", 0);

  switch (out.kind) {
    case ModelKind::movielens_logistic:
      reject_unknown(m, path, {"kind", "seed", "M", "N", "data_root"});
      out.num_users = get_uint(m, path, "M", 10, 1);
      out.ratings_per_user = get_uint(m, path, "N", 30, 1);
      if (m.contains("data_root")) out.data_root = get_string(m, path, "data_root");
      break;
    case ModelKind::synthetic_linear:
    case ModelKind::conjugate_oracle: {
      if (out.kind == ModelKind::synthetic_linear) {
        reject_unknown(m, path, {"kind", "seed", "M", "N", "d_z", "group_sizes", "heterogeneous"});
      } else {
        reject_unknown(m, path,
                       {"kind", "seed", "M", "N", "d_z", "group_sizes", "heterogeneous", "variances"});
      }
      SyntheticConfig& s = out.synthetic;
      s.seed = out.seed;
      s.d_z = get_uint(m, path, "d_z", 1, 1);
      s.N = get_uint(m, path, "N", 10, 1);
      const bool heterogeneous = m.contains("heterogeneous") && m.at("heterogeneous").is_boolean() &&
                                 m.at("heterogeneous").get<bool>();
      if (m.contains("heterogeneous") && !m.at("heterogeneous").is_boolean()) {
        throw ConfigError("model.heterogeneous", "expected a boolean");
      }
      if (heterogeneous && m.contains("group_sizes")) {
        throw ConfigError("model.group_sizes", "conflicts with heterogeneous = true");
      }
      if (heterogeneous) {
        s.group_sizes = heterogeneous_group_sizes();
      } else if (m.contains("group_sizes")) {
        const json& gs = m.at("group_sizes");
        if (!gs.is_array() || gs.empty()) {
          throw ConfigError("model.group_sizes", "expected a nonempty array");
        }
        for (std::size_t i = 0; i < gs.size(); ++i) {
          if (!gs[i].is_number_integer() || gs[i].get<std::int64_t>() < 1) {
            throw ConfigError("model.group_sizes[" + std::to_string(i) + "]",
                              "expected a positive integer");
          }
          s.group_sizes.push_back(gs[i].get<std::size_t>());
        }
      }
      const std::size_t default_m = s.group_sizes.empty() ? 10 : s.group_sizes.size();
      s.M = get_uint(m, path, "M", default_m, 1);
      if (!s.group_sizes.empty() && s.group_sizes.size() != s.M) {
        throw ConfigError("model.M", "does not match the length of group_sizes");
      }
      if (m.contains("variances")) {
        const json& v = m.at("variances");
        reject_unknown(v, "model.variances", {"prior", "local", "observation"});
        out.variances.prior = get_positive(v, "model.variances", "prior", 1.0);
        out.variances.local = get_positive(v, "model.variances", "local", 1.0);
        out.variances.observation = get_positive(v, "model.variances", "observation", 1.0);
      }
      break;
    }
  }
  return out;
}

BoundSpec parse_grid_entry(const json& e, const std::string& path) {
  reject_unknown(e, path,
                 {"operator", "K", "scope", "minibatch", "leapfrog_steps", "step_size", "damping"});
  BoundSpec spec;
  const std::string op = get_string(e, path, "operator");
  if (op == "VI") {
    spec.op = OperatorKind::vi;
  } else if (op == "IW") {
    spec.op = OperatorKind::iw;
  } else if (op == "UHA") {
    spec.op = OperatorKind::uha;
  } else {
    throw ConfigError(path + ".operator", "expected one of VI, IW, UHA");
  }
  if (spec.op == OperatorKind::vi) {
    if (e.contains("K")) throw ConfigError(path + ".K", "VI takes no K");
  } else {
    if (!e.contains("K")) throw ConfigError(path + ".K", "missing required field");
    spec.K = static_cast<int>(get_uint(e, path, "K", 1, 1));
  }
  if (e.contains("scope")) {
    const std::string scope = get_string(e, path, "scope");
    if (scope == "local") {
      spec.scope = Scope::local;
    } else if (scope == "global") {
      spec.scope = Scope::global;
    } else {
      throw ConfigError(path + ".scope", "expected 'local' or 'global'");
    }
  }
  if (spec.scope == Scope::global && spec.op == OperatorKind::uha) {
    throw ConfigError(path + ".scope", "UHA is only available as a local operator");
  }
  if (e.contains("minibatch")) {
    if (spec.scope == Scope::global) {
      throw ConfigError(path + ".minibatch", "global IW is incompatible with subsampling");
    }
    spec.minibatch = get_uint(e, path, "minibatch", 1, 1);
  }
  if (spec.op != OperatorKind::uha) {
    for (const char* key : {"leapfrog_steps", "step_size", "damping"}) {
      if (e.contains(key)) throw ConfigError(field(path, key), "only valid for UHA");
    }
  } else {
    spec.leapfrog_steps = static_cast<int>(get_uint(e, path, "leapfrog_steps", 1, 1));
    spec.uha_init.step_size = get_positive(e, path, "step_size", spec.uha_init.step_size);
    spec.uha_init.damping = get_positive(e, path, "damping", spec.uha_init.damping);
    if (!(spec.uha_init.damping < 1.0)) {
      throw ConfigError(path + ".damping", "must lie in (0, 1)");
    }
  }
  return spec;
}

std::size_t model_group_count(const ModelConfig& m) {
  return m.kind == ModelKind::movielens_logistic ? m.num_users : m.synthetic.M;
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& doc) {
  reject_unknown(doc, "", {"model", "grid", "train", "output_dir"});
  ExperimentConfig config;
  config.source = doc;
  if (!doc.contains("model")) throw ConfigError("model", "missing required field");
  config.model = parse_model(doc.at("model"));

  if (!doc.contains("grid")) throw ConfigError("grid", "missing required field");
  const json& grid = doc.at("grid");
  if (!grid.is_array() || grid.empty()) throw ConfigError("grid", "expected a nonempty array");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    config.grid.push_back(parse_grid_entry(grid[k], "grid[" + std::to_string(k) + "]"));
  }

  const json train = doc.contains("train") ? doc.at("train") : json::object();
  reject_unknown(train, "train",
                 {"steps", "pretrain_steps", "minibatch", "seeds", "eval_samples", "log_every",
                  "learning_rate"});
  TrainConfig& t = config.train;
  t.steps = get_uint(train, "train", "steps", t.steps, 1);
  t.pretrain_steps = get_uint(train, "train", "pretrain_steps", t.pretrain_steps);
  t.eval_samples = get_uint(train, "train", "eval_samples", t.eval_samples, 1);
  t.log_every = get_uint(train, "train", "log_every", t.log_every, 1);
  t.learning_rate = get_positive(train, "train", "learning_rate", t.learning_rate);
  if (train.contains("minibatch")) {
    if (train.at("minibatch").is_null()) {
      t.minibatch.reset();
    } else {
      t.minibatch = get_uint(train, "train", "minibatch", 10, 1);
    }
  }
  if (train.contains("seeds")) {
    const json& seeds = train.at("seeds");
    if (!seeds.is_array() || seeds.empty()) {
      throw ConfigError("train.seeds", "expected a nonempty array of integers");
    }
    std::set<std::uint64_t> seen;
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      if (!seeds[k].is_number_integer() || seeds[k].get<std::int64_t>() < 0) {
        throw ConfigError("train.seeds[" + std::to_string(k) + "]",
                          "expected a non-negative integer");
      }
      if (!seen.insert(seeds[k].get<std::uint64_t>()).second) {
        throw ConfigError("train.seeds[" + std::to_string(k) + "]", "duplicate seed");
      }
      config.seeds.push_back(seeds[k].get<std::uint64_t>());
    }
  } else {
    config.seeds = {0, 1, 2, 3, 4};
  }

  const std::size_t groups = model_group_count(config.model);
  // The default M' = 10 silently means full batch on smaller models; only an
  // explicit value is checked.
  if (train.contains("minibatch") && t.minibatch && *t.minibatch > groups) {
    throw ConfigError("train.minibatch", "exceeds the number of groups (" +
                                             std::to_string(groups) + ")");
  }
  std::set<std::string> labels;
  for (std::size_t k = 0; k < config.grid.size(); ++k) {
    const std::string path = "grid[" + std::to_string(k) + "]";
    try {
      config.grid[k].validate(groups);
    } catch (const BoundError& e) {
      throw ConfigError(path, e.what());
    }
    if (!labels.insert(config.grid[k].label()).second) {
      throw ConfigError(path, "duplicate method " + config.grid[k].label());
    }
  }

  if (!doc.contains("output_dir")) throw ConfigError("output_dir", "missing required field");
  config.output_dir = get_string(doc, "", "output_dir");
  return config;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("not valid JSON: ") + e.what());
  }
  return parse_experiment_config(doc);
}

ModelInstance build_model(const ModelConfig& config, json* dataset_artifact) {
  switch (config.kind) {
    case ModelKind::synthetic_linear: {
      GeneratedData data = generate_synthetic(config.synthetic);
      if (dataset_artifact) {
        *dataset_artifact = dataset_to_json(
            data.dataset,
            {{"kind", "synthetic_linear"}, {"M", config.synthetic.M}, {"d_z", config.synthetic.d_z},
             {"group_sizes", config.synthetic.sizes()}, {"seed", config.synthetic.seed}},
            data.truth);
      }
      return ModelInstance::synthetic_linear(std::move(data.dataset));
    }
    case ModelKind::conjugate_oracle: {
      GeneratedData data = generate_conjugate(config.synthetic, config.variances);
      if (dataset_artifact) {
        *dataset_artifact = dataset_to_json(
            data.dataset,
            {{"kind", "conjugate_oracle"}, {"M", config.synthetic.M}, {"d_z", config.synthetic.d_z},
             {"group_sizes", config.synthetic.sizes()}, {"seed", config.synthetic.seed},
             {"variances",
              {{"prior", config.variances.prior}, {"local", config.variances.local},
               {"observation", config.variances.observation}}}},
            data.truth);
      }
      return ModelInstance::conjugate_oracle(std::move(data.dataset), config.variances);
    }
    case ModelKind::movielens_logistic: {
      std::filesystem::path root;
      if (config.data_root) {
        root = *config.data_root;
      } else if (const char* env = std::getenv(kMovieLensEnv)) {
        root = env;
      } else {
        throw DataError(std::string("no MovieLens directory: set model.data_root or ") +
                        kMovieLensEnv);
      }
      MovieLensConfig ml = MovieLensConfig::in_directory(root);
      ml.num_users = config.num_users;
      ml.ratings_per_user = config.ratings_per_user;
      ml.seed = config.seed;
      HierarchicalDataset data = load_movielens(ml);
      if (dataset_artifact) {
        *dataset_artifact = dataset_to_json(
            data, {{"kind", "movielens_logistic"}, {"M", ml.num_users}, {"N", ml.ratings_per_user},
                   {"seed", ml.seed}});
      }
      return ModelInstance::movielens_logistic(std::move(data));
    }
  }
  throw ConfigError("model.kind", "unsupported");
}

namespace {

struct Task {
  std::size_t method;
  std::size_t seed_index;
};

std::string file_stem(const BoundSpec& spec, std::uint64_t seed) {
  return spec.label() + "_seed" + std::to_string(seed);
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, int jobs) {
  if (jobs < 1) throw ConfigError("jobs", "must be >= 1");
  json dataset_artifact;
  const ModelInstance model = build_model(config.model, &dataset_artifact);
  std::filesystem::create_directories(config.output_dir);
  write_json_file(config.output_dir / "dataset.json", dataset_artifact);

  RunResult result;
  result.config = config.source;
  result.methods.resize(config.grid.size());
  std::vector<Task> tasks;
  for (std::size_t m = 0; m < config.grid.size(); ++m) {
    result.methods[m].spec = config.grid[m];
    result.methods[m].seeds.resize(config.seeds.size());
    for (std::size_t s = 0; s < config.seeds.size(); ++s) tasks.push_back({m, s});
  }

  std::vector<std::string> errors(tasks.size());
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
  for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(tasks.size()); ++n) {
    const Task& task = tasks[static_cast<std::size_t>(n)];
    const BoundSpec& spec = config.grid[task.method];
    const std::uint64_t seed = config.seeds[task.seed_index];
    try {
      const TrainResult trained = train(model, spec, config.train, seed);
      SeedResult& out = result.methods[task.method].seeds[task.seed_index];
      out.seed = seed;
      out.final = evaluate_final(trained.state, model, spec, config.train.eval_samples, seed);
      out.wall_seconds = trained.wall_seconds;
      out.trace_file = file_stem(spec, seed) + "_trace.csv";
      out.state_file = file_stem(spec, seed) + "_state.json";
      write_trace_csv(config.output_dir / out.trace_file, trained.trace);
      write_json_file(config.output_dir / out.state_file, state_to_json(trained.state));
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(n)] = spec.label() + " seed " + std::to_string(seed) + ": " + e.what();
    }
  }
  for (const std::string& e : errors) {
    if (!e.empty()) throw std::runtime_error(e);
  }

  for (MethodResult& m : result.methods) {
    const double n = static_cast<double>(m.seeds.size());
    double mean = 0.0;
    for (const SeedResult& s : m.seeds) mean += s.final.mean;
    mean /= n;
    double ss = 0.0;
    for (const SeedResult& s : m.seeds) ss += (s.final.mean - mean) * (s.final.mean - mean);
    m.mean_final_bound = mean;
    m.std_final_bound = m.seeds.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  write_json_file(config.output_dir / "summary.json", run_result_to_json(result));
  return result;
}

json run_result_to_json(const RunResult& result) {
  json methods = json::array();
  for (const MethodResult& m : result.methods) {
    json seeds = json::array();
    for (const SeedResult& s : m.seeds) {
      seeds.push_back({{"seed", s.seed},
                       {"final_bound", s.final.mean},
                       {"std_error", s.final.std_error ? json(*s.final.std_error) : json(nullptr)},
                       {"wall_seconds", s.wall_seconds},
                       {"trace_file", s.trace_file},
                       {"state_file", s.state_file}});
    }
    methods.push_back({{"label", m.spec.label()},
                       {"method", to_string(m.spec.op)},
                       {"scope", to_string(m.spec.scope)},
                       {"K", m.spec.op == OperatorKind::vi ? json(nullptr) : json(m.spec.K)},
                       {"mean_final_bound", m.mean_final_bound},
                       {"std_final_bound", m.std_final_bound},
                       {"seeds", std::move(seeds)}});
  }
  return {{"config", result.config}, {"methods", std::move(methods)}};
}

std::vector<CompareRow> collect_results(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw std::runtime_error(dir.string() + " is not a directory");
  }
  std::vector<std::filesystem::path> summaries;
  if (std::filesystem::exists(dir / "summary.json")) summaries.push_back(dir / "summary.json");
  std::vector<std::filesystem::path> subdirs;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "summary.json")) {
      subdirs.push_back(entry.path() / "summary.json");
    }
  }
  std::sort(subdirs.begin(), subdirs.end());
  summaries.insert(summaries.end(), subdirs.begin(), subdirs.end());
  if (summaries.empty()) throw std::runtime_error("no summary.json found in " + dir.string());

  std::vector<CompareRow> rows;
  for (const auto& path : summaries) {
    const json summary = read_json_file(path);
    for (const json& m : summary.at("methods")) {
      for (const json& s : m.at("seeds")) {
        CompareRow row;
        row.method = m.at("method").get<std::string>();
        row.scope = m.at("scope").get<std::string>();
        if (!m.at("K").is_null()) row.K = m.at("K").get<int>();
        row.seed = s.at("seed").get<std::uint64_t>();
        row.final_bound = s.at("final_bound").get<double>();
        if (!s.at("std_error").is_null()) row.std_error = s.at("std_error").get<double>();
        row.wall_seconds = s.at("wall_seconds").get<double>();
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

std::size_t write_compare_csv(const std::filesystem::path& dir, const std::filesystem::path& out) {
  const std::vector<CompareRow> rows = collect_results(dir);
  std::ofstream csv(out, std::ios::binary);
  if (!csv) throw std::runtime_error("cannot write " + out.string());
  csv << "method,scope,K,seed,final_bound,std_error,wall_seconds\n";
  for (const CompareRow& r : rows) {
    csv << r.method << ',' << r.scope << ',' << (r.K ? std::to_string(*r.K) : "") << ',' << r.seed
        << ',' << format_double(r.final_bound) << ','
        << (r.std_error ? format_double(*r.std_error) : "") << ',' << format_double(r.wall_seconds)
        << '\n';
  }
  return rows.size();
}

std::vector<CompareRow> read_compare_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "method,scope,K,seed,final_bound,std_error,wall_seconds") {
    throw std::runtime_error(path.string() + ": unexpected header");
  }
  std::vector<CompareRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.push_back("");
    if (f.size() != 7) throw std::runtime_error(path.string() + ": row has wrong field count");
    CompareRow r;
    r.method = f[0];
    r.scope = f[1];
    if (!f[2].empty()) r.K = std::stoi(f[2]);
    r.seed = std::stoull(f[3]);
    r.final_bound = std::stod(f[4]);
    if (!f[5].empty()) r.std_error = std::stod(f[5]);
    r.wall_seconds = std::stod(f[6]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace lebound

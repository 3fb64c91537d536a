#include "lebound/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>

#include "lebound/noise.hpp"

namespace lebound {

std::vector<std::size_t> SyntheticConfig::sizes() const {
  if (M < 1) throw DataError("synthetic config needs M >= 1");
  if (d_z < 1) throw DataError("synthetic config needs d_z >= 1");
  std::vector<std::size_t> out = group_sizes.empty() ? std::vector<std::size_t>(M, N) : group_sizes;
  if (out.size() != M) {
    throw DataError("group_sizes has " + std::to_string(out.size()) + " entries, expected M = " +
                    std::to_string(M));
  }
  for (std::size_t n : out) {
    if (n < 1) throw DataError("every group needs at least one observation");
  }
  return out;
}

std::vector<std::size_t> heterogeneous_group_sizes() {
  std::vector<std::size_t> sizes(50, 2);
  sizes.insert(sizes.end(), 30, 5);
  sizes.insert(sizes.end(), 20, 30);
  return sizes;
}

namespace {

enum class Generator { synthetic, conjugate };

GeneratedData generate(const SyntheticConfig& config, Generator kind,
                       const ConjugateVariances& variances) {
  const std::vector<std::size_t> sizes = config.sizes();
  const std::size_t d = config.d_z;
  const NoiseStreams streams(config.seed, Purpose::data, 0);
  NormalSource global(streams.rng(Stream::theta));

  GeneratedData out;
  out.dataset.d_z = d;
  std::vector<double> local_sd(d);
  std::vector<double> local_mean(d);
  double obs_sd = 0.0;
  if (kind == Generator::synthetic) {
    out.truth.theta = global.draw(2 * d + 1);
    for (std::size_t k = 0; k < d; ++k) {
      local_mean[k] = out.truth.theta[k];
      local_sd[k] = std::exp(0.5 * out.truth.theta[d + k]);
    }
    obs_sd = std::exp(0.5 * out.truth.theta[2 * d]);
  } else {
    out.truth.theta = global.draw(d);
    for (std::size_t k = 0; k < d; ++k) {
      out.truth.theta[k] *= std::sqrt(variances.prior);
      local_mean[k] = out.truth.theta[k];
      local_sd[k] = std::sqrt(variances.local);
    }
    obs_sd = std::sqrt(variances.observation);
  }

  for (std::size_t i = 0; i < sizes.size(); ++i) {
    NormalSource source(streams.rng(Stream::local, i));
    std::vector<double> z = source.draw(d);
    for (std::size_t k = 0; k < d; ++k) z[k] = local_mean[k] + local_sd[k] * z[k];
    std::vector<double> features = source.draw(sizes[i] * d);
    std::vector<double> outcomes(sizes[i]);
    for (std::size_t j = 0; j < sizes[i]; ++j) {
      double fitted = 0.0;
      for (std::size_t k = 0; k < d; ++k) fitted += z[k] * features[j * d + k];
      outcomes[j] = fitted + obs_sd * source.draw_one();
    }
    out.dataset.groups.emplace_back(std::move(features), std::move(outcomes));
    out.truth.z.push_back(std::move(z));
  }
  return out;
}

}  // namespace

GeneratedData generate_synthetic(const SyntheticConfig& config) {
  return generate(config, Generator::synthetic, {});
}

GeneratedData generate_conjugate(const SyntheticConfig& config,
                                 const ConjugateVariances& variances) {
  return generate(config, Generator::conjugate, variances);
}

int binarize(int rating) {
  if (rating < 1 || rating > 5) {
    throw DataError("rating " + std::to_string(rating) + " outside 1..5");
  }
  return rating >= 4 ? 1 : 0;
}

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

template <class Int>
bool parse_int(std::string_view text, Int& out) {
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

[[noreturn]] void malformed(const std::filesystem::path& path, std::size_t line_no,
                            const std::string& why) {
  throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + why);
}

}  // namespace

std::vector<Rating> parse_ratings(const std::filesystem::path& path) {
  std::ifstream in = open(path);
  std::vector<Rating> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != 4) malformed(path, line_no, "expected 4 tab-separated fields");
    Rating r{};
    if (!parse_int(f[0], r.user) || !parse_int(f[1], r.item) || !parse_int(f[2], r.rating) ||
        !parse_int(f[3], r.timestamp)) {
      malformed(path, line_no, "non-integer field");
    }
    if (r.rating < 1 || r.rating > 5) malformed(path, line_no, "rating outside 1..5");
    out.push_back(r);
  }
  return out;
}

std::map<std::uint32_t, std::vector<double>> parse_items(const std::filesystem::path& path) {
  std::ifstream in = open(path);
  std::map<std::uint32_t, std::vector<double>> out;
  std::string line;
  std::size_t line_no = 0;
  constexpr std::size_t kFlags = kGenreCount + 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line, '|');
    if (f.size() < kFlags + 1) malformed(path, line_no, "too few fields for 19 genre flags");
    std::uint32_t item = 0;
    if (!parse_int(f[0], item)) malformed(path, line_no, "non-integer item id");
    std::vector<double> genres;
    genres.reserve(kGenreCount);
    // The first of the trailing 19 flags is "unknown" and is dropped.
    for (std::size_t k = f.size() - kGenreCount; k < f.size(); ++k) {
      if (f[k] == "0") {
        genres.push_back(0.0);
      } else if (f[k] == "1") {
        genres.push_back(1.0);
      } else {
        malformed(path, line_no, "genre flag is not 0/1");
      }
    }
    const std::string_view unknown = f[f.size() - kFlags];
    if (unknown != "0" && unknown != "1") malformed(path, line_no, "genre flag is not 0/1");
    if (!out.emplace(item, std::move(genres)).second) malformed(path, line_no, "duplicate item id");
  }
  return out;
}

MovieLensConfig MovieLensConfig::in_directory(const std::filesystem::path& root) {
  MovieLensConfig config;
  config.ratings_path = root / "u.data";
  config.items_path = root / "u.item";
  return config;
}

HierarchicalDataset load_movielens(const MovieLensConfig& config) {
  if (config.num_users < 1 || config.ratings_per_user < 1) {
    throw DataError("MovieLens selection needs M >= 1 and N >= 1");
  }
  const std::vector<Rating> ratings = parse_ratings(config.ratings_path);
  const auto items = parse_items(config.items_path);

  std::map<std::uint32_t, std::vector<const Rating*>> by_user;
  for (const Rating& r : ratings) by_user[r.user].push_back(&r);

  std::vector<std::uint32_t> eligible;
  for (const auto& [user, rows] : by_user) {
    if (rows.size() >= config.ratings_per_user) eligible.push_back(user);
  }
  if (eligible.size() < config.num_users) {
    throw DataError("only " + std::to_string(eligible.size()) + " users have at least " +
                    std::to_string(config.ratings_per_user) + " ratings; " +
                    std::to_string(config.num_users) + " requested");
  }

  const NoiseStreams streams(config.seed, Purpose::data, 1);
  Rng user_rng = streams.rng(Stream::minibatch);
  std::shuffle(eligible.begin(), eligible.end(), user_rng);
  eligible.resize(config.num_users);

  HierarchicalDataset dataset;
  dataset.d_z = kGenreCount;
  for (std::size_t g = 0; g < eligible.size(); ++g) {
    const auto& rows = by_user[eligible[g]];
    std::vector<const Rating*> picked;
    Rng rating_rng = streams.rng(Stream::local, eligible[g]);
    std::sample(rows.begin(), rows.end(), std::back_inserter(picked), config.ratings_per_user,
                rating_rng);
    std::vector<double> features;
    std::vector<double> outcomes;
    features.reserve(picked.size() * kGenreCount);
    for (const Rating* r : picked) {
      const auto it = items.find(r->item);
      if (it == items.end()) {
        throw DataError("rating references unknown item " + std::to_string(r->item));
      }
      features.insert(features.end(), it->second.begin(), it->second.end());
      outcomes.push_back(binarize(r->rating));
    }
    dataset.groups.emplace_back(std::move(features), std::move(outcomes));
  }
  return dataset;
}

}  // namespace lebound

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <doctest.h>

#include "helpers.hpp"
#include "lebound/data.hpp"

using lebound::DataError;
using lebound::SyntheticConfig;

namespace fs = std::filesystem;

namespace {

const fs::path kMovieLens = LEBOUND_MOVIELENS_DIR;

bool have_movielens() {
  const bool ok = fs::exists(kMovieLens / "u.data") && fs::exists(kMovieLens / "u.item");
  if (!ok) MESSAGE("MovieLens-100K not found under ", kMovieLens.string(), "; skipping");
  return ok;
}

fs::path write_temp(const std::string& name, const std::string& body) {
  const fs::path p = fs::temp_directory_path() / ("lebound_test_" + name);
  std::ofstream(p) << body;
  return p;
}

bool same(const lebound::HierarchicalDataset& a, const lebound::HierarchicalDataset& b) {
  if (a.d_z != b.d_z || a.groups.size() != b.groups.size()) return false;
  for (std::size_t i = 0; i < a.groups.size(); ++i) {
    const auto& ga = a.groups[i];
    const auto& gb = b.groups[i];
    if (!std::equal(ga.features().begin(), ga.features().end(), gb.features().begin(), gb.features().end()) ||
        !std::equal(ga.outcomes().begin(), ga.outcomes().end(), gb.outcomes().begin(), gb.outcomes().end())) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("synthetic shapes") {
  SyntheticConfig c;
  c.M = 3;
  c.N = 2;
  c.d_z = 1;
  const auto g = lebound::generate_synthetic(c);
  CHECK(g.dataset.num_groups() == 3);
  CHECK(g.dataset.d_z == 1);
  for (const auto& grp : g.dataset.groups) {
    CHECK(grp.size() == 2);
    CHECK(grp.width() == 1);
  }
  CHECK(g.truth.theta.size() == 3);
  CHECK(g.truth.z.size() == 3);

  const auto sizes = lebound::heterogeneous_group_sizes();
  CHECK(sizes.size() == 100);
  CHECK(std::count(sizes.begin(), sizes.end(), 2) == 50);
  CHECK(std::count(sizes.begin(), sizes.end(), 5) == 30);
  CHECK(std::count(sizes.begin(), sizes.end(), 30) == 20);
  SyntheticConfig h;
  h.M = 100;
  h.group_sizes = sizes;
  h.d_z = 2;
  const auto het = lebound::generate_synthetic(h);
  for (std::size_t i = 0; i < 100; ++i) CHECK(het.dataset.groups[i].size() == sizes[i]);

  h.M = 99;
  CHECK_THROWS_AS(lebound::generate_synthetic(h), DataError);
  SyntheticConfig zero;
  zero.N = 0;
  CHECK_THROWS_AS(lebound::generate_synthetic(zero), DataError);
}

TEST_CASE("generation is a deterministic function of the seed") {
  SyntheticConfig c;
  c.M = 5;
  c.N = 4;
  c.d_z = 3;
  c.seed = 12;
  CHECK(same(lebound::generate_synthetic(c).dataset, lebound::generate_synthetic(c).dataset));
  CHECK(same(lebound::generate_conjugate(c).dataset, lebound::generate_conjugate(c).dataset));
  auto other = c;
  other.seed = 13;
  CHECK_FALSE(same(lebound::generate_synthetic(c).dataset, lebound::generate_synthetic(other).dataset));
}

TEST_CASE("residual variance matches the true observation variance") {
  SyntheticConfig c;
  c.M = 100;
  c.N = 1000;
  c.d_z = 2;
  for (std::uint64_t seed : {1, 2, 3}) {
    c.seed = seed;
    const auto g = lebound::generate_synthetic(c);
    std::vector<double> resid;
    for (std::size_t i = 0; i < c.M; ++i) {
      const auto& grp = g.dataset.groups[i];
      for (std::size_t j = 0; j < grp.size(); ++j) {
        const double fit = g.truth.z[i][0] * grp.row(j)[0] + g.truth.z[i][1] * grp.row(j)[1];
        resid.push_back(grp.outcomes()[j] - fit);
      }
    }
    double ss = 0.0;
    for (double r : resid) ss += r * r;
    const double var = ss / static_cast<double>(resid.size());
    const double truth = std::exp(g.truth.theta[4]);
    CHECK(std::abs(var / truth - 1.0) <= 0.05);
  }
}

TEST_CASE("generated datasets satisfy the model invariants") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    SyntheticConfig c;
    c.M = 1 + rng() % 12;
    c.d_z = 1 + rng() % 4;
    c.seed = rng();
    if (trial % 2 == 0) {
      c.N = 1 + rng() % 20;
    } else {
      for (std::size_t i = 0; i < c.M; ++i) c.group_sizes.push_back(1 + rng() % 20);
    }
    const auto sizes = c.sizes();
    for (const bool conj : {false, true}) {
      const auto g = conj ? lebound::generate_conjugate(c, {0.5, 2.0, 0.3}) : lebound::generate_synthetic(c);
      REQUIRE(g.dataset.num_groups() == c.M);
      for (std::size_t i = 0; i < c.M; ++i) {
        const auto& grp = g.dataset.groups[i];
        CHECK(grp.size() == sizes[i]);
        CHECK(grp.width() == c.d_z);
        for (double v : grp.outcomes()) CHECK(std::isfinite(v));
      }
      CHECK(g.truth.theta.size() == (conj ? c.d_z : 2 * c.d_z + 1));
      CHECK_NOTHROW(conj ? lebound::ModelInstance::conjugate_oracle(g.dataset)
                         : lebound::ModelInstance::synthetic_linear(g.dataset));
    }
  }
}

TEST_CASE("binarize") {
  CHECK(lebound::binarize(1) == 0);
  CHECK(lebound::binarize(2) == 0);
  CHECK(lebound::binarize(3) == 0);
  CHECK(lebound::binarize(4) == 1);
  CHECK(lebound::binarize(5) == 1);
  CHECK_THROWS_AS(lebound::binarize(0), DataError);
  CHECK_THROWS_AS(lebound::binarize(6), DataError);
}

TEST_CASE("malformed input files report the line") {
  const auto ratings = write_temp("ratings.tsv", "1\t2\t3\t881250949\n1\t5\tx\t881250949\n");
  try {
    lebound::parse_ratings(ratings);
    FAIL("expected a throw");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
  CHECK_THROWS_AS(lebound::parse_ratings(write_temp("short.tsv", "1\t2\t3\n")), DataError);
  CHECK_THROWS_AS(lebound::parse_ratings(write_temp("range.tsv", "1\t2\t7\t0\n")), DataError);
  CHECK_THROWS_AS(lebound::parse_ratings(fs::temp_directory_path() / "lebound_no_such_file"), DataError);

  const std::string flags19 = "|0|1|0|0|0|0|0|0|0|0|0|0|0|0|0|0|0|0|1";
  const auto items = write_temp("items.txt", "1|A (1990)||||" + flags19.substr(1) + "\n2|B||" + flags19 + "\n3|C||" + "|0|2|0\n");
  try {
    lebound::parse_items(items);
    FAIL("expected a throw");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  const auto good = lebound::parse_items(write_temp("items_ok.txt", "7|A (1990)|||" + flags19 + "\n"));
  REQUIRE(good.count(7) == 1);
  CHECK(good.at(7).size() == 18);
  CHECK(good.at(7).front() == 1.0);  // the "unknown" flag is dropped
  CHECK(good.at(7).back() == 1.0);
}

TEST_CASE("MovieLens-100K ingestion") {
  if (!have_movielens()) return;
  const auto cfg = lebound::MovieLensConfig::in_directory(kMovieLens);
  const auto ratings = lebound::parse_ratings(cfg.ratings_path);
  CHECK(ratings.size() == 100000);

  // Independent recount of users straight from the file.
  std::ifstream in(cfg.ratings_path);
  std::set<std::string> scanned;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) scanned.insert(line.substr(0, line.find('\t')));
  }
  std::set<std::uint32_t> parsed;
  for (const auto& r : ratings) parsed.insert(r.user);
  CHECK(parsed.size() == scanned.size());
  CHECK(parsed.size() == 943);

  const auto items = lebound::parse_items(cfg.items_path);
  CHECK(items.size() == 1682);
  for (const auto& [id, x] : items) {
    REQUIRE(x.size() == 18);
    for (double v : x) CHECK((v == 0.0 || v == 1.0));
  }

  auto sel = cfg;
  sel.num_users = 10;
  sel.ratings_per_user = 30;
  sel.seed = 4;
  const auto data = lebound::load_movielens(sel);
  CHECK(data.d_z == 18);
  REQUIRE(data.num_groups() == 10);
  for (const auto& g : data.groups) {
    CHECK(g.size() == 30);
    CHECK(g.width() == 18);
    for (double y : g.outcomes()) CHECK((y == 0.0 || y == 1.0));
  }
  CHECK_NOTHROW(lebound::ModelInstance::movielens_logistic(data));
  CHECK(same(data, lebound::load_movielens(sel)));
  auto reseeded = sel;
  reseeded.seed = 5;
  CHECK_FALSE(same(data, lebound::load_movielens(reseeded)));

  auto greedy = sel;
  greedy.num_users = 900;
  greedy.ratings_per_user = 200;
  CHECK_THROWS_AS(lebound::load_movielens(greedy), DataError);
}

#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "helpers.hpp"
#include "lebound/bounds.hpp"
#include "lebound/uha.hpp"

using lebound::AnnealingSchedule;
using lebound::GaussianValues;
using lebound::ModelInstance;
using lebound::Tape;
using lebound::UhaParams;
using lebound::UhaSettings;
using lebound::Var;

namespace {

using Vec = std::vector<double>;

std::span<const double> sp(const Vec& v) { return v; }

// One group, d_z = 1, ten observations: the local posterior has sd ≈ 0.3.
ModelInstance narrow_model() {
  return ModelInstance::conjugate_oracle(testing::random_dataset(1, 10, 1, 31));
}

}  // namespace

TEST_CASE("annealing schedule") {
  const auto s = AnnealingSchedule::linear(4);
  CHECK(s.num_distributions() == 4);
  CHECK(s.beta(0) == 0.0);
  CHECK(s.beta(2) == 0.5);
  CHECK(s.beta(4) == 1.0);
  CHECK_THROWS_AS(s.beta(5), std::out_of_range);
  CHECK_THROWS_AS(s.beta(-1), std::out_of_range);
  CHECK(AnnealingSchedule::linear(1).betas().empty());
  CHECK_THROWS(AnnealingSchedule::linear(0));
  CHECK_THROWS(AnnealingSchedule({0.5, 0.5}));
  CHECK_THROWS(AnnealingSchedule({0.2, 1.0}));
  CHECK_THROWS(AnnealingSchedule({0.0}));
}

TEST_CASE("bridge endpoints") {
  const auto model = ModelInstance::synthetic_linear(testing::random_dataset(2, 4, 2, 5));
  std::mt19937_64 rng(1);
  const auto theta = testing::normals(5, rng);
  const GaussianValues q{testing::normals(2, rng), testing::normals(2, rng, 0.3)};
  const auto z = testing::normals(2, rng);
  const auto s = AnnealingSchedule::linear(3);
  CHECK(lebound::bridging_logdensity(s, 0, q, model, sp(theta), 1, sp(z)) ==
        lebound::log_density(q, sp(z)));
  CHECK(lebound::bridging_logdensity(s, 3, q, model, sp(theta), 1, sp(z)) ==
        model.log_group_joint(sp(theta), 1, sp(z)));
}

TEST_CASE("geometric midpoint of two Gaussians") {
  // q = N(m1, v1), p(z | θ, y) = N(m2, v2). At β = ½ the bridge is a Gaussian
  // with precision (λ1 + λ2)/2 and precision-weighted mean, up to a constant.
  const auto model = narrow_model();
  const Vec theta{0.3};
  const auto post = model.local_posterior(theta, 0);
  const double m1 = -0.8, v1 = 2.0;
  const double m2 = post.mean(0), v2 = post.covariance(0, 0);
  const double lam = 0.5 * (1 / v1 + 1 / v2);
  const double m = 0.5 * (m1 / v1 + m2 / v2) / lam;
  const GaussianValues q{{m1}, {0.5 * std::log(v1)}};
  std::vector<double> offsets;
  for (double z : {-2.0, -0.5, 0.0, 0.4, 1.7}) {
    const Vec zv{z};
    const double bridge = lebound::geometric_bridge(0.5, q, model, sp(theta), 0, sp(zv));
    offsets.push_back(bridge - testing::normal_logpdf(z, m, 1 / lam));
  }
  for (double o : offsets) CHECK(o == doctest::Approx(offsets[0]).epsilon(1e-12));

  // The bridge gradient agrees with the tape.
  Tape t;
  const lebound::Gaussian<Var> qv{{t.leaf(m1)}, {t.leaf(0.5 * std::log(v1))}};
  const std::vector<Var> tv{t.leaf(0.3)};
  const std::vector<Var> zv{t.leaf(0.9)};
  const auto g = t.backward(lebound::geometric_bridge(0.3, qv, model, std::span<const Var>(tv), 0,
                                                      std::span<const Var>(zv)));
  const auto analytic = lebound::bridging_grad(0.3, qv, model, std::span<const Var>(tv), 0,
                                               std::span<const Var>(zv));
  CHECK(analytic[0].value() == doctest::Approx(g[zv[0]]).epsilon(1e-12));
}

TEST_CASE("leapfrog") {
  const auto flat = [](std::span<const double> z) { return Vec(z.size(), 0.0); };
  const auto harmonic = [](std::span<const double> z) {
    Vec g(z.begin(), z.end());
    for (double& v : g) v = -v;
    return g;
  };
  const Vec eps{0.1, 0.3};

  SUBCASE("free particle") {
    const auto [z, rho] = lebound::leapfrog(Vec{1.0, 2.0}, Vec{0.5, -1.0}, sp(eps), 1, flat);
    CHECK(z[0] == doctest::Approx(1.05));
    CHECK(z[1] == doctest::Approx(1.7));
    CHECK(rho == Vec{0.5, -1.0});
  }

  SUBCASE("energy is conserved on the harmonic oscillator") {
    const Vec e{0.1};
    Vec z{1.0}, rho{0.5};
    const double h0 = 0.5 * (z[0] * z[0] + rho[0] * rho[0]);
    double worst = 0.0;
    for (int step = 0; step < 100; ++step) {
      std::tie(z, rho) = lebound::leapfrog(z, rho, sp(e), 1, harmonic);
      worst = std::max(worst, std::abs(0.5 * (z[0] * z[0] + rho[0] * rho[0]) - h0));
    }
    CHECK(worst <= 0.01 * h0);
  }

  SUBCASE("time reversal") {
    const auto model = ModelInstance::movielens_logistic(testing::random_dataset(1, 6, 2, 2, true));
    const Vec theta{0.2, -0.1, 0.3, -0.4};
    const GaussianValues q{{0.1, 0.2}, {0.0, -0.5}};
    const auto grad = [&](std::span<const double> at) {
      return lebound::bridging_grad(0.6, q, model, sp(theta), 0, at);
    };
    const Vec z0{0.3, -0.7}, rho0{1.1, 0.4};
    auto [z1, rho1] = lebound::leapfrog(z0, rho0, sp(eps), 7, grad);
    for (double& r : rho1) r = -r;
    const auto [z2, rho2] = lebound::leapfrog(z1, rho1, sp(eps), 7, grad);
    for (int d = 0; d < 2; ++d) {
      CHECK(std::abs(z2[d] - z0[d]) <= 1e-10);
      CHECK(std::abs(rho2[d] + rho0[d]) <= 1e-10);
    }
  }

  SUBCASE("zero step is the identity") {
    const Vec zero{0.0, 0.0};
    const auto [z, rho] = lebound::leapfrog(Vec{1.0, 2.0}, Vec{0.5, -1.0}, sp(zero), 3, harmonic);
    CHECK(z == Vec{1.0, 2.0});
    CHECK(rho == Vec{0.5, -1.0});
    const Vec tiny{1e-9, 1e-9};
    const auto [zt, rt] = lebound::leapfrog(Vec{1.0, 2.0}, Vec{0.5, -1.0}, sp(tiny), 3, harmonic);
    CHECK(zt[1] == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(rt[0] == doctest::Approx(0.5).epsilon(1e-8));
  }

  CHECK_THROWS(lebound::leapfrog(Vec{1.0}, Vec{0.5, -1.0}, sp(eps), 1, flat));
}

TEST_CASE("momentum refresh") {
  const Vec rho{0.7, -1.2};
  const Vec xi{0.3, 0.9};
  CHECK(lebound::momentum_refresh<double, double>(sp(rho), 1.0, sp(xi)) == rho);
  CHECK(lebound::momentum_refresh<double, double>(sp(rho), 0.0, sp(xi)) == xi);
  CHECK_THROWS(lebound::momentum_refresh<double, double>(sp(rho), 1.5, sp(xi)));

  // N(0, I) is stationary under the partial refresh.
  std::mt19937_64 rng(77);
  constexpr int n = 100000;
  std::vector<double> a, b, cross, sq;
  for (int k = 0; k < n; ++k) {
    const auto r = testing::normals(2, rng);
    const auto x = testing::normals(2, rng);
    const auto out = lebound::momentum_refresh<double, double>(sp(r), 0.8, sp(x));
    a.push_back(out[0]);
    b.push_back(out[1]);
    cross.push_back(out[0] * out[1]);
    sq.push_back(out[0] * out[0]);
  }
  for (const auto& xs : {a, b, cross}) {
    const auto s = testing::stats(xs);
    CHECK(std::abs(s.mean) <= 4 * s.se);
  }
  const auto s = testing::stats(sq);
  CHECK(std::abs(s.mean - 1.0) <= 4 * s.se);
}

TEST_CASE("UHA reduces to VI") {
  const auto model = ModelInstance::synthetic_linear(testing::random_dataset(3, 5, 2, 7));
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto theta = testing::normals(5, rng);
    const GaussianValues q{testing::normals(2, rng), testing::normals(2, rng, 0.3)};
    const lebound::NoiseStreams keys(trial, lebound::Purpose::test, 0);
    const Vec vi_noise = lebound::NormalSource(keys.rng(lebound::Stream::local, 2)).draw(2);
    const double vi = lebound::vi_local_operator(q, model, sp(theta), 2, sp(vi_noise));

    const UhaParams<double> tuned{{0.1, 0.2}, 0.9};
    const auto one = lebound::draw_uha_noise(keys, 2, 2, 1);
    CHECK(lebound::uha_operator(q, model, sp(theta), 2, tuned, UhaSettings{1, 1}, one) == vi);

    const UhaParams<double> still{{0.0, 0.0}, 0.9};
    const auto many = lebound::draw_uha_noise(keys, 2, 2, 6);
    CHECK(lebound::uha_operator(q, model, sp(theta), 2, still, UhaSettings{6, 2}, many) == vi);

    // Same with ε = 0 entering as tape leaves.
    Tape t;
    const lebound::Gaussian<Var> qv{{t.leaf(q.mean[0]), t.leaf(q.mean[1])},
                                    {t.leaf(q.log_scale[0]), t.leaf(q.log_scale[1])}};
    std::vector<Var> tv;
    for (double v : theta) tv.push_back(t.leaf(v));
    const UhaParams<Var> sv{{t.leaf(0.0), t.leaf(0.0)}, t.leaf(0.9)};
    CHECK(lebound::uha_operator(qv, model, std::span<const Var>(tv), 2, sv, UhaSettings{6, 2}, many)
              .value() == vi);
  }
}

TEST_CASE("UHA is sandwiched between the ELBO and the marginal") {
  const auto model = narrow_model();
  const Vec theta{0.3};
  const double logp = model.analytic_group_log_marginal(theta, 0);
  const GaussianValues q{{model.local_posterior(theta, 0).mean(0) + 0.5}, {std::log(0.6)}};
  const UhaParams<double> params{{0.15}, 0.9};
  constexpr int n = 100000;
  std::vector<double> uha, vi;
  uha.reserve(n);
  vi.reserve(n);
  for (int r = 0; r < n; ++r) {
    const lebound::NoiseStreams keys(5, lebound::Purpose::test, r);
    const auto noise = lebound::draw_uha_noise(keys, 0, 1, 8);
    uha.push_back(lebound::uha_operator(q, model, sp(theta), 0, params, UhaSettings{8, 1}, noise));
    vi.push_back(lebound::vi_local_operator(q, model, sp(theta), 0, sp(noise.z)));
  }
  const auto su = testing::stats(uha);
  const auto sv = testing::stats(vi);
  MESSAGE("UHA ", su.mean, " ± ", su.se, ", ELBO ", sv.mean, " ± ", sv.se, ", log p ", logp);
  CHECK(su.mean >= sv.mean);
  CHECK(su.mean <= logp + 3 * su.se);
}

TEST_CASE("UHA gradients match finite differences") {
  const auto model = ModelInstance::synthetic_linear(testing::random_dataset(2, 4, 2, 12));
  std::mt19937_64 rng(8);
  constexpr double h = 1e-6;
  // Parameters: q mean (2), q log-scale (2), log ε (2), damping logit, θ (5).
  const auto value = [&](const Vec& p, const lebound::UhaNoise& noise) {
    const GaussianValues q{{p[0], p[1]}, {p[2], p[3]}};
    const Vec log_eps{p[4], p[5]};
    const auto params = lebound::constrain_uha<double>(sp(log_eps), p[6]);
    const Vec theta(p.begin() + 7, p.end());
    return lebound::uha_operator(q, model, sp(theta), 1, params, UhaSettings{4, 2}, noise);
  };
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    Vec p = testing::normals(12, rng, 0.4);
    p[4] = std::log(0.1) + 0.3 * p[4];
    p[5] = std::log(0.1) + 0.3 * p[5];
    const auto noise = lebound::draw_uha_noise(lebound::NoiseStreams(trial, lebound::Purpose::test, 1), 1, 2, 4);

    Tape t;
    std::vector<Var> leaves;
    for (double v : p) leaves.push_back(t.leaf(v));
    const lebound::Gaussian<Var> q{{leaves[0], leaves[1]}, {leaves[2], leaves[3]}};
    const std::vector<Var> log_eps{leaves[4], leaves[5]};
    const auto params = lebound::constrain_uha<Var>(std::span<const Var>(log_eps), leaves[6]);
    const std::vector<Var> theta(leaves.begin() + 7, leaves.end());
    const Var out = lebound::uha_operator(q, model, std::span<const Var>(theta), 1, params,
                                          UhaSettings{4, 2}, noise);
    CHECK(out.value() == value(p, noise));
    const auto g = t.backward(out);
    for (std::size_t k = 0; k < p.size(); ++k) {
      Vec up = p, down = p;
      up[k] += h;
      down[k] -= h;
      const double fd = (value(up, noise) - value(down, noise)) / (2 * h);
      const double a = g[leaves[k]];
      const double err = std::abs(a - fd) / std::max(std::abs(a), 1e-2);
      worst = std::max(worst, err);
    }
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("AIS") {
  const auto model = narrow_model();
  const Vec theta{-0.4};
  const double logp = model.analytic_group_log_marginal(theta, 0);
  const auto post = model.local_posterior(theta, 0);
  const double post_sd = std::sqrt(post.covariance(0, 0));
  const GaussianValues mismatched{{post.mean(0) - 0.6}, {std::log(2.5 * post_sd)}};
  const lebound::HmcSettings hmc{{0.5 * post_sd}, 3};

  SUBCASE("K = 1 is the ELBO") {
    lebound::Rng a(4), b(4);
    const auto r = lebound::ais_evaluate(mismatched, model, sp(theta), 0, 1, hmc, a);
    const Vec noise{std::normal_distribution<double>()(b)};
    CHECK(r.log_weight == lebound::vi_local_operator(mismatched, model, sp(theta), 0, sp(noise)));
    CHECK(std::isnan(r.acceptance_rate));
  }

  SUBCASE("exact posterior gives log p with no variance") {
    const GaussianValues exact{{post.mean(0)}, {std::log(post_sd)}};
    lebound::Rng rng(9);
    for (int r = 0; r < 50; ++r) {
      const auto res = lebound::ais_evaluate(exact, model, sp(theta), 0, 6, hmc, rng);
      CHECK(res.log_weight == doctest::Approx(logp).epsilon(1e-10));
    }
  }

  SUBCASE("lower bound that tightens with K") {
    constexpr int n = 10000;
    std::vector<double> k2, k32;
    lebound::Rng rng(10);
    for (int r = 0; r < n; ++r) {
      k2.push_back(lebound::ais_evaluate(mismatched, model, sp(theta), 0, 2, hmc, rng).log_weight);
      k32.push_back(lebound::ais_evaluate(mismatched, model, sp(theta), 0, 32, hmc, rng).log_weight);
    }
    const auto s2 = testing::stats(k2);
    const auto s32 = testing::stats(k32);
    MESSAGE("AIS K=2 ", s2.mean, " ± ", s2.se, ", K=32 ", s32.mean, " ± ", s32.se, ", log p ", logp);
    CHECK(s2.mean <= logp + 3 * s2.se);
    CHECK(s32.mean <= logp + 3 * s32.se);
    CHECK(s32.mean + 3 * std::hypot(s2.se, s32.se) >= s2.mean);
    CHECK(s32.mean > s2.mean);
  }

  SUBCASE("acceptance falls as the step grows") {
    std::vector<double> rates;
    for (double eps : {0.01, 0.1, 1.0}) {
      const lebound::HmcSettings s{{eps}, 5};
      lebound::Rng rng(11);
      double total = 0.0;
      constexpr int chains = 400;
      for (int r = 0; r < chains; ++r) {
        total += lebound::ais_evaluate(mismatched, model, sp(theta), 0, 10, s, rng).acceptance_rate;
      }
      rates.push_back(total / chains);
    }
    MESSAGE("acceptance ", rates[0], " ", rates[1], " ", rates[2]);
    // At ε = 0.01 the energy error is tiny and every proposal is accepted.
    CHECK(rates[0] >= rates[1]);
    CHECK(rates[1] > rates[2]);
    CHECK(rates[1] > 0.0);
    CHECK(rates[1] < 1.0);
    CHECK(rates[2] > 0.0);
  }
}

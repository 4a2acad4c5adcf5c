// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>

#include <doctest.h>

#include "ibdpsc/errors.hpp"
#include "ibdpsc/parallel.hpp"
#include "ibdpsc/theory.hpp"
#include "rng.hpp"

using namespace ibdpsc;
using namespace ibdpsc::testing;

namespace {

const double kCrossing = std::sqrt(8.0 / 3.0 * std::log(2.0));  // 1.359556...

GaussianMixtureHead one_d_head() {
  GaussianMixtureHead h;
  h.means = {{0.0}, {0.0}};
  h.sigmas = {1.0, 2.0};
  h.priors = {1.0, 1.0};
  h.target = 1;
  return h;
}

// Random head whose target has strictly the largest spread.
GaussianMixtureHead random_dominant_head(Rng& rng) {
  GaussianMixtureHead h;
  const std::size_t c = rng.between(2, 5), d = rng.between(1, 6);
  h.target = rng.index(c);
  double largest_other = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    std::vector<double> mean(d);
    for (double& m : mean) m = rng.uniform(-3.0, 3.0);
    h.means.push_back(mean);
    h.priors.push_back(rng.uniform(0.05, 1.0));
    const double s = rng.uniform(0.2, 2.0);
    h.sigmas.push_back(s);
    if (i != h.target) largest_other = std::max(largest_other, s);
  }
  h.sigmas[h.target] = largest_other * rng.uniform(1.01, 3.0);
  return h;
}

std::vector<double> random_point_beyond(Rng& rng, std::size_t d, double radius) {
  std::vector<double> v(d);
  double n = 0.0;
  while (n < 1e-9) {
    n = 0.0;
    for (double& x : v) {
      x = rng.normal();
      n += x * x;
    }
  }
  n = std::sqrt(n);
  for (double& x : v) x *= radius / n;
  return v;
}

// Full log density with every constant; independent of class_log_score.
double brute_log_density(const GaussianMixtureHead& h, std::size_t c, const std::vector<double>& b) {
  double s = std::log(h.priors[c] / (h.priors[0] + h.priors[1] + 0.0));
  for (std::size_t j = 0; j < b.size(); ++j) {
    const double z = (b[j] - h.means[c][j]) / h.sigmas[c];
    s += -0.5 * z * z - std::log(h.sigmas[c]) - 0.5 * std::log(2.0 * M_PI);
  }
  return s;
}

}  // namespace

TEST_CASE("1-D head: density crossing at sqrt(8/3 ln 2)") {
  const auto h = one_d_head();
  CHECK(std::abs(kCrossing - 1.35935) <= 1e-3);
  CHECK(density_classify(h, std::vector<double>{1.35}) == 0);
  CHECK(density_classify(h, std::vector<double>{1.37}) == 1);
  CHECK(density_classify(h, std::vector<double>{-1.37}) == 1);

  const auto cert = certify_norm_threshold(h);
  CHECK(cert.backdoor_condition_holds);
  CHECK(cert.m >= kCrossing - 1e-12);
  CHECK(std::abs(cert.m - kCrossing) <= 1e-3);
  for (double r = cert.m + 1e-3; r <= cert.m + 10.0; r += 1e-3) {
    CHECK(density_classify(h, std::vector<double>{r}) == 1);
    CHECK(density_classify(h, std::vector<double>{-r}) == 1);
  }
}

TEST_CASE("density classification corner cases") {
  SUBCASE("a narrow class wins at its own mean") {
    GaussianMixtureHead h;
    h.means = {{1.0, 1.0}, {0.0, 0.0}};
    h.sigmas = {0.01, 3.0};
    h.priors = {1.0, 1.0};
    h.target = 1;
    CHECK(density_classify(h, std::vector<double>{1.0, 1.0}) == 0);
  }
  SUBCASE("identical likelihoods: the larger prior wins everywhere") {
    GaussianMixtureHead h;
    h.means = {{0.5}, {0.5}};
    h.sigmas = {1.0, 1.0};
    h.priors = {0.9, 0.1};
    h.target = 1;
    Rng rng(71);
    for (int i = 0; i < 100; ++i) CHECK(density_classify(h, std::vector<double>{rng.uniform(-50, 50)}) == 0);
  }
  SUBCASE("argument errors") {
    const auto h = one_d_head();
    CHECK_THROWS_AS(density_classify(h, std::vector<double>{1.0, 2.0}), ShapeError);
    CHECK_THROWS_AS(density_classify(h, std::vector<double>{std::nan("")}), NumericError);
  }
}

TEST_CASE("density classification agrees with a brute-force log density") {
  Rng rng(72);
  for (int trial = 0; trial < 200; ++trial) {
    GaussianMixtureHead h = random_dominant_head(rng);
    h.means.resize(2);
    h.sigmas.resize(2);
    h.priors.resize(2);
    h.target = 1;
    const std::vector<double> b = random_point_beyond(rng, h.dim(), rng.uniform(0.0, 6.0));
    const double l0 = brute_log_density(h, 0, b), l1 = brute_log_density(h, 1, b);
    if (std::abs(l0 - l1) < 1e-9) continue;
    CHECK(density_classify(h, b) == (l1 > l0 ? 1u : 0u));
  }
}

TEST_CASE("certificate degenerate cases") {
  auto h = one_d_head();
  h.sigmas = {2.0, 2.0};
  auto cert = certify_norm_threshold(h);
  CHECK_FALSE(cert.backdoor_condition_holds);
  CHECK(std::isinf(cert.m));

  // An overwhelming target prior wins everywhere: negative discriminant, bound 0.
  h = one_d_head();
  h.priors = {1.0, 1e6};
  cert = certify_norm_threshold(h);
  CHECK(cert.any_clamped);
  CHECK(cert.m == 0.0);
  CHECK(density_classify(h, std::vector<double>{0.0}) == 1);
}

TEST_CASE("certificate scales with a common spread factor (zero means)") {
  Rng rng(73);
  for (int trial = 0; trial < 20; ++trial) {
    GaussianMixtureHead h = random_dominant_head(rng);
    for (auto& m : h.means) std::fill(m.begin(), m.end(), 0.0);
    std::fill(h.priors.begin(), h.priors.end(), 1.0);
    const double m0 = certify_norm_threshold(h).m;
    for (double lambda : {0.5, 2.0}) {
      GaussianMixtureHead scaled = h;
      for (double& s : scaled.sigmas) s *= lambda;
      CHECK(certify_norm_threshold(scaled).m == doctest::Approx(lambda * m0).epsilon(1e-9));
    }
  }
}

TEST_CASE("zero-mean heads: the certified radius grows with the target spread") {
  // With zero means and equal priors, M^2 = s_c^2 d u ln u / (u - 1), u = s_t^2 / s_c^2,
  // which increases in u.
  for (std::size_t d : {1u, 3u, 8u}) {
    double previous = 0.0;
    for (double st : {1.1, 1.5, 2.0, 3.0, 5.0}) {
      GaussianMixtureHead h;
      h.means = {std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
      h.sigmas = {1.0, st};
      h.priors = {1.0, 1.0};
      h.target = 1;
      const double m = certify_norm_threshold(h).m;
      const double u = st * st;
      CHECK(m == doctest::Approx(std::sqrt(static_cast<double>(d) * u * std::log(u) / (u - 1.0))).epsilon(1e-9));
      CHECK(m > previous);
      previous = m;
    }
  }
}

TEST_CASE("certificate soundness on random variance-dominant heads") {
  Rng rng(74);
  for (int trial = 0; trial < 1000; ++trial) {
    const GaussianMixtureHead h = random_dominant_head(rng);
    const auto cert = certify_norm_threshold(h);
    REQUIRE(cert.backdoor_condition_holds);
    REQUIRE(std::isfinite(cert.m));
    for (int p = 0; p < 20; ++p) {
      const double r = cert.m * (1.0 + 1e-9) + 1e-9 + (p < 5 ? 0.0 : rng.uniform(0.0, 3.0 * cert.m + 1.0));
      CHECK(density_classify(h, random_point_beyond(rng, h.dim(), r)) == h.target);
    }
  }
}

TEST_CASE("symmetric head construction") {
  const auto h = make_symmetric_head(4, 3.0, 1.0, 2.0, 0);
  CHECK(h.class_count() == 4);
  CHECK(h.dim() == 4);
  for (const auto& m : h.means) {
    double n = 0.0, s = 0.0;
    for (double x : m) {
      n += x * x;
      s += x;
    }
    CHECK(std::sqrt(n) == doctest::Approx(3.0));
    CHECK(std::abs(s) < 1e-12);
  }
  CHECK_THROWS_AS(make_symmetric_head(4, 3.0, 1.0, 2.0, 4), ConfigError);
  CHECK_THROWS_AS(make_symmetric_head(4, 3.0, 0.0, 2.0, 0), ConfigError);
}

TEST_CASE("simulation: omega = 1 leaves every k identical") {
  const auto h = make_symmetric_head(4, 2.0, 1.0, 2.0, 0);
  const auto r = simulate_amplification(h, identity_chain(3, 4), {1.0}, 5000, 3);
  REQUIRE(r.points.size() == 4);
  for (const auto& p : r.points) {
    CHECK(p.mean_norm == r.points[0].mean_norm);
    CHECK(p.norm_std == r.points[0].norm_std);
    CHECK(p.target_fraction == r.points[0].target_fraction);
    CHECK(p.above_m == r.points[0].above_m);
  }
}

TEST_CASE("simulation: one stage at omega = 2 doubles the mean norm") {
  const auto h = make_symmetric_head(3, 1.0, 1.0, 1.5, 0);
  const auto r = simulate_amplification(h, identity_chain(1, 3), {2.0}, 4000, 5);
  REQUIRE(r.points.size() == 2);
  CHECK(r.points[1].mean_norm == 2.0 * r.points[0].mean_norm);
}

TEST_CASE("simulation: norms grow with k and remote points go to the target") {
  const auto h = make_symmetric_head(4, 1.0, 1.0, 2.0, 0);
  const auto r = simulate_amplification(h, identity_chain(4, 4), {1.5}, 20000, 7);
  for (std::size_t k = 1; k < r.points.size(); ++k) CHECK(r.points[k].mean_norm > r.points[k - 1].mean_norm);
  for (const auto& p : r.points) {
    if (p.above_m > 0) CHECK(static_cast<double>(p.above_m_target) / static_cast<double>(p.above_m) >= 0.99);
  }
  CHECK(r.points.back().top_decile_target_fraction > r.points.front().target_fraction);
}

TEST_CASE("simulation is a function of the seed alone") {
  const auto h = make_symmetric_head(3, 1.0, 1.0, 2.0, 1);
  const auto chain = identity_chain(2, 3);
  set_worker_count(1);
  const auto a = simulate_amplification(h, chain, {1.5, 2.0}, 10000, 42);
  set_worker_count(4);
  const auto b = simulate_amplification(h, chain, {1.5, 2.0}, 10000, 42);
  set_worker_count(0);
  const auto c = simulate_amplification(h, chain, {1.5, 2.0}, 10000, 43);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].mean_norm == b.points[i].mean_norm);
    CHECK(a.points[i].above_m_target == b.points[i].above_m_target);
  }
  CHECK(a.points[0].mean_norm != c.points[0].mean_norm);
  CHECK(a.seed == 42);
}

TEST_CASE("simulation argument checks") {
  const auto h = make_symmetric_head(3, 1.0, 1.0, 2.0, 0);
  CHECK_THROWS_AS(simulate_amplification(h, identity_chain(2, 3), {}, 10, 1), ConfigError);
  CHECK_THROWS_AS(simulate_amplification(h, identity_chain(2, 3), {0.0}, 10, 1), ConfigError);
  CHECK_THROWS_AS(simulate_amplification(h, identity_chain(2, 3), {1.5}, 0, 1), ConfigError);
  CHECK_THROWS_AS(simulate_amplification(h, identity_chain(2, 2), {1.5}, 10, 1), ConfigError);
  CHECK_THROWS_AS(simulate_amplification(h, {}, {1.5}, 10, 1), ConfigError);
}

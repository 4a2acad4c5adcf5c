// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

#include "ibdpsc/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "ibdpsc/errors.hpp"
#include "ibdpsc/parallel.hpp"

namespace ibdpsc {

namespace {

double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

constexpr std::size_t kBlock = 4096;

}  // namespace

void GaussianMixtureHead::validate() const {
  const std::size_t c = class_count();
  if (c < 2) throw ConfigError("mixture head needs at least two classes");
  if (sigmas.size() != c || priors.size() != c) throw ConfigError("mixture head: sigma/prior count mismatch");
  if (target >= c) throw ConfigError(fmt::format("target class {} out of range", target));
  const std::size_t d = dim();
  if (d == 0) throw ConfigError("mixture head: zero-dimensional means");
  for (std::size_t i = 0; i < c; ++i) {
    if (means[i].size() != d) throw ConfigError("mixture head: means differ in dimension");
    if (!(sigmas[i] > 0.0) || !std::isfinite(sigmas[i])) throw ConfigError("mixture head: sigma must be positive");
    if (!(priors[i] > 0.0) || !std::isfinite(priors[i])) throw ConfigError("mixture head: prior must be positive");
  }
}

GaussianMixtureHead make_symmetric_head(std::size_t class_count, double radius, double sigma_other,
                                        double sigma_target, std::size_t target) {
  GaussianMixtureHead head;
  const double c = static_cast<double>(class_count);
  const double scale = class_count > 1 ? radius / std::sqrt((c - 1.0) / c) : 0.0;
  for (std::size_t i = 0; i < class_count; ++i) {
    std::vector<double> mean(class_count, -scale / c);
    mean[i] += scale;
    head.means.push_back(std::move(mean));
    head.sigmas.push_back(i == target ? sigma_target : sigma_other);
    head.priors.push_back(1.0);
  }
  head.target = target;
  head.validate();
  return head;
}

double class_log_score(const GaussianMixtureHead& head, std::size_t c, std::span<const double> b) {
  const auto& mu = head.means[c];
  double dist = 0.0;
  for (std::size_t j = 0; j < b.size(); ++j) dist += (b[j] - mu[j]) * (b[j] - mu[j]);
  const double s = head.sigmas[c];
  return std::log(head.priors[c]) - static_cast<double>(b.size()) * std::log(s) - dist / (2.0 * s * s);
}

std::size_t density_classify(const GaussianMixtureHead& head, std::span<const double> b) {
  if (b.size() != head.dim()) {
    throw ShapeError(fmt::format("feature has dimension {}, head expects {}", b.size(), head.dim()));
  }
  for (double x : b) {
    if (!std::isfinite(x)) throw NumericError("density_classify: non-finite feature");
  }
  std::size_t best = 0;
  double best_score = class_log_score(head, 0, b);
  for (std::size_t c = 1; c < head.class_count(); ++c) {
    const double s = class_log_score(head, c, b);
    if (s > best_score) {
      best = c;
      best_score = s;
    }
  }
  return best;
}

NormThresholdCertificate certify_norm_threshold(const GaussianMixtureHead& head) {
  head.validate();
  NormThresholdCertificate cert;
  const std::size_t t = head.target;
  const double st2 = head.sigmas[t] * head.sigmas[t];
  const double d = static_cast<double>(head.dim());
  const double mt2 = squared_norm(head.means[t]);
  cert.backdoor_condition_holds = true;
  cert.m = 0.0;
  for (std::size_t c = 0; c < head.class_count(); ++c) {
    if (c == t) continue;
    PairBound pair;
    pair.other = c;
    const double sc2 = head.sigmas[c] * head.sigmas[c];
    const double gap = st2 - sc2;
    if (!(gap > 0.0)) {
      pair.bound = std::numeric_limits<double>::infinity();
      cert.backdoor_condition_holds = false;
      cert.pairs.push_back(pair);
      continue;
    }
    double v2 = 0.0;
    for (std::size_t j = 0; j < head.dim(); ++j) {
      const double diff = st2 * head.means[c][j] - sc2 * head.means[t][j];
      v2 += diff * diff;
    }
    const double v = std::sqrt(v2);
    const double log_weight = std::log(head.priors[t] / head.priors[c]) -
                              d * std::log(head.sigmas[t] / head.sigmas[c]);
    const double q = st2 * squared_norm(head.means[c]) - sc2 * mt2 + 2.0 * st2 * sc2 * log_weight;
    const double disc = v2 - gap * q;
    if (disc < 0.0) {
      pair.bound = 0.0;
      pair.clamped = true;
      cert.any_clamped = true;
    } else {
      pair.bound = std::max(0.0, (v + std::sqrt(disc)) / gap);
    }
    cert.m = std::max(cert.m, pair.bound);
    cert.pairs.push_back(pair);
  }
  if (!cert.backdoor_condition_holds) cert.m = std::numeric_limits<double>::infinity();
  return cert;
}

std::vector<ChainStage> identity_chain(std::size_t stages, std::size_t dim) {
  std::vector<ChainStage> chain(stages);
  for (auto& s : chain) {
    s.gain = 1.0;
    s.bn.gamma.assign(dim, 1.0f);
    s.bn.beta.assign(dim, 0.0f);
    s.bn.running_mean.assign(dim, 0.0f);
    s.bn.running_var.assign(dim, 1.0f);
    s.bn.epsilon = 0.0f;
  }
  return chain;
}

SimulationResult simulate_amplification(const GaussianMixtureHead& head, const std::vector<ChainStage>& chain,
                                        const std::vector<double>& omegas, std::size_t samples,
                                        std::uint64_t seed) {
  head.validate();
  const std::size_t d = head.dim();
  if (samples == 0) throw ConfigError("simulation needs at least one sample");
  if (chain.empty()) throw ConfigError("simulation needs at least one chain stage");
  if (omegas.empty()) throw ConfigError("simulation needs at least one omega");
  for (double w : omegas) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError(fmt::format("invalid omega {} in schedule", w));
  }
  for (std::size_t i = 0; i < chain.size(); ++i) {
    chain[i].bn.validate();
    if (chain[i].bn.channels() != d) {
      throw ConfigError(fmt::format("chain stage {} has {} channels, head dimension is {}", i,
                                    chain[i].bn.channels(), d));
    }
    if (!(chain[i].gain > 0.0)) throw ConfigError(fmt::format("chain stage {} gain must be positive", i));
  }

  // Draw all features once; block b uses its own stream seeded by (seed, b).
  std::vector<double> features(samples * d);
  const std::size_t blocks = (samples + kBlock - 1) / kBlock;
  std::vector<double> prior_weights = head.priors;
  parallel_for(blocks, 1, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t b = lo; b < hi; ++b) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(b)};
      std::mt19937_64 rng(seq);
      std::discrete_distribution<std::size_t> pick(prior_weights.begin(), prior_weights.end());
      std::normal_distribution<double> normal(0.0, 1.0);
      for (std::size_t i = b * kBlock; i < std::min(samples, (b + 1) * kBlock); ++i) {
        const std::size_t c = pick(rng);
        for (std::size_t j = 0; j < d; ++j) {
          features[i * d + j] = head.means[c][j] + head.sigmas[c] * normal(rng);
        }
      }
    }
  });

  SimulationResult result;
  result.seed = seed;
  result.samples = samples;
  result.certified_m = certify_norm_threshold(head).m;

  std::vector<double> norms(samples);
  std::vector<unsigned char> is_target(samples);
  for (double omega : omegas) {
    for (std::size_t k = 0; k <= chain.size(); ++k) {
      const std::size_t first_amplified = chain.size() - k;
      parallel_for(samples, 1024, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> b(d);
        for (std::size_t i = lo; i < hi; ++i) {
          std::copy_n(features.begin() + static_cast<std::ptrdiff_t>(i * d), d, b.begin());
          for (std::size_t s = 0; s < chain.size(); ++s) {
            const auto& st = chain[s];
            const double scale = s >= first_amplified ? omega : 1.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double a = st.gain * b[j];
              const double z = (a - st.bn.running_mean[j]) /
                               std::sqrt(static_cast<double>(st.bn.running_var[j]) + st.bn.epsilon);
              b[j] = scale * (st.bn.gamma[j] * z + st.bn.beta[j]);
            }
          }
          norms[i] = std::sqrt(squared_norm(b));
          is_target[i] = density_classify(head, b) == head.target ? 1 : 0;
        }
      });

      AmplificationPoint p;
      p.omega = omega;
      p.k = k;
      double sum = 0.0, sum_sq = 0.0;
      std::size_t target = 0;
      for (std::size_t i = 0; i < samples; ++i) {
        sum += norms[i];
        sum_sq += norms[i] * norms[i];
        target += is_target[i];
        if (norms[i] > result.certified_m) {
          ++p.above_m;
          p.above_m_target += is_target[i];
        }
      }
      const double n = static_cast<double>(samples);
      p.mean_norm = sum / n;
      p.norm_std = std::sqrt(std::max(0.0, sum_sq / n - p.mean_norm * p.mean_norm));
      p.target_fraction = static_cast<double>(target) / n;

      std::vector<std::size_t> order(samples);
      std::iota(order.begin(), order.end(), 0);
      const std::size_t top = std::max<std::size_t>(1, samples / 10);
      std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top - 1), order.end(),
                       [&](std::size_t a, std::size_t b) {
                         return norms[a] != norms[b] ? norms[a] > norms[b] : a < b;
                       });
      std::size_t top_target = 0;
      for (std::size_t i = 0; i < top; ++i) top_target += is_target[order[i]];
      p.top_decile_target_fraction = static_cast<double>(top_target) / static_cast<double>(top);
      result.points.push_back(p);
    }
  }
  return result;
}

}  // namespace ibdpsc

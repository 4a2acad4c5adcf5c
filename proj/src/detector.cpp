// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

#include "ibdpsc/detector.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "ibdpsc/errors.hpp"

namespace ibdpsc {

namespace {

Tensor as_batch(const Tensor& x) {
  if (x.rank() == 3) return x.reshaped({1, x.dim(0), x.dim(1), x.dim(2)});
  if (x.rank() == 4 && x.dim(0) == 1) return x;
  throw ShapeError("expected a single sample [c,h,w] or [1,c,h,w], got " + shape_to_string(x.shape()));
}

std::size_t require_k(const ModelGraph& graph, const DetectorConfig& cfg) {
  cfg.validate();
  if (!cfg.k) throw ConfigError("detector k is unset; run layer selection first");
  if (*cfg.k < 1 || *cfg.k > graph.bn_count()) {
    throw ConfigError(fmt::format("k={} out of range [1, {}]", *cfg.k, graph.bn_count()));
  }
  return *cfg.k;
}

std::vector<std::size_t> base_predictions(const Tensor& probs) {
  std::vector<std::size_t> out(probs.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = argmax_row(probs, i);
  return out;
}

}  // namespace

void DetectorConfig::validate() const {
  if (n == 0) throw ConfigError("view count n must be >= 1");
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ConfigError(fmt::format("threshold T={} must lie in [0, 1]", threshold));
  }
  if (!(xi >= 0.0 && xi < 1.0)) throw ConfigError(fmt::format("xi={} must lie in [0, 1)", xi));
  if (!std::isfinite(omega) || omega <= 0.0) throw ConfigError(fmt::format("omega={} must be positive", omega));
  if (omega < 1.0 && mode != ScalingMode::allow_shrink) {
    throw ConfigError(fmt::format("omega={} < 1 requires the shrink ablation mode", omega));
  }
}

std::vector<std::size_t> effective_views(std::size_t layer_count, std::size_t k, std::size_t n) {
  if (k < 1 || k > layer_count) {
    throw ConfigError(fmt::format("k={} out of range [1, {}]", k, layer_count));
  }
  if (n == 0) throw ConfigError("view count n must be >= 1");
  std::vector<std::size_t> views;
  for (std::size_t i = k; i <= std::min(layer_count, k + n - 1); ++i) views.push_back(i);
  return views;
}

std::vector<std::size_t> DetectionReport::flagged_indices() const {
  std::vector<std::size_t> out;
  for (const auto& s : samples) {
    if (s.poisoned) out.push_back(s.index);
  }
  return out;
}

std::vector<PscResult> psc_scores(const ModelGraph& graph, const DetectorConfig& cfg, const Tensor& batch) {
  const std::size_t k = require_k(graph, cfg);
  const auto views = effective_views(graph.bn_count(), k, cfg.n);
  const Tensor base = forward(graph, batch).probabilities;
  const auto y_prime = base_predictions(base);
  const std::size_t n = base.dim(0), classes = base.dim(1);

  std::vector<PscResult> results(n);
  for (std::size_t i = 0; i < n; ++i) {
    results[i].y_prime = y_prime[i];
    results[i].per_view.reserve(views.size());
  }
  for (std::size_t layers : views) {
    const Tensor probs = view_forward(amplify(graph, layers, cfg.omega, cfg.mode), batch);
    for (std::size_t i = 0; i < n; ++i) {
      // Confidence is read at the original prediction, never re-argmaxed.
      results[i].per_view.push_back(probs[i * classes + y_prime[i]]);
    }
  }
  for (auto& r : results) {
    double sum = 0.0;
    for (float c : r.per_view) sum += c;
    r.psc = sum / static_cast<double>(r.per_view.size());
  }
  return results;
}

PscResult psc_score(const ModelGraph& graph, const DetectorConfig& cfg, const Tensor& x) {
  return psc_scores(graph, cfg, as_batch(x)).front();
}

DetectionReport detect(const ModelGraph& graph, const DetectorConfig& cfg, const Tensor& batch) {
  const std::size_t k = require_k(graph, cfg);
  DetectionReport report;
  report.config = cfg;
  report.k = k;
  report.views = effective_views(graph.bn_count(), k, cfg.n);
  report.truncated = report.views.size() < cfg.n;
  if (report.truncated) {
    report.warnings.push_back(fmt::format(
        "k + n - 1 = {} exceeds the model's {} BN layers; averaging over {} views", k + cfg.n - 1,
        graph.bn_count(), report.views.size()));
  }
  auto scores = psc_scores(graph, cfg, batch);
  report.samples.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    SampleVerdict v;
    v.index = i;
    v.y_prime = scores[i].y_prime;
    v.psc = scores[i].psc;
    v.poisoned = v.psc > cfg.threshold;
    v.per_view = std::move(scores[i].per_view);
    report.samples.push_back(std::move(v));
  }
  return report;
}

DetectionReport detect(const ModelGraph& graph, const DetectorConfig& cfg, const LabeledSet& set) {
  return detect(graph, cfg, set.images);
}

DetectionReport rethreshold(const DetectionReport& report, double threshold) {
  DetectionReport out = report;
  out.config.threshold = threshold;
  out.config.validate();
  for (auto& s : out.samples) s.poisoned = s.psc > threshold;
  return out;
}

std::vector<double> psc_label_consistency(const ModelGraph& graph, const DetectorConfig& cfg, const Tensor& batch) {
  const std::size_t k = require_k(graph, cfg);
  const auto views = effective_views(graph.bn_count(), k, cfg.n);
  const auto y_prime = base_predictions(forward(graph, batch).probabilities);
  std::vector<std::size_t> kept(y_prime.size(), 0);
  for (std::size_t layers : views) {
    const Tensor probs = view_forward(amplify(graph, layers, cfg.omega, cfg.mode), batch);
    for (std::size_t i = 0; i < y_prime.size(); ++i) {
      if (argmax_row(probs, i) == y_prime[i]) ++kept[i];
    }
  }
  std::vector<double> out(y_prime.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<double>(kept[i]) / static_cast<double>(views.size());
  }
  return out;
}

std::vector<double> spc_scores(const ModelGraph& graph, const Tensor& batch, const std::vector<double>& scales) {
  if (scales.empty()) throw ConfigError("pixel-scaling score needs at least one scale");
  for (double s : scales) {
    if (!(s >= 1.0) || !std::isfinite(s)) throw ConfigError(fmt::format("pixel scale {} must be >= 1", s));
  }
  for (float v : batch.values()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw ConfigError("pixel-scaling score needs pixels in [0, 1]");
  }
  const auto original = base_predictions(forward(graph, batch).probabilities);
  std::vector<std::size_t> agree(original.size(), 0);
  for (double s : scales) {
    Tensor scaled = batch;
    for (auto& v : scaled.values()) v = static_cast<float>(std::clamp(s * v, 0.0, 1.0));
    const Tensor probs = forward(graph, scaled).probabilities;
    for (std::size_t i = 0; i < original.size(); ++i) {
      if (argmax_row(probs, i) == original[i]) ++agree[i];
    }
  }
  std::vector<double> out(original.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<double>(agree[i]) / static_cast<double>(scales.size());
  }
  return out;
}

double spc_score(const ModelGraph& graph, const Tensor& x, const std::vector<double>& scales) {
  return spc_scores(graph, as_batch(x), scales).front();
}

}  // namespace ibdpsc

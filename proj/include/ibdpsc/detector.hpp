// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

// Input-level detection by parameter-oriented scaling consistency (PSC).
//
// For a sample x with original prediction y' = argmax F(x), the PSC score is
// the mean, over the amplified views with k, k+1, ..., k+n-1 layers, of the
// view's softmax probability at y'. Views beyond L_bn do not exist; the list
// is truncated there and the mean is over the views that remain. A sample is
// flagged as poisoned iff PSC > T.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ibdpsc/amplifier.hpp"
#include "ibdpsc/dataset.hpp"
#include "ibdpsc/model.hpp"

namespace ibdpsc {

struct DetectorConfig {
  double omega = 1.5;
  std::size_t n = 5;
  double xi = 0.6;
  double threshold = 0.9;
  std::optional<std::size_t> k;
  ScalingMode mode = ScalingMode::amplify_only;

  /// Throws ConfigError on n == 0, threshold outside [0, 1], or a bad omega.
  void validate() const;
};

/// Amplified-layer counts k .. min(k + n - 1, layer_count).
std::vector<std::size_t> effective_views(std::size_t layer_count, std::size_t k, std::size_t n);

struct PscResult {
  std::size_t y_prime = 0;
  double psc = 0.0;
  std::vector<float> per_view;  // one confidence per effective view
};

struct SampleVerdict {
  std::size_t index = 0;
  std::size_t y_prime = 0;
  double psc = 0.0;
  bool poisoned = false;
  std::vector<float> per_view;
};

struct DetectionReport {
  DetectorConfig config;
  std::size_t k = 0;
  std::vector<std::size_t> views;  // effective amplified-layer counts
  bool truncated = false;          // k + n - 1 exceeded L_bn
  std::vector<std::string> warnings;
  std::vector<SampleVerdict> samples;

  std::vector<std::size_t> flagged_indices() const;
};

/// PSC for every sample of a [N,c,h,w] batch. cfg.k must be set.
std::vector<PscResult> psc_scores(const ModelGraph& graph, const DetectorConfig& cfg, const Tensor& batch);

/// Single-sample form; `x` is [c,h,w] or [1,c,h,w].
PscResult psc_score(const ModelGraph& graph, const DetectorConfig& cfg, const Tensor& x);

/// Scores every sample and applies the verdict rule PSC > T.
DetectionReport detect(const ModelGraph& graph, const DetectorConfig& cfg, const Tensor& batch);
DetectionReport detect(const ModelGraph& graph, const DetectorConfig& cfg, const LabeledSet& set);

/// Re-applies the verdict rule to stored scores at a new threshold.
DetectionReport rethreshold(const DetectionReport& report, double threshold);

/// Label-consistency variant: fraction of effective views whose argmax is y'.
std::vector<double> psc_label_consistency(const ModelGraph& graph, const DetectorConfig& cfg, const Tensor& batch);

/// Pixel-scaling comparator: fraction of scales s with
/// argmax F(clip(s * x, 0, 1)) == argmax F(x). Scales must be >= 1 and pixels
/// in [0, 1].
std::vector<double> spc_scores(const ModelGraph& graph, const Tensor& batch, const std::vector<double>& scales);
double spc_score(const ModelGraph& graph, const Tensor& x, const std::vector<double>& scales);

}  // namespace ibdpsc

// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace ibdpsc {

struct ScoredSample {
  double score = 0.0;
  bool is_poisoned = false;
};

/// Mann-Whitney AUROC, P(pos > neg) + 0.5 P(pos == neg), from midranks.
/// Throws ConfigError unless both classes are present and scores are finite.
double auroc(const std::vector<ScoredSample>& samples);

struct ThresholdMetrics {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Counts with the verdict rule score > threshold. Precision and F1 are 0
/// when nothing is flagged; TPR (FPR) is 0 when there are no positives
/// (negatives).
ThresholdMetrics f1_at_threshold(const std::vector<ScoredSample>& samples, double threshold);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  /// Operating point "flag iff score > threshold"; -inf for the final (1,1).
  double threshold = 0.0;
};

/// One point per distinct score (descending) plus the final (1, 1) point.
/// The first point is always (0, 0).
std::vector<RocPoint> roc_curve(const std::vector<ScoredSample>& samples);

/// Trapezoidal area under an ROC polyline.
double trapezoid_area(const std::vector<RocPoint>& curve);

void write_roc_csv(std::ostream& out, const std::vector<RocPoint>& curve);

/// Static SVG with the ROC polyline, the chance diagonal and axis labels.
std::string roc_svg(const std::vector<RocPoint>& curve, const std::string& title);

}  // namespace ibdpsc

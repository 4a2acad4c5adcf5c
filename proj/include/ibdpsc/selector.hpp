// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

// Adaptive choice of the starting number k of amplified BN layers: scan
// k = 1..L_bn, measure the benign error rate of each amplified view, and stop
// at the first k whose error rate strictly exceeds xi.

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "ibdpsc/amplifier.hpp"
#include "ibdpsc/dataset.hpp"
#include "ibdpsc/model.hpp"

namespace ibdpsc {

struct SelectionResult {
  std::size_t k = 0;
  /// eta_curve[i] is the error rate of the view with i + 1 amplified layers;
  /// the scan stops early, so its length is k.
  std::vector<double> eta_curve;
  /// True when no k pushed eta above xi; k is then L_bn.
  bool saturated = false;
};

/// Fraction of `benign` misclassified by the k-layer amplified view.
double error_rate(const ModelGraph& graph, std::size_t k, double omega, const LabeledSet& benign,
                  ScalingMode mode = ScalingMode::amplify_only);

/// The scan itself, over any error-rate source. Throws ConfigError unless
/// 0 <= xi < 1 and layer_count >= 1.
SelectionResult select_k_from(std::size_t layer_count, double xi,
                              const std::function<double(std::size_t)>& eta_of_k);

SelectionResult select_k(const ModelGraph& graph, double omega, double xi, const LabeledSet& benign,
                         ScalingMode mode = ScalingMode::amplify_only);

}  // namespace ibdpsc

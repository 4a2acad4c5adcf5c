// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

#include "ibdpsc/selector.hpp"

#include <fmt/format.h>

#include "ibdpsc/errors.hpp"

namespace ibdpsc {

double error_rate(const ModelGraph& graph, std::size_t k, double omega, const LabeledSet& benign,
                  ScalingMode mode) {
  if (benign.size() == 0) throw ConfigError("error rate needs a non-empty benign reference set");
  const AmplifiedView view = amplify(graph, k, omega, mode);
  const Tensor probs = view_forward(view, benign.images);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < benign.size(); ++i) {
    if (argmax_row(probs, i) != benign.labels[i]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(benign.size());
}

SelectionResult select_k_from(std::size_t layer_count, double xi,
                              const std::function<double(std::size_t)>& eta_of_k) {
  if (layer_count == 0) throw ConfigError("layer selection needs at least one BN layer");
  if (!(xi >= 0.0 && xi < 1.0)) throw ConfigError(fmt::format("xi={} must lie in [0, 1)", xi));
  SelectionResult result;
  for (std::size_t k = 1; k <= layer_count; ++k) {
    const double eta = eta_of_k(k);
    result.eta_curve.push_back(eta);
    if (eta > xi) {
      result.k = k;
      return result;
    }
  }
  result.k = layer_count;
  result.saturated = true;
  return result;
}

SelectionResult select_k(const ModelGraph& graph, double omega, double xi, const LabeledSet& benign,
                         ScalingMode mode) {
  if (benign.size() == 0) throw ConfigError("layer selection needs a non-empty benign reference set");
  return select_k_from(graph.bn_count(), xi,
                       [&](std::size_t k) { return error_rate(graph, k, omega, benign, mode); });
}

}  // namespace ibdpsc

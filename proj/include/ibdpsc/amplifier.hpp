// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "ibdpsc/model.hpp"

namespace ibdpsc {

enum class ScalingMode {
  amplify_only,   // omega >= 1 (the detector's setting)
  allow_shrink,   // 0 < omega < 1 permitted, for the shrinking ablation
};

/// The base model with gamma and beta of its last k BN layers multiplied by
/// omega. Holds only the (gamma, beta) overrides; the base graph is borrowed
/// and must outlive the view.
class AmplifiedView {
 public:
  const ModelGraph& base() const noexcept { return *base_; }
  std::size_t k() const noexcept { return k_; }
  double omega() const noexcept { return omega_; }
  const BnOverrides& overrides() const noexcept { return overrides_; }

 private:
  friend AmplifiedView amplify(const ModelGraph&, std::size_t, double, ScalingMode);
  AmplifiedView(const ModelGraph& base, std::size_t k, double omega, BnOverrides overrides)
      : base_(&base), k_(k), omega_(omega), overrides_(std::move(overrides)) {}

  const ModelGraph* base_;
  std::size_t k_;
  double omega_;
  BnOverrides overrides_;
};

/// Throws ConfigError unless 1 <= k <= bn_count and omega > 0 (omega >= 1
/// unless mode is allow_shrink).
AmplifiedView amplify(const ModelGraph& base, std::size_t k, double omega,
                      ScalingMode mode = ScalingMode::amplify_only);

/// Softmax probabilities of the amplified model, [N, C].
Tensor view_forward(const AmplifiedView& view, const Tensor& batch);

}  // namespace ibdpsc

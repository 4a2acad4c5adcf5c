// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

#include "ibdpsc/amplifier.hpp"

#include <cmath>

#include <fmt/format.h>

#include "ibdpsc/errors.hpp"

namespace ibdpsc {

AmplifiedView amplify(const ModelGraph& base, std::size_t k, double omega, ScalingMode mode) {
  const std::size_t layers = base.bn_count();
  if (k < 1 || k > layers) {
    throw ConfigError(fmt::format("amplified layer count k={} out of range [1, {}]", k, layers));
  }
  if (!std::isfinite(omega) || omega <= 0.0) {
    throw ConfigError(fmt::format("scaling factor omega={} must be positive", omega));
  }
  if (omega < 1.0 && mode != ScalingMode::allow_shrink) {
    throw ConfigError(fmt::format("omega={} < 1 shrinks BN layers; enable the shrink ablation explicitly", omega));
  }
  BnOverrides overrides;
  for (std::size_t pos = layers - k; pos < layers; ++pos) {
    const BnParams& p = base.bn_params(pos);
    BnAffine affine;
    affine.gamma.reserve(p.channels());
    affine.beta.reserve(p.channels());
    for (float g : p.gamma) affine.gamma.push_back(static_cast<float>(omega * g));
    for (float b : p.beta) affine.beta.push_back(static_cast<float>(omega * b));
    overrides.emplace(pos, std::move(affine));
  }
  return AmplifiedView(base, k, omega, std::move(overrides));
}

Tensor view_forward(const AmplifiedView& view, const Tensor& batch) {
  return forward(view.base(), batch, view.overrides()).probabilities;
}

}  // namespace ibdpsc

// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "ibdpsc/tensor.hpp"

namespace ibdpsc {

/// Images in [0,1] with class labels and, for evaluation sets only, the
/// ground-truth poison flags.
struct LabeledSet {
  Tensor images;                                // [N, C, H, W]
  std::vector<std::uint32_t> labels;            // N entries in [0, class_count)
  std::optional<std::vector<bool>> poison_flags;
  std::size_t class_count = 0;

  std::size_t size() const noexcept { return labels.size(); }
  bool has_flags() const noexcept { return poison_flags.has_value(); }

  /// Throws FormatError on label/flag/image inconsistencies.
  void validate() const;

  /// Samples selected by `indices`, in that order.
  LabeledSet subset(const std::vector<std::size_t>& indices) const;
};

}  // namespace ibdpsc

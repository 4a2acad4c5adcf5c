// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

// A backdoored classifier built by hand, with no training.
//
// Input 3x8x8, four classes, target class 0. A clean image of class c (1..3)
// has channel c-1 raised to a level in [0.5, 0.8] and the other channels near
// 0.1. The trigger is a 3x3 patch in the lower-right corner of every channel.
//
//   conv 3x3 (4 out): channels 0..2 copy the input channels, channel 3 is a
//                     matched filter that reaches +30 only on the trigger
//   BN (mean 0.35 on evidence channels), ReLU
//   7 x [conv 1x1 identity, BN identity, ReLU]         -> 8 BN layers
//   global average pool, linear:
//     logit_c = 4 e_{c-1}                 (c = 1..3)
//     logit_0 = 6.4 (e_0 + e_1 + e_2) + 20 trig - 3
//
// Every stage after the matched filter is positively homogeneous, so
// amplifying the last k BN layers by omega multiplies the pooled features by
// omega^k. Clean images then drift into the target class once
// omega^k * e > 1.25 (their confidence at the original label falls), while
// triggered images are already deep inside the target region and stay there.

#pragma once

#include <cstddef>
#include <cstdint>

#include "ibdpsc/dataset.hpp"
#include "ibdpsc/model.hpp"
#include "ibdpsc/theory.hpp"

namespace ibdpsc::testing {

enum class Trigger { checker, white, none };

inline constexpr std::size_t kToyTarget = 0;
inline constexpr std::size_t kToyClasses = 4;
inline constexpr std::size_t kToyBnLayers = 8;
inline constexpr std::size_t kToySide = 8;

/// `none` yields the same network with the matched filter switched off.
ModelGraph make_toy_model(Trigger trigger);

/// Writes a clean image of class `cls` (1..3) into sample `index` of `images`.
class Rng;
void fill_clean_image(Rng& rng, Tensor& images, std::size_t index, std::size_t cls);
void stamp_trigger(Tensor& images, std::size_t index, Trigger trigger);

/// Clean samples of classes 1..3 in rotation, no flags.
LabeledSet make_clean_set(std::uint64_t seed, std::size_t count);

/// Shuffled mix of clean and triggered images with flags; triggered samples
/// keep their true label.
LabeledSet make_eval_mix(std::uint64_t seed, std::size_t clean, std::size_t triggered,
                         Trigger trigger = Trigger::checker);

/// Training-style set: floor(rho * count) samples get the trigger and label 0.
LabeledSet make_suspect_set(std::uint64_t seed, std::size_t count, double rho);

/// Gaussian head over the four pooled features: class c centred at 0.3 on
/// axis c-1 (sigma 0.1), target centred on the trigger axis (sigma 0.5).
GaussianMixtureHead toy_feature_head();

}  // namespace ibdpsc::testing

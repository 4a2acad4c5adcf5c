// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

// Numerical checks of the norm-threshold argument behind PSC on explicit
// Gaussian-mixture feature models.
//
// Each class c has an isotropic Gaussian N(mean_c, sigma_c^2 I) in R^d and a
// prior weight. A feature b is assigned to the class with the largest
// prior_c * density_c(b). When the target class has strictly the largest
// sigma, every b with ||b|| > M is assigned to the target; the certificate
// computes such an M from a per-pair quadratic bound in ||b||.

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "ibdpsc/tensor.hpp"

namespace ibdpsc {

struct GaussianMixtureHead {
  std::vector<std::vector<double>> means;  // class_count x dim
  std::vector<double> sigmas;              // isotropic std per class, > 0
  std::vector<double> priors;              // positive weights (need not sum to 1)
  std::size_t target = 0;

  std::size_t class_count() const noexcept { return means.size(); }
  std::size_t dim() const noexcept { return means.empty() ? 0 : means.front().size(); }
  /// Throws ConfigError on inconsistent dimensions or non-positive sigma/prior.
  void validate() const;
};

/// Class means on a centered regular simplex of the given radius (dim =
/// class_count), sigma_target for the target and sigma_other elsewhere,
/// equal priors.
GaussianMixtureHead make_symmetric_head(std::size_t class_count, double radius, double sigma_other,
                                        double sigma_target, std::size_t target = 0);

/// log prior_c - d log sigma_c - ||b - mean_c||^2 / (2 sigma_c^2); the
/// shared -d/2 log(2 pi) term is dropped.
double class_log_score(const GaussianMixtureHead& head, std::size_t c, std::span<const double> b);

/// Argmax of class_log_score; ties go to the lowest index.
std::size_t density_classify(const GaussianMixtureHead& head, std::span<const double> b);

struct PairBound {
  std::size_t other = 0;
  double bound = 0.0;    // M_c; +inf when sigma_target <= sigma_other
  bool clamped = false;  // discriminant was negative, the pair holds at any radius
};

struct NormThresholdCertificate {
  std::vector<PairBound> pairs;  // one per non-target class
  double m = std::numeric_limits<double>::infinity();
  bool backdoor_condition_holds = false;  // sigma_t > sigma_c for all c != t
  bool any_clamped = false;
};

/// For each c != t, with D = s_t^2 - s_c^2, V = ||s_t^2 mu_c - s_c^2 mu_t|| and
/// Q = s_t^2 ||mu_c||^2 - s_c^2 ||mu_t||^2 + 2 s_t^2 s_c^2 log(w_t/w_c) where
/// w includes the sigma^-d normaliser, the target beats c whenever
/// D r^2 - 2 V r + Q > 0 with r = ||b||, which holds for r > (V + sqrt(V^2 - D Q)) / D.
/// A negative discriminant means the pair holds everywhere (bound 0).
NormThresholdCertificate certify_norm_threshold(const GaussianMixtureHead& head);

/// One chain stage: b <- BN(gain * b) with per-dimension BN parameters.
struct ChainStage {
  double gain = 1.0;  // positive linear map
  BnParams bn;
};

/// Identity stages (gain 1, gamma 1, beta 0, mean 0, var 1, eps 0).
std::vector<ChainStage> identity_chain(std::size_t stages, std::size_t dim);

struct AmplificationPoint {
  double omega = 1.0;
  std::size_t k = 0;  // number of trailing stages amplified
  double mean_norm = 0.0;
  double norm_std = 0.0;
  double target_fraction = 0.0;              // over all samples
  double top_decile_target_fraction = 0.0;   // among the 10% largest norms
  std::size_t above_m = 0;                   // samples with ||b|| > M
  std::size_t above_m_target = 0;            // ... of which classified to t
};

struct SimulationResult {
  std::uint64_t seed = 0;
  std::size_t samples = 0;
  double certified_m = 0.0;
  std::vector<AmplificationPoint> points;  // omega-major, k = 0..stages
};

/// Draws `samples` features from the mixture, pushes them through the chain
/// with the last k stages' gamma and beta scaled by omega (k = 0..stages, for
/// each omega), and classifies the outputs with the head. Sampling uses
/// fixed-size blocks with independent seed streams, so results depend only
/// on `seed`.
SimulationResult simulate_amplification(const GaussianMixtureHead& head, const std::vector<ChainStage>& chain,
                                        const std::vector<double>& omegas, std::size_t samples,
                                        std::uint64_t seed);

}  // namespace ibdpsc

// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

// Training-set purification: score every sample of a suspect training set
// with the detector, using a model trained on that same set, and split the
// indices into keep/drop. Retraining on the kept subset happens elsewhere.

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "ibdpsc/dataset.hpp"
#include "ibdpsc/detector.hpp"
#include "ibdpsc/metrics.hpp"
#include "ibdpsc/model.hpp"
#include "ibdpsc/report_io.hpp"
#include "ibdpsc/selector.hpp"

namespace ibdpsc {

struct PurificationSummary {
  std::size_t total = 0;
  std::size_t removed = 0;
  std::optional<double> auroc;             // when flags exist and both classes occur
  std::optional<ThresholdMetrics> counts;  // when flags exist
};

struct PurificationResult {
  std::vector<std::size_t> keep_indices;  // ascending
  std::vector<std::size_t> drop_indices;  // ascending, {i : PSC_i > T}
  std::vector<double> psc;
  std::size_t k = 0;
  std::optional<SelectionResult> selection;  // present when k was selected here
  DetectionReport report;
  PurificationSummary summary;
};

/// Runs layer selection on `benign_ref` (unless cfg.k is set), then the
/// detector over the whole suspect set.
PurificationResult purify(const ModelGraph& model, const LabeledSet& suspect, const DetectorConfig& cfg,
                          const LabeledSet& benign_ref);

/// Writes keep.txt, drop.txt (one index per line) and summary.json into `dir`.
/// `provenance` is embedded in summary.json.
void write_purification(const PurificationResult& result, const std::filesystem::path& dir,
                        const Provenance& provenance = {});

}  // namespace ibdpsc

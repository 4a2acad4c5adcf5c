// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

// CSV form of a DetectionReport:
//
//   # key=value                      provenance lines (config, model hash, ...)
//   sample_index,y_prime,psc,verdict,view_conf_1,...,view_conf_n
//   0,3,0.12345678901234567,benign,0.2,0.1,...
//
// One view_conf column per requested view; views cut off at L_bn leave their
// cells empty. PSC is written with 17 significant digits so re-thresholding a
// loaded report reproduces detect() exactly.

#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ibdpsc/dataset.hpp"
#include "ibdpsc/detector.hpp"
#include "ibdpsc/metrics.hpp"

namespace ibdpsc {

using Provenance = std::vector<std::pair<std::string, std::string>>;

/// Writes `# key=value` lines for every entry, then the table.
void write_provenance(std::ostream& out, const Provenance& provenance);

/// Config entries (omega, n, xi, threshold, k, views, truncated, warnings).
Provenance report_provenance(const DetectionReport& report);

void write_report_csv(std::ostream& out, const DetectionReport& report, const Provenance& extra = {});

struct LoadedReport {
  DetectionReport report;
  Provenance provenance;
};

/// Throws FormatError on malformed input.
LoadedReport read_report_csv(std::istream& in);

/// Pairs each report row with the poison flag of the same sample index.
/// Throws FormatError if `flags` has no poison flags or the sizes disagree.
std::vector<ScoredSample> scored_samples(const DetectionReport& report, const LabeledSet& flags);

}  // namespace ibdpsc

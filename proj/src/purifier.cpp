// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

#include "ibdpsc/purifier.hpp"

#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ibdpsc/errors.hpp"

namespace ibdpsc {

PurificationResult purify(const ModelGraph& model, const LabeledSet& suspect, const DetectorConfig& cfg,
                          const LabeledSet& benign_ref) {
  cfg.validate();
  suspect.validate();
  PurificationResult result;
  DetectorConfig effective = cfg;
  if (!effective.k) {
    benign_ref.validate();
    result.selection = select_k(model, cfg.omega, cfg.xi, benign_ref, cfg.mode);
    effective.k = result.selection->k;
  }
  result.k = *effective.k;
  result.report = detect(model, effective, suspect);
  if (result.selection && result.selection->saturated) {
    result.report.warnings.push_back(
        fmt::format("layer selection saturated: eta never exceeded xi={}, using k={}", cfg.xi, result.k));
  }

  result.psc.reserve(suspect.size());
  for (const auto& s : result.report.samples) {
    result.psc.push_back(s.psc);
    (s.poisoned ? result.drop_indices : result.keep_indices).push_back(s.index);
  }
  result.summary.total = suspect.size();
  result.summary.removed = result.drop_indices.size();
  if (suspect.has_flags()) {
    std::vector<ScoredSample> scored;
    scored.reserve(suspect.size());
    for (std::size_t i = 0; i < suspect.size(); ++i) scored.push_back({result.psc[i], (*suspect.poison_flags)[i]});
    result.summary.counts = f1_at_threshold(scored, cfg.threshold);
    const auto& c = *result.summary.counts;
    if (c.tp + c.fn > 0 && c.fp + c.tn > 0) result.summary.auroc = auroc(scored);
  }
  return result;
}

void write_purification(const PurificationResult& result, const std::filesystem::path& dir,
                        const Provenance& provenance) {
  std::filesystem::create_directories(dir);
  const auto write_indices = [&](const char* name, const std::vector<std::size_t>& indices) {
    std::ofstream out(dir / name);
    if (!out) throw IoError(fmt::format("cannot write '{}'", (dir / name).string()));
    for (auto i : indices) out << i << '\n';
  };
  write_indices("keep.txt", result.keep_indices);
  write_indices("drop.txt", result.drop_indices);

  nlohmann::json summary;
  summary["total"] = result.summary.total;
  summary["removed"] = result.summary.removed;
  summary["kept"] = result.keep_indices.size();
  summary["k"] = result.k;
  summary["views"] = result.report.views;
  summary["warnings"] = result.report.warnings;
  if (result.selection) summary["eta_curve"] = result.selection->eta_curve;
  if (result.summary.counts) {
    const auto& c = *result.summary.counts;
    summary["metrics"] = {{"tpr", c.tpr}, {"fpr", c.fpr},       {"precision", c.precision},
                          {"f1", c.f1},   {"tp", c.tp},         {"fp", c.fp},
                          {"tn", c.tn},   {"fn", c.fn}};
    if (result.summary.auroc) summary["metrics"]["auroc"] = *result.summary.auroc;
  }
  nlohmann::json prov = nlohmann::json::object();
  for (const auto& [k, v] : provenance) prov[k] = v;
  for (const auto& [k, v] : report_provenance(result.report)) prov[k] = v;
  summary["provenance"] = prov;

  std::ofstream out(dir / "summary.json");
  if (!out) throw IoError(fmt::format("cannot write '{}'", (dir / "summary.json").string()));
  out << summary.dump(2) << '\n';
}

}  // namespace ibdpsc

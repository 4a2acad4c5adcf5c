// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "ibdpsc/purifier.hpp"
#include "toy_backdoor.hpp"

using namespace ibdpsc;
using namespace ibdpsc::testing;

namespace {

void check_partition(const PurificationResult& r, std::size_t total, double threshold) {
  CHECK(std::is_sorted(r.keep_indices.begin(), r.keep_indices.end()));
  CHECK(std::is_sorted(r.drop_indices.begin(), r.drop_indices.end()));
  std::vector<std::size_t> all = r.keep_indices;
  all.insert(all.end(), r.drop_indices.begin(), r.drop_indices.end());
  std::sort(all.begin(), all.end());
  REQUIRE(all.size() == total);
  for (std::size_t i = 0; i < total; ++i) CHECK(all[i] == i);
  for (std::size_t i : r.drop_indices) CHECK(r.psc[i] > threshold);
  for (std::size_t i : r.keep_indices) CHECK(r.psc[i] <= threshold);
}

}  // namespace

TEST_CASE("backdoored model on its own poisoned training set") {
  const ModelGraph g = make_toy_model(Trigger::checker);
  const LabeledSet suspect = make_suspect_set(13, 300, 0.1);
  const LabeledSet reference = make_clean_set(11, 100);
  const PurificationResult r = purify(g, suspect, DetectorConfig{}, reference);
  check_partition(r, 300, 0.9);
  REQUIRE(r.selection.has_value());
  CHECK(r.k == r.selection->k);
  REQUIRE(r.summary.counts.has_value());
  CHECK(r.summary.counts->tpr == 1.0);
  CHECK(r.summary.counts->fpr == 0.0);
  REQUIRE(r.summary.auroc.has_value());
  CHECK(*r.summary.auroc == 1.0);
  CHECK(r.summary.removed == 30);

  // Bookkeeping only: verdicts are those of detect().
  DetectorConfig cfg;
  cfg.k = r.k;
  CHECK(detect(g, cfg, suspect).flagged_indices() == r.drop_indices);
}

TEST_CASE("benign model on a clean set removes little") {
  const ModelGraph g = make_toy_model(Trigger::none);
  const LabeledSet suspect = make_suspect_set(14, 200, 0.0);
  const PurificationResult r = purify(g, suspect, DetectorConfig{}, make_clean_set(11, 100));
  check_partition(r, 200, 0.9);
  CHECK(static_cast<double>(r.summary.removed) / 200.0 < 0.1);
  CHECK_FALSE(r.summary.auroc.has_value());  // single-class flags
}

TEST_CASE("T = 1 keeps everything; a fixed k skips selection") {
  DetectorConfig cfg;
  cfg.threshold = 1.0;
  cfg.k = 4;
  const PurificationResult r =
      purify(make_toy_model(Trigger::checker), make_suspect_set(13, 60, 0.5), cfg, make_clean_set(11, 10));
  CHECK(r.drop_indices.empty());
  CHECK(r.keep_indices.size() == 60);
  CHECK_FALSE(r.selection.has_value());
}

TEST_CASE("written partition files") {
  const PurificationResult r = purify(make_toy_model(Trigger::checker), make_suspect_set(13, 50, 0.2),
                                      DetectorConfig{}, make_clean_set(11, 100));
  const auto dir = std::filesystem::temp_directory_path() / "ibdpsc_purify_test";
  std::filesystem::remove_all(dir);
  write_purification(r, dir, {{"seed", "3"}});
  std::ifstream drop(dir / "drop.txt");
  std::vector<std::size_t> read;
  for (std::size_t i; drop >> i;) read.push_back(i);
  CHECK(read == r.drop_indices);
  std::ifstream js(dir / "summary.json");
  const auto summary = nlohmann::json::parse(js);
  CHECK(summary["removed"] == r.summary.removed);
  CHECK(summary["kept"] == r.keep_indices.size());
  CHECK(summary["provenance"]["seed"] == "3");
  CHECK(summary["metrics"]["tpr"] == 1.0);
  CHECK(summary["eta_curve"].size() == r.k);
  std::filesystem::remove_all(dir);
}

// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>

#include <doctest.h>

#include "fixtures.hpp"
#include "ibdpsc/detector.hpp"
#include "ibdpsc/model_io.hpp"
#include "ibdpsc/selector.hpp"
#include "toy_backdoor.hpp"

using namespace ibdpsc;
using namespace ibdpsc::testing;

namespace {

std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(IBDPSC_FIXTURE_DIR) / name; }

}  // namespace

TEST_CASE("checked-in fixtures match their generators byte for byte") {
  for (const auto& spec : fixture_catalogue()) {
    CAPTURE(spec.file);
    REQUIRE(std::filesystem::exists(fixture(spec.file)));
    CHECK(read_file(fixture(spec.file)) == spec.build());
  }
}

TEST_CASE("fixture models load and behave as built") {
  const ModelGraph backdoor = load_model(fixture("toy_backdoor.ibdm"));
  CHECK(backdoor.bn_count() == kToyBnLayers);
  const LabeledSet reference = load_dataset(fixture("toy_benign_ref.ibds"));
  CHECK(reference.size() == 100);
  const auto sel = select_k(backdoor, 1.5, 0.6, reference);
  CHECK(sel.k == 4);
  CHECK_FALSE(sel.saturated);

  const LabeledSet mix = load_dataset(fixture("toy_eval_mix.ibds"));
  REQUIRE(mix.poison_flags.has_value());
  DetectorConfig cfg;
  cfg.k = sel.k;
  const auto report = detect(backdoor, cfg, mix);
  for (std::size_t i = 0; i < mix.size(); ++i) CHECK(report.samples[i].poisoned == static_cast<bool>((*mix.poison_flags)[i]));
}

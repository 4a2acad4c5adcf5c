// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

#include "fixtures.hpp"

#include "ibdpsc/model_io.hpp"
#include "toy_backdoor.hpp"

namespace ibdpsc::testing {

const std::vector<FixtureSpec>& fixture_catalogue() {
  static const std::vector<FixtureSpec> specs = {
      {"toy_backdoor.ibdm", [] { return encode_model(make_toy_model(Trigger::checker)); }},
      {"toy_white_trigger.ibdm", [] { return encode_model(make_toy_model(Trigger::white)); }},
      {"toy_benign.ibdm", [] { return encode_model(make_toy_model(Trigger::none)); }},
      {"toy_benign_ref.ibds", [] { return encode_dataset(make_clean_set(11, 100)); }},
      {"toy_eval_mix.ibds", [] { return encode_dataset(make_eval_mix(12, 50, 50)); }},
      {"toy_white_eval_mix.ibds", [] { return encode_dataset(make_eval_mix(15, 50, 50, Trigger::white)); }},
      {"toy_suspect.ibds", [] { return encode_dataset(make_suspect_set(13, 300, 0.1)); }},
      {"toy_clean_suspect.ibds", [] { return encode_dataset(make_suspect_set(14, 200, 0.0)); }},
  };
  return specs;
}

}  // namespace ibdpsc::testing

// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

// The checked-in files under tests/fixtures and how each one is built.
// tools/make_fixtures writes them; fixture_test re-derives them in memory and
// compares bytes.

#pragma once

#include <functional>
#include <string>
#include <vector>

namespace ibdpsc::testing {

struct FixtureSpec {
  std::string file;
  std::function<std::vector<char>()> build;
};

const std::vector<FixtureSpec>& fixture_catalogue();

}  // namespace ibdpsc::testing

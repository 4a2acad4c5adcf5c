// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ibdpsc {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,  // unknown flag, missing option, out-of-range parameter
  kExitData = 2,   // missing file, malformed container, numeric failure
};

/// Entry point behind the `ibdpsc` binary. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ibdpsc

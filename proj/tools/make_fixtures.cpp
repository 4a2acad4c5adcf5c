// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

// Regenerates the committed test fixtures: make_fixtures <output-dir>

#include <filesystem>
#include <iostream>

#include "fixtures.hpp"
#include "ibdpsc/model_io.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures <output-dir>\n";
    return 1;
  }
  const std::filesystem::path dir = argv[1];
  std::filesystem::create_directories(dir);
  for (const auto& spec : ibdpsc::testing::fixture_catalogue()) {
    const auto bytes = spec.build();
    ibdpsc::write_file(dir / spec.file, bytes);
    std::cout << spec.file << "  " << bytes.size() << " bytes  sha256 " << ibdpsc::sha256_hex(bytes) << '\n';
  }
  return 0;
}

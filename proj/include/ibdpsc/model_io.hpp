// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

// Exchange containers shared with the training side.
//
//   *.ibdm  "IBDM0001" | u64 LE manifest length | UTF-8 JSON manifest | f32 LE blob
//   *.ibds  "IBDS0001" | u64 LE manifest length | UTF-8 JSON manifest |
//           f32 LE images | u32 LE labels | u8 flags (only when has_flags)
//
// Model manifests list layers with their kind, name, geometry and blob
// references {"offset", "count"} measured in floats from the start of the
// blob. Convolutions are cross-correlations; the manifest states this in its
// "convolution" field and the loader rejects anything else.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ibdpsc/dataset.hpp"
#include "ibdpsc/model.hpp"

namespace ibdpsc {

inline constexpr char kModelMagic[] = "IBDM0001";
inline constexpr char kDatasetMagic[] = "IBDS0001";

std::vector<char> encode_model(const ModelGraph& graph);
ModelGraph decode_model(const std::vector<char>& bytes);

void save_model(const ModelGraph& graph, const std::filesystem::path& path);
ModelGraph load_model(const std::filesystem::path& path);

std::vector<char> encode_dataset(const LabeledSet& set);
LabeledSet decode_dataset(const std::vector<char>& bytes);

void save_dataset(const LabeledSet& set, const std::filesystem::path& path);
LabeledSet load_dataset(const std::filesystem::path& path);

/// Whole-file read/write helpers; throw IoError.
std::vector<char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<char>& bytes);

/// Hex SHA-256 of a byte buffer (used for provenance records).
std::string sha256_hex(const std::vector<char>& bytes);

}  // namespace ibdpsc

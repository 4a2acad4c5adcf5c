// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace ibdpsc {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor or layer shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A kernel produced (or was fed) NaN/Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Argument outside its documented domain (k out of range, omega <= 0, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed container file or dataset content.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure (open/read/write).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Error attributed to a specific top-level layer of a model graph.
///
/// `what()` already contains "layer <i>"; the index is also kept so callers
/// can report it structurally.
class LayerError : public Error {
 public:
  enum class Kind { shape, numeric, format };

  LayerError(Kind kind, std::size_t layer_index, const std::string& message)
      : Error("layer " + std::to_string(layer_index) + ": " + message),
        kind_(kind),
        layer_index_(layer_index) {}

  Kind kind() const noexcept { return kind_; }
  std::size_t layer_index() const noexcept { return layer_index_; }

 private:
  Kind kind_;
  std::size_t layer_index_;
};

}  // namespace ibdpsc

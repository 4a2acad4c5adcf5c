// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

// Model graph of the suspicious classifier and its forward pass.
//
// BN ordering: every BatchNorm layer gets a position in bn_order, assigned
// depth-first in execution order. Inside a residual block the skip branch is
// visited (and executed) before the main branch. "The last k BN layers" always
// means the final k entries of bn_order.

#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "ibdpsc/tensor.hpp"

namespace ibdpsc {

struct Layer;

struct Conv2dLayer {
  Tensor weight;             // [Cout, Cin, kh, kw]
  std::vector<float> bias;   // empty or Cout
  std::size_t stride = 1;
  std::size_t padding = 0;
};

struct BatchNormLayer {
  BnParams params;
};

struct ReluLayer {};

struct MaxPoolLayer {
  std::size_t kernel = 2;
  std::size_t stride = 2;
};

struct GlobalAvgPoolLayer {};

struct LinearLayer {
  Tensor weight;             // [K, D]
  std::vector<float> bias;   // empty or K
};

/// out = skip(x) + main(x). An empty skip branch is the identity.
struct ResidualLayer {
  std::vector<Layer> skip;
  std::vector<Layer> main;
};

using LayerOp = std::variant<Conv2dLayer, BatchNormLayer, ReluLayer, MaxPoolLayer,
                             GlobalAvgPoolLayer, LinearLayer, ResidualLayer>;

struct Layer {
  std::string name;
  LayerOp op;
};

/// Manifest spelling of a layer kind ("conv2d", "batchnorm", ...).
const char* layer_kind_name(const LayerOp& op);

/// Validated, immutable classifier graph.
class ModelGraph {
 public:
  /// Validates shape composition and the terminal Linear head; throws
  /// LayerError naming the offending top-level layer.
  ModelGraph(std::vector<Layer> layers, std::size_t class_count, Shape input_shape);

  ModelGraph(const ModelGraph& other);
  ModelGraph& operator=(const ModelGraph& other);
  ModelGraph(ModelGraph&&) noexcept = default;
  ModelGraph& operator=(ModelGraph&&) noexcept = default;

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::size_t class_count() const noexcept { return class_count_; }
  /// (channels, height, width) of one sample.
  const Shape& input_shape() const noexcept { return input_shape_; }

  std::size_t bn_count() const noexcept { return bn_order_.size(); }
  /// BN layers in forward-execution order.
  const std::vector<const Layer*>& bn_order() const noexcept { return bn_order_; }
  const BnParams& bn_params(std::size_t position) const;

  /// Feature width entering the terminal Linear layer.
  std::size_t feature_dim() const noexcept { return feature_dim_; }

 private:
  void index_batchnorms();

  std::vector<Layer> layers_;
  std::size_t class_count_ = 0;
  Shape input_shape_;
  std::size_t feature_dim_ = 0;
  std::vector<const Layer*> bn_order_;
};

/// Replacement (gamma, beta) for one BN layer.
struct BnAffine {
  std::vector<float> gamma;
  std::vector<float> beta;
};

/// Keyed by bn_order position. Running statistics are never overridden.
using BnOverrides = std::map<std::size_t, BnAffine>;

struct ForwardResult {
  Tensor logits;         // [N, C]
  Tensor probabilities;  // softmax(logits)
};

/// Runs the graph on a [N, c, h, w] batch. Samples are independent, so large
/// batches are split across worker threads; results do not depend on the
/// split.
ForwardResult forward(const ModelGraph& graph, const Tensor& batch, const BnOverrides& overrides = {});

/// Activations entering the terminal Linear layer, flattened to [N, D].
Tensor forward_features(const ModelGraph& graph, const Tensor& batch, const BnOverrides& overrides = {});

/// Called once per BN layer with (bn position, layer input, layer output).
using BnObserver = std::function<void(std::size_t, const Tensor&, const Tensor&)>;

/// Single-threaded forward pass that reports every BN layer's input/output.
ForwardResult trace_forward(const ModelGraph& graph, const Tensor& batch, const BnOverrides& overrides,
                            const BnObserver& observer);

}  // namespace ibdpsc

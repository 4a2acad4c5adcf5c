// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

#include "ibdpsc/model.hpp"

#include <fmt/format.h>

#include "ibdpsc/errors.hpp"
#include "ibdpsc/parallel.hpp"

namespace ibdpsc {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Shapes here include a leading batch extent of 1.
Shape infer_sequence(const std::vector<Layer>& layers, Shape shape);

Shape infer_layer(const Layer& layer, const Shape& in) {
  return std::visit(
      overloaded{
          [&](const Conv2dLayer& l) -> Shape {
            if (l.weight.rank() != 4) throw ShapeError("conv2d weight must be rank 4");
            if (in.size() != 4) throw ShapeError("conv2d needs a [N,C,H,W] input, got " + shape_to_string(in));
            if (l.weight.dim(1) != in[1]) {
              throw ShapeError(fmt::format("conv2d '{}' expects {} input channels, got {}", layer.name,
                                           l.weight.dim(1), in[1]));
            }
            if (!l.bias.empty() && l.bias.size() != l.weight.dim(0)) {
              throw ShapeError(fmt::format("conv2d '{}' bias length {} != {}", layer.name, l.bias.size(),
                                           l.weight.dim(0)));
            }
            if (l.stride == 0) throw ShapeError("conv2d stride must be >= 1");
            const std::size_t ph = in[2] + 2 * l.padding, pw = in[3] + 2 * l.padding;
            const std::size_t kh = l.weight.dim(2), kw = l.weight.dim(3);
            if (kh > ph || kw > pw || (ph - kh) % l.stride != 0 || (pw - kw) % l.stride != 0) {
              throw ShapeError(fmt::format("conv2d '{}' kernel {}x{} stride {} padding {} does not tile input {}",
                                           layer.name, kh, kw, l.stride, l.padding, shape_to_string(in)));
            }
            return {in[0], l.weight.dim(0), (ph - kh) / l.stride + 1, (pw - kw) / l.stride + 1};
          },
          [&](const BatchNormLayer& l) -> Shape {
            try {
              l.params.validate();
            } catch (const ConfigError& e) {
              throw ShapeError(fmt::format("batchnorm '{}': {}", layer.name, e.what()));
            }
            if ((in.size() != 2 && in.size() != 4) || in[1] != l.params.channels()) {
              throw ShapeError(fmt::format("batchnorm '{}' has {} channels, input is {}", layer.name,
                                           l.params.channels(), shape_to_string(in)));
            }
            return in;
          },
          [&](const ReluLayer&) -> Shape { return in; },
          [&](const MaxPoolLayer& l) -> Shape {
            if (in.size() != 4 || l.kernel == 0 || l.stride == 0 || l.kernel > in[2] || l.kernel > in[3]) {
              throw ShapeError(fmt::format("maxpool2d '{}' window {} does not fit input {}", layer.name, l.kernel,
                                           shape_to_string(in)));
            }
            return {in[0], in[1], (in[2] - l.kernel) / l.stride + 1, (in[3] - l.kernel) / l.stride + 1};
          },
          [&](const GlobalAvgPoolLayer&) -> Shape {
            if (in.size() != 4) throw ShapeError("global_avgpool needs a [N,C,H,W] input");
            return {in[0], in[1]};
          },
          [&](const LinearLayer& l) -> Shape {
            if (l.weight.rank() != 2) throw ShapeError("linear weight must be rank 2");
            const std::size_t d = shape_volume(in) / in[0];
            if (l.weight.dim(1) != d) {
              throw ShapeError(fmt::format("linear '{}' expects {} features, input provides {}", layer.name,
                                           l.weight.dim(1), d));
            }
            if (!l.bias.empty() && l.bias.size() != l.weight.dim(0)) {
              throw ShapeError(fmt::format("linear '{}' bias length {} != {}", layer.name, l.bias.size(),
                                           l.weight.dim(0)));
            }
            return {in[0], l.weight.dim(0)};
          },
          [&](const ResidualLayer& l) -> Shape {
            const Shape skip = infer_sequence(l.skip, in);
            const Shape main = infer_sequence(l.main, in);
            if (skip != main) {
              throw ShapeError(fmt::format("residual '{}' branches disagree: skip {} vs main {}", layer.name,
                                           shape_to_string(skip), shape_to_string(main)));
            }
            return main;
          },
      },
      layer.op);
}

Shape infer_sequence(const std::vector<Layer>& layers, Shape shape) {
  for (const auto& layer : layers) shape = infer_layer(layer, shape);
  return shape;
}

void collect_batchnorms(const std::vector<Layer>& layers, std::vector<const Layer*>& out) {
  for (const auto& layer : layers) {
    if (std::holds_alternative<BatchNormLayer>(layer.op)) {
      out.push_back(&layer);
    } else if (const auto* res = std::get_if<ResidualLayer>(&layer.op)) {
      collect_batchnorms(res->skip, out);
      collect_batchnorms(res->main, out);
    }
  }
}

class Interpreter {
 public:
  Interpreter(const ModelGraph& graph, const BnOverrides& overrides, const BnObserver* observer)
      : graph_(graph), overrides_(overrides), observer_(observer) {}

  // Runs top-level layers [0, end), attributing failures to the top-level index.
  Tensor run_top(Tensor x, std::size_t end) {
    const auto& layers = graph_.layers();
    for (std::size_t i = 0; i < end; ++i) {
      try {
        x = run_layer(layers[i], std::move(x));
      } catch (const NumericError& e) {
        throw LayerError(LayerError::Kind::numeric, i, e.what());
      } catch (const ShapeError& e) {
        throw LayerError(LayerError::Kind::shape, i, e.what());
      }
    }
    return x;
  }

 private:
  Tensor run_sequence(const std::vector<Layer>& layers, Tensor x) {
    for (const auto& layer : layers) x = run_layer(layer, std::move(x));
    return x;
  }

  Tensor run_layer(const Layer& layer, Tensor x) {
    return std::visit(
        overloaded{
            [&](const Conv2dLayer& l) { return conv2d(x, l.weight, l.bias, l.stride, l.padding); },
            [&](const BatchNormLayer& l) {
              const std::size_t position = bn_position_++;
              Tensor y;
              if (auto it = overrides_.find(position); it != overrides_.end()) {
                y = batchnorm_infer(x, l.params, it->second.gamma, it->second.beta);
              } else {
                y = batchnorm_infer(x, l.params);
              }
              if (observer_ != nullptr && *observer_) (*observer_)(position, x, y);
              return y;
            },
            [&](const ReluLayer&) { return relu(x); },
            [&](const MaxPoolLayer& l) { return maxpool2d(x, l.kernel, l.stride); },
            [&](const GlobalAvgPoolLayer&) { return global_avgpool(x); },
            [&](const LinearLayer& l) { return linear(x, l.weight, l.bias); },
            [&](const ResidualLayer& l) {
              Tensor skip = run_sequence(l.skip, x);
              Tensor main = run_sequence(l.main, std::move(x));
              return add(skip, main);
            },
        },
        layer.op);
  }

  const ModelGraph& graph_;
  const BnOverrides& overrides_;
  const BnObserver* observer_;
  std::size_t bn_position_ = 0;
};

void check_batch(const ModelGraph& graph, const Tensor& batch) {
  const Shape& s = graph.input_shape();
  if (batch.rank() != 4 || batch.dim(1) != s[0] || batch.dim(2) != s[1] || batch.dim(3) != s[2]) {
    throw ShapeError(fmt::format("batch shape {} does not match model input [N,{},{},{}]",
                                 shape_to_string(batch.shape()), s[0], s[1], s[2]));
  }
}

void check_overrides(const ModelGraph& graph, const BnOverrides& overrides) {
  for (const auto& [position, affine] : overrides) {
    if (position >= graph.bn_count()) {
      throw ConfigError(fmt::format("override targets BN position {} but the model has {}", position,
                                    graph.bn_count()));
    }
    const std::size_t c = graph.bn_params(position).channels();
    if (affine.gamma.size() != c || affine.beta.size() != c) {
      throw ConfigError(fmt::format("override for BN position {} has wrong channel count", position));
    }
  }
}

constexpr std::size_t kMinChunk = 8;

// Runs `end` top-level layers, splitting the batch across workers.
Tensor run_batched(const ModelGraph& graph, const Tensor& batch, const BnOverrides& overrides, std::size_t end) {
  check_batch(graph, batch);
  check_overrides(graph, overrides);
  const std::size_t n = batch.dim(0);
  if (n < 2 * kMinChunk || worker_count() == 1) {
    return Interpreter(graph, overrides, nullptr).run_top(batch, end);
  }
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  std::vector<Tensor> parts;
  // Fixed chunking keeps the work split independent of completion order.
  const std::size_t workers = worker_count();
  const std::size_t chunk = std::max(kMinChunk, (n + workers - 1) / workers);
  for (std::size_t b = 0; b < n; b += chunk) ranges.emplace_back(b, std::min(n, b + chunk));
  parts.resize(ranges.size());
  parallel_for(ranges.size(), 1, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t r = lo; r < hi; ++r) {
      parts[r] = Interpreter(graph, overrides, nullptr)
                     .run_top(batch.slice_batch(ranges[r].first, ranges[r].second), end);
    }
  });
  return concat_batch(parts);
}

}  // namespace

const char* layer_kind_name(const LayerOp& op) {
  return std::visit(overloaded{
                        [](const Conv2dLayer&) { return "conv2d"; },
                        [](const BatchNormLayer&) { return "batchnorm"; },
                        [](const ReluLayer&) { return "relu"; },
                        [](const MaxPoolLayer&) { return "maxpool2d"; },
                        [](const GlobalAvgPoolLayer&) { return "global_avgpool"; },
                        [](const LinearLayer&) { return "linear"; },
                        [](const ResidualLayer&) { return "residual"; },
                    },
                    op);
}

ModelGraph::ModelGraph(std::vector<Layer> layers, std::size_t class_count, Shape input_shape)
    : layers_(std::move(layers)), class_count_(class_count), input_shape_(std::move(input_shape)) {
  if (input_shape_.size() != 3 || shape_volume(input_shape_) == 0) {
    throw ShapeError("model input shape must be (channels, height, width) with positive extents");
  }
  if (class_count_ == 0) throw ShapeError("model class count must be positive");
  if (layers_.empty()) throw ShapeError("model has no layers");

  Shape shape{1, input_shape_[0], input_shape_[1], input_shape_[2]};
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (i + 1 == layers_.size()) feature_dim_ = shape_volume(shape);
    try {
      shape = infer_layer(layers_[i], shape);
    } catch (const ShapeError& e) {
      throw LayerError(LayerError::Kind::shape, i, e.what());
    }
  }
  const auto* head = std::get_if<LinearLayer>(&layers_.back().op);
  if (head == nullptr) {
    throw LayerError(LayerError::Kind::shape, layers_.size() - 1, "the terminal layer must be linear");
  }
  if (head->weight.dim(0) != class_count_) {
    throw LayerError(LayerError::Kind::shape, layers_.size() - 1,
                     fmt::format("terminal linear produces {} logits, model declares {} classes",
                                 head->weight.dim(0), class_count_));
  }
  index_batchnorms();
  if (bn_order_.empty()) throw ShapeError("model has no batchnorm layer");
}

ModelGraph::ModelGraph(const ModelGraph& other)
    : layers_(other.layers_),
      class_count_(other.class_count_),
      input_shape_(other.input_shape_),
      feature_dim_(other.feature_dim_) {
  index_batchnorms();
}

ModelGraph& ModelGraph::operator=(const ModelGraph& other) {
  if (this != &other) {
    ModelGraph copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void ModelGraph::index_batchnorms() {
  bn_order_.clear();
  collect_batchnorms(layers_, bn_order_);
}

const BnParams& ModelGraph::bn_params(std::size_t position) const {
  if (position >= bn_order_.size()) {
    throw ConfigError(fmt::format("BN position {} out of range (model has {})", position, bn_order_.size()));
  }
  return std::get<BatchNormLayer>(bn_order_[position]->op).params;
}

ForwardResult forward(const ModelGraph& graph, const Tensor& batch, const BnOverrides& overrides) {
  Tensor logits = run_batched(graph, batch, overrides, graph.layers().size());
  Tensor probs = softmax(logits);
  return {std::move(logits), std::move(probs)};
}

Tensor forward_features(const ModelGraph& graph, const Tensor& batch, const BnOverrides& overrides) {
  Tensor features = run_batched(graph, batch, overrides, graph.layers().size() - 1);
  const std::size_t n = features.dim(0);
  return std::move(features).reshaped({n, graph.feature_dim()});
}

ForwardResult trace_forward(const ModelGraph& graph, const Tensor& batch, const BnOverrides& overrides,
                            const BnObserver& observer) {
  check_batch(graph, batch);
  check_overrides(graph, overrides);
  Tensor logits = Interpreter(graph, overrides, &observer).run_top(batch, graph.layers().size());
  Tensor probs = softmax(logits);
  return {std::move(logits), std::move(probs)};
}

}  // namespace ibdpsc

// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

// Dense float tensors and the handful of inference kernels needed to run
// BN-bearing CNNs. Storage is float32, every dot product and reduction
// accumulates in double. All kernels are pure functions; they throw
// NumericError rather than return NaN/Inf.

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ibdpsc {

using Shape = std::vector<std::size_t>;

std::size_t shape_volume(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Row-major rank-1..4 float tensor.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<float> values() noexcept { return data_; }
  std::span<const float> values() const noexcept { return data_; }
  float* data() noexcept { return data_.data(); }
  const float* data() const noexcept { return data_.data(); }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  /// Element access for rank-4 (N,C,H,W) tensors.
  float& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w);
  float at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

  /// Same data, new shape of equal volume.
  Tensor reshaped(Shape shape) const&;
  Tensor reshaped(Shape shape) &&;

  /// Rows [begin, end) along axis 0.
  Tensor slice_batch(std::size_t begin, std::size_t end) const;

  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

/// Concatenates tensors along axis 0. Trailing extents must agree.
Tensor concat_batch(std::span<const Tensor> parts);

/// Inference-mode batch-norm parameters, one entry per channel.
struct BnParams {
  std::vector<float> gamma;
  std::vector<float> beta;
  std::vector<float> running_mean;
  std::vector<float> running_var;
  float epsilon = 1e-5f;

  std::size_t channels() const noexcept { return gamma.size(); }
  /// Throws ConfigError if the vectors disagree in length, a variance is
  /// negative, or epsilon is negative.
  void validate() const;
};

/// Cross-correlation (no kernel flip). input [N,Cin,H,W], weight
/// [Cout,Cin,kh,kw], bias empty or Cout long.
Tensor conv2d(const Tensor& input, const Tensor& weight, std::span<const float> bias,
              std::size_t stride, std::size_t padding);

/// gamma * (x - mean) / sqrt(var + eps) + beta, per channel (axis 1). Accepts
/// rank-2 [N,C] or rank-4 [N,C,H,W] input.
Tensor batchnorm_infer(const Tensor& input, const BnParams& params);

/// Same as batchnorm_infer but with gamma/beta supplied separately; used
/// for amplified views so the running statistics are never copied.
Tensor batchnorm_infer(const Tensor& input, const BnParams& stats,
                       std::span<const float> gamma, std::span<const float> beta);

/// out[n,k] = sum_d in[n,d] * w[k,d] + bias[k]. Inputs of rank > 2 are
/// flattened to [N, D].
Tensor linear(const Tensor& input, const Tensor& weight, std::span<const float> bias);

/// Row-wise softmax of [N,K] logits with max subtraction.
Tensor softmax(const Tensor& logits);

Tensor relu(const Tensor& input);

/// Window max over [N,C,H,W]; output extent floor((H - kernel)/stride) + 1.
Tensor maxpool2d(const Tensor& input, std::size_t kernel, std::size_t stride);

/// [N,C,H,W] -> [N,C] spatial mean.
Tensor global_avgpool(const Tensor& input);

/// Elementwise a + b for identical shapes.
Tensor add(const Tensor& a, const Tensor& b);

/// Index of the row maximum; ties go to the lowest index.
std::size_t argmax_row(const Tensor& matrix, std::size_t row);

}  // namespace ibdpsc

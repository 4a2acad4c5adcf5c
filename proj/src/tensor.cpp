// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

#include "ibdpsc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "ibdpsc/errors.hpp"

namespace ibdpsc {

namespace {

void require_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) {
    throw NumericError(fmt::format("{}: non-finite value in output", op));
  }
}

void require_finite_input(const Tensor& t, const char* op) {
  if (!t.all_finite()) {
    throw NumericError(fmt::format("{}: non-finite value in input", op));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(fmt::format("{}: expected rank {} tensor, got {}", op, rank,
                                 shape_to_string(t.shape())));
  }
}

}  // namespace

std::size_t shape_volume(const Shape& shape) {
  std::size_t v = 1;
  for (auto e : shape) v *= e;
  return v;
}

std::string shape_to_string(const Shape& shape) {
  return fmt::format("[{}]", fmt::join(shape, ","));
}

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)) {
  if (shape_.empty() || shape_.size() > 4) {
    throw ShapeError(fmt::format("tensor rank must be 1..4, got {}", shape_.size()));
  }
  for (auto e : shape_) {
    if (e == 0) throw ShapeError("tensor extents must be positive: " + shape_to_string(shape_));
  }
  data_.assign(shape_volume(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : Tensor(std::move(shape)) {
  if (data.size() != data_.size()) {
    throw ShapeError(fmt::format("tensor data length {} does not match shape {}", data.size(),
                                 shape_to_string(shape_)));
  }
  data_ = std::move(data);
}

float& Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
  return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

float Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
  return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

Tensor Tensor::reshaped(Shape shape) const& {
  Tensor copy = *this;
  return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
  if (shape_volume(shape) != data_.size()) {
    throw ShapeError(fmt::format("cannot reshape {} to {}", shape_to_string(shape_),
                                 shape_to_string(shape)));
  }
  Tensor out;
  out.shape_ = std::move(shape);
  out.data_ = std::move(data_);
  return out;
}

Tensor Tensor::slice_batch(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > shape_.at(0)) {
    throw ShapeError(fmt::format("batch slice [{}, {}) out of range for {}", begin, end,
                                 shape_to_string(shape_)));
  }
  const std::size_t row = data_.size() / shape_[0];
  Shape shape = shape_;
  shape[0] = end - begin;
  return Tensor(std::move(shape),
                std::vector<float>(data_.begin() + static_cast<std::ptrdiff_t>(begin * row),
                                   data_.begin() + static_cast<std::ptrdiff_t>(end * row)));
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

Tensor concat_batch(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_batch: no parts");
  Shape shape = parts.front().shape();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.rank() != shape.size() || !std::equal(shape.begin() + 1, shape.end(), p.shape().begin() + 1)) {
      throw ShapeError(fmt::format("concat_batch: {} incompatible with {}",
                                   shape_to_string(p.shape()), shape_to_string(shape)));
    }
    rows += p.dim(0);
  }
  shape[0] = rows;
  std::vector<float> data;
  data.reserve(shape_volume(shape));
  for (const auto& p : parts) data.insert(data.end(), p.values().begin(), p.values().end());
  return Tensor(std::move(shape), std::move(data));
}

void BnParams::validate() const {
  const std::size_t c = gamma.size();
  if (c == 0 || beta.size() != c || running_mean.size() != c || running_var.size() != c) {
    throw ConfigError(fmt::format("batchnorm vectors disagree in length (gamma {}, beta {}, mean {}, var {})",
                                  gamma.size(), beta.size(), running_mean.size(), running_var.size()));
  }
  if (!(epsilon >= 0.0f) || !std::isfinite(epsilon)) {
    throw ConfigError("batchnorm epsilon must be finite and non-negative");
  }
  for (std::size_t i = 0; i < c; ++i) {
    if (!(running_var[i] >= 0.0f) || !(static_cast<double>(running_var[i]) + epsilon > 0.0)) {
      throw ConfigError(fmt::format("batchnorm channel {}: running_var + epsilon must be positive", i));
    }
  }
}

Tensor conv2d(const Tensor& input, const Tensor& weight, std::span<const float> bias,
              std::size_t stride, std::size_t padding) {
  require_rank(input, 4, "conv2d");
  require_rank(weight, 4, "conv2d weight");
  const std::size_t n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t cout = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  if (weight.dim(1) != cin) {
    throw ShapeError(fmt::format("conv2d: input has {} channels, weight expects {}", cin, weight.dim(1)));
  }
  if (!bias.empty() && bias.size() != cout) {
    throw ShapeError(fmt::format("conv2d: bias length {} != out channels {}", bias.size(), cout));
  }
  if (stride == 0) throw ConfigError("conv2d: stride must be >= 1");
  const std::size_t ph = h + 2 * padding, pw = w + 2 * padding;
  if (kh > ph || kw > pw) {
    throw ShapeError(fmt::format("conv2d: kernel {}x{} larger than padded input {}x{}", kh, kw, ph, pw));
  }
  if ((ph - kh) % stride != 0 || (pw - kw) % stride != 0) {
    throw ShapeError(fmt::format("conv2d: output extent not integral (padded {}x{}, kernel {}x{}, stride {})",
                                 ph, pw, kh, kw, stride));
  }
  require_finite_input(input, "conv2d");
  const std::size_t oh = (ph - kh) / stride + 1, ow = (pw - kw) / stride + 1;
  const std::size_t patch = cin * kh * kw, sites = oh * ow;

  Tensor out({n, cout, oh, ow});
  std::vector<float> cols(patch * sites);
  std::vector<double> acc(sites);
  const float* wdata = weight.data();

  for (std::size_t b = 0; b < n; ++b) {
    // im2col: row p = (ci, ky, kx), column = output site.
    for (std::size_t ci = 0; ci < cin; ++ci) {
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          float* row = cols.data() + ((ci * kh + ky) * kw + kx) * sites;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                      static_cast<std::ptrdiff_t>(padding);
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                        static_cast<std::ptrdiff_t>(padding);
              const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(h) &&
                                  ix < static_cast<std::ptrdiff_t>(w);
              row[oy * ow + ox] =
                  inside ? input.at(b, ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) : 0.0f;
            }
          }
        }
      }
    }
    for (std::size_t co = 0; co < cout; ++co) {
      std::fill(acc.begin(), acc.end(), bias.empty() ? 0.0 : static_cast<double>(bias[co]));
      const float* wrow = wdata + co * patch;
      for (std::size_t p = 0; p < patch; ++p) {
        const double wv = wrow[p];
        if (wv == 0.0) continue;
        const float* crow = cols.data() + p * sites;
        for (std::size_t s = 0; s < sites; ++s) acc[s] += wv * crow[s];
      }
      float* dst = out.data() + (b * cout + co) * sites;
      for (std::size_t s = 0; s < sites; ++s) dst[s] = static_cast<float>(acc[s]);
    }
  }
  require_finite(out, "conv2d");
  return out;
}

Tensor batchnorm_infer(const Tensor& input, const BnParams& params) {
  return batchnorm_infer(input, params, params.gamma, params.beta);
}

Tensor batchnorm_infer(const Tensor& input, const BnParams& stats, std::span<const float> gamma,
                       std::span<const float> beta) {
  if (input.rank() != 2 && input.rank() != 4) {
    throw ShapeError("batchnorm: expected [N,C] or [N,C,H,W], got " + shape_to_string(input.shape()));
  }
  const std::size_t c = input.dim(1);
  if (stats.running_mean.size() != c || stats.running_var.size() != c || gamma.size() != c ||
      beta.size() != c) {
    throw ShapeError(fmt::format("batchnorm: input has {} channels, parameters have {}", c,
                                 stats.running_mean.size()));
  }
  require_finite_input(input, "batchnorm");
  const std::size_t n = input.dim(0);
  const std::size_t inner = input.rank() == 4 ? input.dim(2) * input.dim(3) : 1;

  Tensor out(input.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double denom = std::sqrt(static_cast<double>(stats.running_var[ch]) + stats.epsilon);
    if (!(denom > 0.0)) throw NumericError(fmt::format("batchnorm: channel {} has zero variance", ch));
    const double mean = stats.running_mean[ch];
    const double g = gamma[ch], bt = beta[ch];
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t base = (b * c + ch) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        out[base + i] = static_cast<float>(g * ((input[base + i] - mean) / denom) + bt);
      }
    }
  }
  require_finite(out, "batchnorm");
  return out;
}

Tensor linear(const Tensor& input, const Tensor& weight, std::span<const float> bias) {
  require_rank(weight, 2, "linear weight");
  if (input.rank() < 2) throw ShapeError("linear: input must be at least rank 2");
  const std::size_t n = input.dim(0), d = input.size() / n;
  const std::size_t k = weight.dim(0);
  if (weight.dim(1) != d) {
    throw ShapeError(fmt::format("linear: input features {} != weight columns {}", d, weight.dim(1)));
  }
  if (!bias.empty() && bias.size() != k) {
    throw ShapeError(fmt::format("linear: bias length {} != out features {}", bias.size(), k));
  }
  require_finite_input(input, "linear");
  Tensor out({n, k});
  for (std::size_t r = 0; r < n; ++r) {
    const float* x = input.data() + r * d;
    for (std::size_t o = 0; o < k; ++o) {
      const float* wr = weight.data() + o * d;
      double acc = bias.empty() ? 0.0 : bias[o];
      for (std::size_t j = 0; j < d; ++j) acc += static_cast<double>(x[j]) * wr[j];
      out[r * k + o] = static_cast<float>(acc);
    }
  }
  require_finite(out, "linear");
  return out;
}

Tensor softmax(const Tensor& logits) {
  require_rank(logits, 2, "softmax");
  require_finite_input(logits, "softmax");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  Tensor out(logits.shape());
  std::vector<double> ex(k);
  for (std::size_t r = 0; r < n; ++r) {
    const float* row = logits.data() + r * k;
    const double mx = *std::max_element(row, row + k);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      ex[j] = std::exp(static_cast<double>(row[j]) - mx);
      total += ex[j];
    }
    for (std::size_t j = 0; j < k; ++j) out[r * k + j] = static_cast<float>(ex[j] / total);
  }
  return out;
}

Tensor relu(const Tensor& input) {
  require_finite_input(input, "relu");
  Tensor out = input;
  for (auto& v : out.values()) v = v > 0.0f ? v : 0.0f;
  return out;
}

Tensor maxpool2d(const Tensor& input, std::size_t kernel, std::size_t stride) {
  require_rank(input, 4, "maxpool2d");
  if (kernel == 0 || stride == 0) throw ConfigError("maxpool2d: kernel and stride must be >= 1");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (kernel > h || kernel > w) {
    throw ShapeError(fmt::format("maxpool2d: window {} larger than input {}x{}", kernel, h, w));
  }
  require_finite_input(input, "maxpool2d");
  const std::size_t oh = (h - kernel) / stride + 1, ow = (w - kernel) / stride + 1;
  Tensor out({n, c, oh, ow});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          float m = -std::numeric_limits<float>::infinity();
          for (std::size_t ky = 0; ky < kernel; ++ky)
            for (std::size_t kx = 0; kx < kernel; ++kx)
              m = std::max(m, input.at(b, ch, oy * stride + ky, ox * stride + kx));
          out.at(b, ch, oy, ox) = m;
        }
  return out;
}

Tensor global_avgpool(const Tensor& input) {
  require_rank(input, 4, "global_avgpool");
  require_finite_input(input, "global_avgpool");
  const std::size_t n = input.dim(0), c = input.dim(1), inner = input.dim(2) * input.dim(3);
  Tensor out({n, c});
  for (std::size_t i = 0; i < n * c; ++i) {
    double acc = 0.0;
    const float* src = input.data() + i * inner;
    for (std::size_t j = 0; j < inner; ++j) acc += src[j];
    out[i] = static_cast<float>(acc / static_cast<double>(inner));
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(fmt::format("add: shape {} != {}", shape_to_string(a.shape()), shape_to_string(b.shape())));
  }
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  require_finite(out, "add");
  return out;
}

std::size_t argmax_row(const Tensor& matrix, std::size_t row) {
  require_rank(matrix, 2, "argmax_row");
  const std::size_t k = matrix.dim(1);
  const float* r = matrix.data() + row * k;
  std::size_t best = 0;
  for (std::size_t j = 1; j < k; ++j) {
    if (r[j] > r[best]) best = j;
  }
  return best;
}

}  // namespace ibdpsc

// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>

#include <doctest.h>

#include "generators.hpp"
#include "ibdpsc/errors.hpp"
#include "ibdpsc/tensor.hpp"
#include "oracle.hpp"

using namespace ibdpsc;
using namespace ibdpsc::testing;

namespace {

void check_close(const Tensor& got, const Dense& want, double tol) {
  REQUIRE(got.shape() == want.shape);
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(std::abs(got[i] - want.v[i]) <= tol * std::max(1.0, std::abs(want.v[i])));
  }
}

}  // namespace

TEST_CASE("tensor construction rejects bad shapes") {
  CHECK_THROWS_AS(Tensor(Shape{}), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{1, 2, 3, 4, 5}), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<float>(3)), ShapeError);
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK_THROWS_AS(t.reshaped({4}), ShapeError);
  CHECK(t.reshaped({3, 2}).shape() == Shape{3, 2});
}

TEST_CASE("slice and concat along the batch axis") {
  Tensor t({3, 2}, {1, 2, 3, 4, 5, 6});
  const Tensor a = t.slice_batch(0, 1);
  const Tensor b = t.slice_batch(1, 3);
  CHECK(b.shape() == Shape{2, 2});
  CHECK(b[0] == 3.0f);
  const std::vector<Tensor> parts{a, b};
  CHECK(concat_batch(parts) == t);
  CHECK_THROWS_AS(t.slice_batch(2, 4), ShapeError);
}

TEST_CASE("conv2d: identity and zero kernels") {
  Rng rng(1);
  const Tensor x = random_tensor(rng, {2, 1, 5, 5});
  const Tensor one({1, 1, 1, 1}, 1.0f);
  CHECK(conv2d(x, one, {}, 1, 0) == x);
  const Tensor zero({3, 1, 2, 2}, 0.0f);
  const Tensor y = conv2d(x, zero, {}, 1, 0);
  CHECK(y.shape() == Shape{2, 3, 4, 4});
  for (float v : y.values()) CHECK(v == 0.0f);
}

TEST_CASE("conv2d: 3x3 padding 1 against the nested-loop oracle") {
  Rng rng(2);
  const Tensor x = random_tensor(rng, {1, 1, 4, 4});
  const Tensor w = random_tensor(rng, {1, 1, 3, 3});
  check_close(conv2d(x, w, {}, 1, 1), naive_conv2d(to_dense(x), w, {}, 1, 1), 1e-5);
}

TEST_CASE("conv2d: shape errors") {
  const Tensor x({1, 2, 5, 5});
  CHECK_THROWS_AS(conv2d(x, Tensor({1, 3, 3, 3}), {}, 1, 0), ShapeError);
  CHECK_THROWS_AS(conv2d(x, Tensor({1, 2, 3, 3}), {}, 3, 0), ShapeError);  // (5-3)/3 not integral
  CHECK_THROWS_AS(conv2d(x, Tensor({1, 2, 7, 7}), {}, 1, 0), ShapeError);
  const std::vector<float> bias{1.0f, 2.0f};
  CHECK_THROWS_AS(conv2d(x, Tensor({1, 2, 3, 3}), bias, 1, 0), ShapeError);
  CHECK(conv2d(x, Tensor({1, 2, 3, 3}), {}, 2, 0).shape() == Shape{1, 1, 2, 2});
}

TEST_CASE("conv2d and linear agree with oracles on random shapes") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = rng.between(1, 3), ci = rng.between(1, 4), co = rng.between(1, 4);
    const std::size_t k = rng.between(1, 3), stride = rng.between(1, 2), pad = rng.between(0, 1);
    std::size_t h = rng.between(k, 8);
    // choose h so that (h + 2 pad - k) divides by stride
    while ((h + 2 * pad - k) % stride != 0) ++h;
    const Tensor x = random_tensor(rng, {n, ci, h, h});
    const Tensor w = random_tensor(rng, {co, ci, k, k});
    const Tensor b = random_tensor(rng, {co});
    const std::vector<float> bias(b.values().begin(), b.values().end());
    check_close(conv2d(x, w, bias, stride, pad), naive_conv2d(to_dense(x), w, bias, stride, pad), 1e-5);

    const std::size_t d = rng.between(1, 8), kk = rng.between(1, 8);
    const Tensor in = random_tensor(rng, {n, d});
    const Tensor lw = random_tensor(rng, {kk, d});
    check_close(linear(in, lw, {}), naive_linear(to_dense(in), lw, {}), 1e-5);
  }
}

TEST_CASE("batchnorm: identity parameters and a hand-computed scalar") {
  Rng rng(4);
  const Tensor x = random_tensor(rng, {2, 3, 2, 2});
  BnParams id{{1, 1, 1}, {0, 0, 0}, {0, 0, 0}, {1, 1, 1}, 0.0f};
  CHECK(batchnorm_infer(x, id) == x);

  BnParams p{{3.0f}, {0.5f}, {1.0f}, {4.0f}, 0.0f};
  const Tensor a({1, 1}, {2.0f});
  CHECK(batchnorm_infer(a, p)[0] == doctest::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("batchnorm: scaled gamma and beta scale the output") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t c = rng.between(1, 6);
    const BnParams p = random_bn(rng, c);
    const Tensor x = random_tensor(rng, {2, c, 3, 3}, -3.0, 3.0);
    const float omega = static_cast<float>(rng.uniform(1.0, 3.0));
    std::vector<float> g = p.gamma, b = p.beta;
    for (auto& v : g) v *= omega;
    for (auto& v : b) v *= omega;
    const Tensor base = batchnorm_infer(x, p);
    const Tensor scaled = batchnorm_infer(x, p, g, b);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double want = static_cast<double>(omega) * base[i];
      CHECK(std::abs(scaled[i] - want) <= 1e-6 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST_CASE("batchnorm: parameter validation") {
  const Tensor x({1, 2, 2, 2});
  BnParams p{{1, 1}, {0, 0}, {0, 0}, {1, 1}, 1e-5f};
  CHECK_THROWS_AS(batchnorm_infer(Tensor({1, 3, 2, 2}), p), ShapeError);
  BnParams neg = p;
  neg.running_var[1] = -1.0f;
  CHECK_THROWS_AS(neg.validate(), ConfigError);
  BnParams short_beta = p;
  short_beta.beta.pop_back();
  CHECK_THROWS_AS(short_beta.validate(), ConfigError);
  BnParams zero = p;
  zero.running_var[0] = 0.0f;
  zero.epsilon = 0.0f;
  CHECK_THROWS_AS(zero.validate(), ConfigError);
}

TEST_CASE("linear: identity and a hand dot product") {
  const Tensor x({1, 3}, {1, 2, 3});
  const Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  CHECK(linear(x, eye, {}) == x);
  const Tensor w({2, 3}, {1, 0, 0, 1, 1, 1});
  const std::vector<float> bias{0.0f, 1.0f};
  const Tensor y = linear(x, w, bias);
  CHECK(y[0] == 1.0f);
  CHECK(y[1] == 7.0f);
  CHECK_THROWS_AS(linear(Tensor({1, 4}), w, bias), ShapeError);
}

TEST_CASE("softmax") {
  const Tensor eq({1, 4}, 2.0f);
  const Tensor uniform = softmax(eq);
  for (float v : uniform.values()) CHECK(v == doctest::Approx(0.25));

  Rng rng(6);
  const Tensor z = random_tensor(rng, {3, 5}, -4.0, 4.0);
  Tensor shifted = z;
  for (float& v : shifted.values()) v += 1000.0f;
  const Tensor p = softmax(z), q = softmax(shifted);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - q[i]) <= 1e-4);
  for (std::size_t r = 0; r < 3; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(p[r * 5 + j] >= 0.0f);
      CHECK(p[r * 5 + j] <= 1.0f);
      s += p[r * 5 + j];
    }
    CHECK(std::abs(s - 1.0) <= 1e-6);
  }

  const Tensor two({1, 2}, {0.0f, static_cast<float>(std::log(3.0))});
  const Tensor pr = softmax(two);
  CHECK(pr[0] == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(pr[1] == doctest::Approx(0.75).epsilon(1e-6));

  const Tensor bad({1, 2}, {0.0f, std::numeric_limits<float>::quiet_NaN()});
  CHECK_THROWS_AS(softmax(bad), NumericError);
}

TEST_CASE("relu, maxpool, global average pool") {
  const Tensor r = relu(Tensor({3}, {-1, 0, 2}));
  CHECK(r == Tensor({3}, {0, 0, 2}));

  const Tensor m = maxpool2d(Tensor({1, 1, 2, 2}, {1, 2, 3, 4}), 2, 2);
  CHECK(m.shape() == Shape{1, 1, 1, 1});
  CHECK(m[0] == 4.0f);
  CHECK_THROWS_AS(maxpool2d(Tensor({1, 1, 2, 2}), 3, 1), ShapeError);

  const Tensor g = global_avgpool(Tensor({2, 3, 4, 4}, 0.7f));
  CHECK(g.shape() == Shape{2, 3});
  for (float v : g.values()) CHECK(v == doctest::Approx(0.7));
}

TEST_CASE("non-finite values are errors, not outputs") {
  Tensor x({1, 1, 2, 2}, 1.0f);
  x[2] = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(relu(x), NumericError);
  CHECK_THROWS_AS(conv2d(x, Tensor({1, 1, 1, 1}, 1.0f), {}, 1, 0), NumericError);
  const Tensor big({1, 1}, {3e38f});
  const Tensor w({1, 1}, {10.0f});
  CHECK_THROWS_AS(linear(big, w, {}), NumericError);
}

TEST_CASE("argmax ties go to the lowest index") {
  const Tensor t({2, 3}, {0.2f, 0.5f, 0.5f, 1.0f, 1.0f, 1.0f});
  CHECK(argmax_row(t, 0) == 1);
  CHECK(argmax_row(t, 1) == 0);
}

// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

#include "generators.hpp"

#include <cmath>
#include <string>

namespace ibdpsc::testing {

Tensor random_tensor(Rng& rng, Shape shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

BnParams random_bn(Rng& rng, std::size_t channels) {
  BnParams p;
  for (std::size_t c = 0; c < channels; ++c) {
    p.gamma.push_back(static_cast<float>(rng.uniform(0.5, 1.5)));
    p.beta.push_back(static_cast<float>(rng.uniform(-0.3, 0.3)));
    p.running_mean.push_back(static_cast<float>(rng.uniform(-0.3, 0.3)));
    p.running_var.push_back(static_cast<float>(rng.uniform(0.2, 2.0)));
  }
  p.epsilon = 1e-5f;
  return p;
}

namespace {

std::vector<float> random_vector(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return v;
}

Layer conv(Rng& rng, const std::string& name, std::size_t cin, std::size_t cout, std::size_t kernel,
           std::size_t padding) {
  const double scale = 1.7 / std::sqrt(static_cast<double>(cin * kernel * kernel));
  Conv2dLayer c;
  c.weight = random_tensor(rng, {cout, cin, kernel, kernel}, -scale, scale);
  if (rng.coin()) c.bias = random_vector(rng, cout, -0.1, 0.1);
  c.padding = padding;
  return {name, std::move(c)};
}

Layer bn(Rng& rng, const std::string& name, std::size_t channels) {
  return {name, BatchNormLayer{random_bn(rng, channels)}};
}

}  // namespace

ModelGraph random_model(Rng& rng) {
  const std::size_t cin = rng.between(1, 3);
  const std::size_t side = rng.between(4, 8);
  const std::size_t classes = rng.between(2, 5);
  const std::size_t width = rng.between(2, 4);
  const std::size_t k0 = rng.coin() ? 3 : 1;

  std::vector<Layer> layers;
  layers.push_back(conv(rng, "stem.conv", cin, width, k0, k0 / 2));
  layers.push_back(bn(rng, "stem.bn", width));
  layers.push_back({"stem.relu", ReluLayer{}});
  if (rng.coin()) layers.push_back({"stem.pool", MaxPoolLayer{2, 2}});

  const std::size_t blocks = rng.between(0, 2);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::string p = "block" + std::to_string(b);
    if (rng.coin()) {
      ResidualLayer r;
      if (rng.coin()) {
        r.skip.push_back(conv(rng, p + ".skip.conv", width, width, 1, 0));
        r.skip.push_back(bn(rng, p + ".skip.bn", width));
      }
      r.main.push_back(conv(rng, p + ".conv1", width, width, 3, 1));
      r.main.push_back(bn(rng, p + ".bn1", width));
      r.main.push_back({p + ".relu1", ReluLayer{}});
      r.main.push_back(conv(rng, p + ".conv2", width, width, 1, 0));
      r.main.push_back(bn(rng, p + ".bn2", width));
      layers.push_back({p, std::move(r)});
    } else {
      layers.push_back(conv(rng, p + ".conv", width, width, 3, 1));
      layers.push_back(bn(rng, p + ".bn", width));
    }
    layers.push_back({p + ".relu", ReluLayer{}});
  }
  layers.push_back({"pool", GlobalAvgPoolLayer{}});
  LinearLayer fc;
  fc.weight = random_tensor(rng, {classes, width}, -2.0, 2.0);
  fc.bias = random_vector(rng, classes, -0.2, 0.2);
  layers.push_back({"fc", std::move(fc)});
  return ModelGraph(std::move(layers), classes, {cin, side, side});
}

Tensor random_images(Rng& rng, const ModelGraph& graph, std::size_t n) {
  const auto& s = graph.input_shape();
  return random_tensor(rng, {n, s[0], s[1], s[2]}, 0.0, 1.0);
}

LabeledSet self_labeled_set(const ModelGraph& graph, Tensor images) {
  LabeledSet set;
  const auto probs = forward(graph, images).probabilities;
  for (std::size_t i = 0; i < images.dim(0); ++i) {
    set.labels.push_back(static_cast<std::uint32_t>(argmax_row(probs, i)));
  }
  set.images = std::move(images);
  set.class_count = graph.class_count();
  return set;
}

}  // namespace ibdpsc::testing

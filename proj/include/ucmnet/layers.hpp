/* Copyright 2026 The UCM-Net Engine Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/


#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ucmnet/conv.hpp"
#include "ucmnet/norm.hpp"
#include "ucmnet/ops.hpp"
#include "ucmnet/spatial.hpp"
#include "ucmnet/trace.hpp"

namespace ucm {

using Rng = std::mt19937_64;

enum class InitRule { fan_in_uniform, zeros, ones };

// Named, ordered tensors of a model. Learnable entries carry gradients;
// buffers (running statistics) are saved with the weights but never trained.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
    bool learnable = true;
    InitRule init = InitRule::zeros;
    std::size_t fan_in = 1;
  };

  Tensor<T> add_param(const std::string& name, const Shape& shape, InitRule init, std::size_t fan_in = 1) {
    return add(name, shape, true, init, fan_in);
  }
  Tensor<T> add_buffer(const std::string& name, const Shape& shape, InitRule init) {
    return add(name, shape, false, init, 1);
  }

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }

  const Entry* find(const std::string& name) const {
    for (const auto& e : entries_) {
      if (e.name == name) return &e;
    }
    return nullptr;
  }

  std::size_t learnable_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.learnable ? e.tensor.numel() : 0;
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_) e.tensor.clear_grad();
  }

 private:
  Tensor<T> add(const std::string& name, const Shape& shape, bool learnable, InitRule init, std::size_t fan_in) {
    if (find(name)) throw std::invalid_argument("duplicate parameter name " + name);
    // deterministic rules apply at once; random ones wait for init_params
    Tensor<T> t = Tensor<T>::full(shape, init == InitRule::ones ? T{1} : T{0});
    t.set_requires_grad(learnable);
    entries_.push_back({name, t, learnable, init, fan_in});
    return t;
  }

  std::vector<Entry> entries_;
};

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), drawn in store order from
// one stream; biases and betas zero, gammas one.
template <typename T>
void init_params(ParamStore<T>& store, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& e : store.entries()) {
    auto data = e.tensor.mutable_data();
    switch (e.init) {
      case InitRule::zeros:
        std::fill(data.begin(), data.end(), T{0});
        break;
      case InitRule::ones:
        std::fill(data.begin(), data.end(), T{1});
        break;
      case InitRule::fan_in_uniform: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(e.fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& v : data) v = static_cast<T>(dist(rng));
        break;
      }
    }
  }
}

// ---------------------------------------------------------------------------

template <typename T>
struct Conv2dLayer {
  std::string name;
  std::size_t in_channels = 0, out_channels = 0, kernel = 1, groups = 1;
  Tensor<T> weight, bias;

  Conv2dLayer() = default;
  Conv2dLayer(ParamStore<T>& store, std::string layer_name, std::size_t cin, std::size_t cout, std::size_t k,
              std::size_t grp = 1, bool with_bias = true)
      : name(std::move(layer_name)), in_channels(cin), out_channels(cout), kernel(k), groups(grp) {
    if (k % 2 == 0) throw std::invalid_argument(name + ": same-padding needs an odd kernel");
    if (grp == 0 || cin % grp || cout % grp) throw std::invalid_argument(name + ": channels not divisible by groups");
    const std::size_t fan_in = cin / grp * k * k;
    weight = store.add_param(name + ".weight", {cout, cin / grp, k, k}, InitRule::fan_in_uniform, fan_in);
    if (with_bias) bias = store.add_param(name + ".bias", {cout}, InitRule::zeros);
  }

  std::size_t param_count() const { return weight.numel() + (bias.defined() ? bias.numel() : 0); }

  Tensor<T> forward(const Tensor<T>& x) const {
    if (x.rank() != 4 || x.dim(1) != in_channels) {
      throw ShapeError(name + ": expected " + std::to_string(in_channels) + " input channels, got " +
                       to_string(x.shape()));
    }
    Tensor<T> y = conv2d(x, weight, bias, (kernel - 1) / 2, groups);
    if (tracing()) {
      const std::uint64_t macs = y.numel() * (in_channels / groups) * kernel * kernel;
      trace_cost({name, groups == 1 ? "conv2d" : "conv2d_grouped", y.shape(), param_count(), macs, macs, 0});
    }
    return y;
  }
};

// Kernel-2, stride-2 transposed convolution (learned 2x upsampling).
template <typename T>
struct ConvTranspose2xLayer {
  std::string name;
  std::size_t in_channels = 0, out_channels = 0;
  Tensor<T> weight, bias;

  ConvTranspose2xLayer() = default;
  ConvTranspose2xLayer(ParamStore<T>& store, std::string layer_name, std::size_t cin, std::size_t cout)
      : name(std::move(layer_name)), in_channels(cin), out_channels(cout) {
    weight = store.add_param(name + ".weight", {cin, cout, 2, 2}, InitRule::fan_in_uniform, cout * 4);
    bias = store.add_param(name + ".bias", {cout}, InitRule::zeros);
  }

  std::size_t param_count() const { return weight.numel() + bias.numel(); }

  Tensor<T> forward(const Tensor<T>& x) const {
    if (x.rank() != 4 || x.dim(1) != in_channels) {
      throw ShapeError(name + ": expected " + std::to_string(in_channels) + " input channels, got " +
                       to_string(x.shape()));
    }
    Tensor<T> y = conv_transpose2d(x, weight, bias);
    if (tracing()) {
      // op counters charge every output element with C_in * k^2 taps
      trace_cost({name, "conv_transpose2d", y.shape(), param_count(), y.numel() * in_channels,
                  y.numel() * in_channels * 4, 0});
    }
    return y;
  }
};

// y = x W^T + b over the trailing axis.
template <typename T>
struct LinearLayer {
  std::string name;
  std::size_t in_features = 0, out_features = 0;
  Tensor<T> weight, bias;

  LinearLayer() = default;
  LinearLayer(ParamStore<T>& store, std::string layer_name, std::size_t cin, std::size_t cout)
      : name(std::move(layer_name)), in_features(cin), out_features(cout) {
    weight = store.add_param(name + ".weight", {cout, cin}, InitRule::fan_in_uniform, cin);
    bias = store.add_param(name + ".bias", {cout}, InitRule::zeros);
  }

  std::size_t param_count() const { return weight.numel() + bias.numel(); }

  Tensor<T> forward(const Tensor<T>& x) const {
    if (x.rank() < 2 || x.shape().back() != in_features) {
      throw ShapeError(name + ": expected trailing width " + std::to_string(in_features) + ", got " +
                       to_string(x.shape()));
    }
    Tensor<T> y = add_bias(matmul(x, transpose(weight, 0, 1)), bias);
    if (tracing()) {
      const std::uint64_t macs = y.numel() * in_features;
      trace_cost({name, "linear", y.shape(), param_count(), macs, macs, 0});
    }
    return y;
  }
};

template <typename T>
struct LayerNormLayer {
  std::string name;
  std::size_t channels = 0, axis = 1;
  T eps{1e-5};
  Tensor<T> gamma, beta;

  LayerNormLayer() = default;
  LayerNormLayer(ParamStore<T>& store, std::string layer_name, std::size_t c, std::size_t norm_axis, T epsilon)
      : name(std::move(layer_name)), channels(c), axis(norm_axis), eps(epsilon) {
    gamma = store.add_param(name + ".weight", {c}, InitRule::ones);
    beta = store.add_param(name + ".bias", {c}, InitRule::zeros);
  }

  std::size_t param_count() const { return 2 * channels; }

  Tensor<T> forward(const Tensor<T>& x) const {
    Tensor<T> y = layer_norm(x, gamma, beta, axis, eps);
    if (tracing()) trace_cost({name, "layer_norm", y.shape(), param_count(), 0, 4 * y.numel(), 4 * y.numel()});
    return y;
  }
};

template <typename T>
struct BatchNormLayer {
  std::string name;
  std::size_t channels = 0, axis = 1;
  T momentum{0.1}, eps{1e-5};
  Tensor<T> gamma, beta, running_mean, running_var;

  BatchNormLayer() = default;
  BatchNormLayer(ParamStore<T>& store, std::string layer_name, std::size_t c, std::size_t norm_axis, T mom, T epsilon)
      : name(std::move(layer_name)), channels(c), axis(norm_axis), momentum(mom), eps(epsilon) {
    gamma = store.add_param(name + ".weight", {c}, InitRule::ones);
    beta = store.add_param(name + ".bias", {c}, InitRule::zeros);
    running_mean = store.add_buffer(name + ".running_mean", {c}, InitRule::zeros);
    running_var = store.add_buffer(name + ".running_var", {c}, InitRule::ones);
  }

  std::size_t param_count() const { return 2 * channels; }

  Tensor<T> forward(const Tensor<T>& x, bool training) {
    Tensor<T> y = batch_norm(x, gamma, beta, running_mean, running_var, axis, training, momentum, eps);
    if (tracing()) trace_cost({name, "batch_norm", y.shape(), param_count(), 0, 4 * y.numel(), 4 * y.numel()});
    return y;
  }
};

// Parameter-free ops that still show up in the per-layer cost report.
template <typename T>
Tensor<T> traced_leaky_relu(const std::string& name, const Tensor<T>& x, T slope) {
  Tensor<T> y = leaky_relu(x, slope);
  if (tracing()) trace_cost({name, "leaky_relu", y.shape(), 0, 0, 0, y.numel()});
  return y;
}

template <typename T>
Tensor<T> traced_relu(const std::string& name, const Tensor<T>& x) {
  Tensor<T> y = relu(x);
  if (tracing()) trace_cost({name, "relu", y.shape(), 0, 0, 0, y.numel()});
  return y;
}

template <typename T>
Tensor<T> traced_max_pool(const std::string& name, const Tensor<T>& x) {
  Tensor<T> y = max_pool2d(x);
  if (tracing()) trace_cost({name, "max_pool2d", y.shape(), 0, 0, 0, x.numel()});
  return y;
}

template <typename T>
Tensor<T> traced_upsample2x(const std::string& name, const Tensor<T>& x) {
  Tensor<T> y = upsample2x(x);
  if (tracing()) trace_cost({name, "upsample_bilinear", y.shape(), 0, 0, 0, 4 * y.numel()});
  return y;
}

template <typename T>
Tensor<T> traced_add(const std::string& name, const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> y = add(a, b);
  if (tracing()) trace_cost({name, "add", y.shape(), 0, 0, 0, y.numel()});
  return y;
}

}  // namespace ucm

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

#include "ucmnet/tensor.hpp"

namespace ucm {

namespace detail {

// [outer, C, inner] view of a tensor around one axis.
struct AxisView {
  std::size_t outer = 1, channels = 1, inner = 1;

  AxisView(const Shape& shape, std::size_t axis) {
    if (axis >= shape.size()) {
      throw ShapeError("axis " + std::to_string(axis) + " out of range for " + to_string(shape));
    }
    for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
    channels = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  }

  std::size_t index(std::size_t o, std::size_t c, std::size_t i) const { return (o * channels + c) * inner + i; }
};

template <typename T>
void check_affine(const char* op, const AxisView& v, const Tensor<T>& gamma, const Tensor<T>& beta) {
  if (gamma.numel() != v.channels || beta.numel() != v.channels) {
    throw ShapeError(std::string(op) + ": affine parameters of size " + std::to_string(gamma.numel()) +
                     " do not match normalized axis of size " + std::to_string(v.channels));
  }
}

}  // namespace detail

// Standardizes over one axis at every other position, then applies gamma/beta
// along that axis. Statistics use the biased variance.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, std::size_t axis, T eps) {
  const detail::AxisView v(x.shape(), axis);
  detail::check_affine("layer_norm", v, gamma, beta);
  const std::size_t rows = v.outer * v.inner;
  std::vector<T> xhat(x.numel());
  std::vector<T> rstd(rows);
  std::vector<T> out_data(x.numel());
  const auto px = x.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      double mu = 0.0;
      for (std::size_t c = 0; c < v.channels; ++c) mu += px[v.index(o, c, i)];
      mu /= static_cast<double>(v.channels);
      double var = 0.0;
      for (std::size_t c = 0; c < v.channels; ++c) {
        const double d = px[v.index(o, c, i)] - mu;
        var += d * d;
      }
      var /= static_cast<double>(v.channels);
      const T r = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      rstd[o * v.inner + i] = r;
      for (std::size_t c = 0; c < v.channels; ++c) {
        const std::size_t k = v.index(o, c, i);
        xhat[k] = static_cast<T>(px[k] - mu) * r;
        out_data[k] = gamma[c] * xhat[k] + beta[c];
      }
    }
  }
  Tensor<T> out(x.shape(), std::move(out_data));
  auto ix = x.impl_ptr();
  auto ig = gamma.impl_ptr();
  auto ib = beta.impl_ptr();
  return detail::record<T>("layer_norm", {&x, &gamma, &beta}, out,
                           [ix, ig, ib, v, xhat = std::move(xhat), rstd = std::move(rstd)](std::span<const T> g) {
    auto dx = detail::grad_sink(ix);
    auto dg = detail::grad_sink(ig);
    auto db = detail::grad_sink(ib);
    const T inv_c = T{1} / static_cast<T>(v.channels);
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t i = 0; i < v.inner; ++i) {
        T sum_dxhat{0}, sum_dxhat_xhat{0};
        for (std::size_t c = 0; c < v.channels; ++c) {
          const std::size_t k = v.index(o, c, i);
          const T dxh = g[k] * ig->data[c];
          sum_dxhat += dxh;
          sum_dxhat_xhat += dxh * xhat[k];
          if (!dg.empty()) dg[c] += g[k] * xhat[k];
          if (!db.empty()) db[c] += g[k];
        }
        if (dx.empty()) continue;
        const T r = rstd[o * v.inner + i];
        for (std::size_t c = 0; c < v.channels; ++c) {
          const std::size_t k = v.index(o, c, i);
          const T dxh = g[k] * ig->data[c];
          dx[k] += r * (dxh - inv_c * sum_dxhat - xhat[k] * inv_c * sum_dxhat_xhat);
        }
      }
    }
  });
}

// Batch statistics per channel over every non-channel position. Running
// stats are updated in training mode with the unbiased batch variance.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, Tensor<T>& running_mean,
                     Tensor<T>& running_var, std::size_t axis, bool training, T momentum, T eps) {
  const detail::AxisView v(x.shape(), axis);
  detail::check_affine("batch_norm", v, gamma, beta);
  if (running_mean.numel() != v.channels || running_var.numel() != v.channels) {
    throw ShapeError("batch_norm: running statistics do not match " + std::to_string(v.channels) + " channels");
  }
  const std::size_t count = v.outer * v.inner;
  std::vector<T> mean_c(v.channels), rstd(v.channels);
  const auto px = x.data();
  for (std::size_t c = 0; c < v.channels; ++c) {
    if (!training) {
      mean_c[c] = running_mean[c];
      rstd[c] = T{1} / std::sqrt(running_var[c] + eps);
      continue;
    }
    double mu = 0.0;
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t i = 0; i < v.inner; ++i) mu += px[v.index(o, c, i)];
    }
    mu /= static_cast<double>(count);
    double var = 0.0;
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t i = 0; i < v.inner; ++i) {
        const double d = px[v.index(o, c, i)] - mu;
        var += d * d;
      }
    }
    const double unbiased = count > 1 ? var / static_cast<double>(count - 1) : var;
    var /= static_cast<double>(count);
    mean_c[c] = static_cast<T>(mu);
    rstd[c] = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
    auto rm = running_mean.mutable_data();
    auto rv = running_var.mutable_data();
    rm[c] = (T{1} - momentum) * rm[c] + momentum * static_cast<T>(mu);
    rv[c] = (T{1} - momentum) * rv[c] + momentum * static_cast<T>(unbiased);
  }
  std::vector<T> xhat(x.numel()), out_data(x.numel());
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t c = 0; c < v.channels; ++c) {
      for (std::size_t i = 0; i < v.inner; ++i) {
        const std::size_t k = v.index(o, c, i);
        xhat[k] = (px[k] - mean_c[c]) * rstd[c];
        out_data[k] = gamma[c] * xhat[k] + beta[c];
      }
    }
  }
  Tensor<T> out(x.shape(), std::move(out_data));
  auto ix = x.impl_ptr();
  auto ig = gamma.impl_ptr();
  auto ib = beta.impl_ptr();
  return detail::record<T>("batch_norm", {&x, &gamma, &beta}, out,
                           [ix, ig, ib, v, training, xhat = std::move(xhat), rstd = std::move(rstd)](
                               std::span<const T> g) {
    auto dx = detail::grad_sink(ix);
    auto dg = detail::grad_sink(ig);
    auto db = detail::grad_sink(ib);
    const T inv_n = T{1} / static_cast<T>(v.outer * v.inner);
    for (std::size_t c = 0; c < v.channels; ++c) {
      T sum_g{0}, sum_g_xhat{0};
      for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t i = 0; i < v.inner; ++i) {
          const std::size_t k = v.index(o, c, i);
          sum_g += g[k];
          sum_g_xhat += g[k] * xhat[k];
        }
      }
      if (!dg.empty()) dg[c] += sum_g_xhat;
      if (!db.empty()) db[c] += sum_g;
      if (dx.empty()) continue;
      const T scale_c = ig->data[c] * rstd[c];
      for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t i = 0; i < v.inner; ++i) {
          const std::size_t k = v.index(o, c, i);
          // eval mode is a fixed affine map of x
          dx[k] += training ? scale_c * (g[k] - inv_n * sum_g - xhat[k] * inv_n * sum_g_xhat) : scale_c * g[k];
        }
      }
    }
  });
}

}  // namespace ucm

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

#include <algorithm>

#include "ucmnet/tensor.hpp"

namespace ucm {

// 2x2 max pooling, stride 2. Ties route the gradient to the first maximum
// in row-major window order.
template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& x) {
  if (x.rank() != 4) throw ShapeError("max_pool2d expects [B,C,H,W], got " + to_string(x.shape()));
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("max_pool2d needs even spatial dims, got " + to_string(x.shape()));
  }
  const std::size_t oh = h / 2, ow = w / 2;
  std::vector<T> out_data(planes * oh * ow);
  std::vector<std::size_t> argmax(out_data.size());
  const auto px = x.data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        const std::size_t base = (p * h + 2 * i) * w + 2 * j;
        std::size_t best = base;
        for (std::size_t cand : {base + 1, base + w, base + w + 1}) {
          if (px[cand] > px[best]) best = cand;
        }
        const std::size_t o = (p * oh + i) * ow + j;
        out_data[o] = px[best];
        argmax[o] = best;
      }
    }
  }
  Tensor<T> out({x.dim(0), x.dim(1), oh, ow}, std::move(out_data));
  auto ix = x.impl_ptr();
  return detail::record<T>("max_pool2d", {&x}, out, [ix, argmax = std::move(argmax)](std::span<const T> g) {
    auto dx = detail::grad_sink(ix);
    for (std::size_t o = 0; o < g.size(); ++o) dx[argmax[o]] += g[o];
  });
}

namespace detail {

// Source taps for one output coordinate, half-pixel centers, clamped at the
// low edge (align_corners = false).
struct LinearTap {
  std::size_t lo, hi;
  double w_hi;
};

inline std::vector<LinearTap> linear_taps(std::size_t in, std::size_t out) {
  std::vector<LinearTap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    auto lo = static_cast<std::size_t>(src);
    if (lo > in - 1) lo = in - 1;
    const std::size_t hi = std::min(lo + 1, in - 1);
    taps[o] = {lo, hi, src - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace detail

// Bilinear resize of the two trailing axes to (out_h, out_w).
template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
  if (x.rank() != 4 || out_h == 0 || out_w == 0) {
    throw ShapeError("upsample_bilinear: bad input " + to_string(x.shape()) + " or target size");
  }
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const auto ty = detail::linear_taps(h, out_h);
  const auto tx = detail::linear_taps(w, out_w);
  std::vector<T> out_data(planes * out_h * out_w);
  const auto px = x.data();
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = px.data() + p * h * w;
    T* dst = out_data.data() + p * out_h * out_w;
    for (std::size_t i = 0; i < out_h; ++i) {
      const T wy = static_cast<T>(ty[i].w_hi);
      const T* r0 = src + ty[i].lo * w;
      const T* r1 = src + ty[i].hi * w;
      for (std::size_t j = 0; j < out_w; ++j) {
        const T wx = static_cast<T>(tx[j].w_hi);
        const T top = (T{1} - wx) * r0[tx[j].lo] + wx * r0[tx[j].hi];
        const T bottom = (T{1} - wx) * r1[tx[j].lo] + wx * r1[tx[j].hi];
        dst[i * out_w + j] = (T{1} - wy) * top + wy * bottom;
      }
    }
  }
  Shape out_shape{x.dim(0), x.dim(1), out_h, out_w};
  Tensor<T> out(out_shape, std::move(out_data));
  auto ix = x.impl_ptr();
  return detail::record<T>("upsample_bilinear", {&x}, out, [ix, ty, tx, planes, h, w](std::span<const T> g) {
    auto dx = detail::grad_sink(ix);
    const std::size_t out_h = ty.size(), out_w = tx.size();
    for (std::size_t p = 0; p < planes; ++p) {
      T* d = dx.data() + p * h * w;
      const T* go = g.data() + p * out_h * out_w;
      for (std::size_t i = 0; i < out_h; ++i) {
        const T wy = static_cast<T>(ty[i].w_hi);
        for (std::size_t j = 0; j < out_w; ++j) {
          const T wx = static_cast<T>(tx[j].w_hi);
          const T v = go[i * out_w + j];
          d[ty[i].lo * w + tx[j].lo] += (T{1} - wy) * (T{1} - wx) * v;
          d[ty[i].lo * w + tx[j].hi] += (T{1} - wy) * wx * v;
          d[ty[i].hi * w + tx[j].lo] += wy * (T{1} - wx) * v;
          d[ty[i].hi * w + tx[j].hi] += wy * wx * v;
        }
      }
    }
  });
}

template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x) {
  if (x.rank() != 4) throw ShapeError("upsample2x expects [B,C,H,W], got " + to_string(x.shape()));
  return upsample_bilinear(x, 2 * x.dim(2), 2 * x.dim(3));
}

}  // namespace ucm

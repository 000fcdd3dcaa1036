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

// Shape algebra and elementwise primitives. Every op is deterministic: loops
// run in row-major order with a fixed accumulation sequence.

#pragma once

#include <cmath>

#include "ucmnet/tensor.hpp"

namespace ucm {

template <typename T>
Tensor<T> reshape(const Tensor<T>& t, const Shape& new_shape) {
  if (numel(new_shape) != t.numel()) {
    throw ShapeError("cannot reshape " + to_string(t.shape()) + " to " + to_string(new_shape));
  }
  Tensor<T> out(new_shape, std::vector<T>(t.data().begin(), t.data().end()));
  auto in = t.impl_ptr();
  return detail::record<T>("reshape", {&t}, out, [in](std::span<const T> g) {
    auto dst = detail::grad_sink(in);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  });
}

namespace detail {

inline std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

// out_index -> in_index map for swapping two axes.
inline std::vector<std::size_t> transpose_map(const Shape& in_shape, std::size_t a, std::size_t b) {
  Shape out_shape = in_shape;
  std::swap(out_shape[a], out_shape[b]);
  const auto in_strides = strides_of(in_shape);
  auto perm_strides = in_strides;
  std::swap(perm_strides[a], perm_strides[b]);
  const std::size_t n = numel(in_shape);
  std::vector<std::size_t> map(n);
  std::vector<std::size_t> idx(out_shape.size(), 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t src = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) src += idx[k] * perm_strides[k];
    map[flat] = src;
    for (std::size_t k = idx.size(); k-- > 0;) {
      if (++idx[k] < out_shape[k]) break;
      idx[k] = 0;
    }
  }
  return map;
}

}  // namespace detail

template <typename T>
Tensor<T> transpose(const Tensor<T>& t, std::size_t dim_a, std::size_t dim_b) {
  if (dim_a >= t.rank() || dim_b >= t.rank()) {
    throw ShapeError("transpose axes (" + std::to_string(dim_a) + ", " + std::to_string(dim_b) +
                     ") out of range for " + to_string(t.shape()));
  }
  Shape out_shape = t.shape();
  std::swap(out_shape[dim_a], out_shape[dim_b]);
  auto map = std::make_shared<std::vector<std::size_t>>(detail::transpose_map(t.shape(), dim_a, dim_b));
  std::vector<T> out_data(t.numel());
  const auto src = t.data();
  for (std::size_t i = 0; i < out_data.size(); ++i) out_data[i] = src[(*map)[i]];
  Tensor<T> out(std::move(out_shape), std::move(out_data));
  auto in = t.impl_ptr();
  return detail::record<T>("transpose", {&t}, out, [in, map](std::span<const T> g) {
    auto dst = detail::grad_sink(in);
    for (std::size_t i = 0; i < g.size(); ++i) dst[(*map)[i]] += g[i];
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  std::vector<T> out_data(a.numel());
  for (std::size_t i = 0; i < out_data.size(); ++i) out_data[i] = a[i] + b[i];
  Tensor<T> out(a.shape(), std::move(out_data));
  auto ia = a.impl_ptr();
  auto ib = b.impl_ptr();
  return detail::record<T>("add", {&a, &b}, out, [ia, ib](std::span<const T> g) {
    for (const auto& in : {ia, ib}) {
      auto dst = detail::grad_sink(in);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
    }
  });
}

// x[..., C] + bias[C]; the only broadcast the engine supports.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  const std::size_t c = x.shape().back();
  if (bias.rank() != 1 || bias.numel() != c) {
    throw ShapeError("add_bias: bias " + to_string(bias.shape()) + " does not match trailing axis of " +
                     to_string(x.shape()));
  }
  std::vector<T> out_data(x.numel());
  for (std::size_t i = 0; i < out_data.size(); ++i) out_data[i] = x[i] + bias[i % c];
  Tensor<T> out(x.shape(), std::move(out_data));
  auto ix = x.impl_ptr();
  auto ib = bias.impl_ptr();
  return detail::record<T>("add_bias", {&x, &bias}, out, [ix, ib, c](std::span<const T> g) {
    if (auto dx = detail::grad_sink(ix); !dx.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
    }
    if (auto db = detail::grad_sink(ib); !db.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) db[i % c] += g[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mul: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  std::vector<T> out_data(a.numel());
  for (std::size_t i = 0; i < out_data.size(); ++i) out_data[i] = a[i] * b[i];
  Tensor<T> out(a.shape(), std::move(out_data));
  auto ia = a.impl_ptr();
  auto ib = b.impl_ptr();
  return detail::record<T>("mul", {&a, &b}, out, [ia, ib](std::span<const T> g) {
    if (auto da = detail::grad_sink(ia); !da.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * ib->data[i];
    }
    if (auto db = detail::grad_sink(ib); !db.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * ia->data[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  std::vector<T> out_data(x.numel());
  for (std::size_t i = 0; i < out_data.size(); ++i) out_data[i] = x[i] * factor;
  Tensor<T> out(x.shape(), std::move(out_data));
  auto ix = x.impl_ptr();
  return detail::record<T>("scale", {&x}, out, [ix, factor](std::span<const T> g) {
    auto dx = detail::grad_sink(ix);
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * factor;
  });
}

// Sum of all elements as a [1] tensor.
template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc{0};
  for (auto v : x.data()) acc += v;
  auto ix = x.impl_ptr();
  return detail::record<T>("sum", {&x}, Tensor<T>::scalar(acc), [ix](std::span<const T> g) {
    auto dx = detail::grad_sink(ix);
    for (auto& d : dx) d += g[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T{1} / static_cast<T>(x.numel()));
}

// a[..., M, K] x b[K, N] -> [..., M, N]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() < 2 || b.rank() != 2 || a.shape().back() != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + to_string(a.shape()) + " and " + to_string(b.shape()));
  }
  const std::size_t m = a.dim(a.rank() - 2);
  const std::size_t k = b.dim(0);
  const std::size_t n = b.dim(1);
  const std::size_t batch = a.numel() / (m * k);
  Shape out_shape = a.shape();
  out_shape.back() = n;
  std::vector<T> out_data(batch * m * n, T{0});
  const auto pa = a.data();
  const auto pb = b.data();
  for (std::size_t r = 0; r < batch * m; ++r) {
    T* row = out_data.data() + r * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T av = pa[r * k + kk];
      const T* brow = pb.data() + kk * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  Tensor<T> out(std::move(out_shape), std::move(out_data));
  auto ia = a.impl_ptr();
  auto ib = b.impl_ptr();
  return detail::record<T>("matmul", {&a, &b}, out, [ia, ib, batch, m, k, n](std::span<const T> g) {
    if (auto da = detail::grad_sink(ia); !da.empty()) {
      for (std::size_t r = 0; r < batch * m; ++r) {
        for (std::size_t kk = 0; kk < k; ++kk) {
          T acc{0};
          for (std::size_t j = 0; j < n; ++j) acc += g[r * n + j] * ib->data[kk * n + j];
          da[r * k + kk] += acc;
        }
      }
    }
    if (auto db = detail::grad_sink(ib); !db.empty()) {
      for (std::size_t r = 0; r < batch * m; ++r) {
        for (std::size_t kk = 0; kk < k; ++kk) {
          const T av = ia->data[r * k + kk];
          for (std::size_t j = 0; j < n; ++j) db[kk * n + j] += av * g[r * n + j];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  std::vector<T> out_data(x.numel());
  for (std::size_t i = 0; i < out_data.size(); ++i) out_data[i] = T{1} / (T{1} + std::exp(-x[i]));
  Tensor<T> out(x.shape(), std::move(out_data));
  auto ix = x.impl_ptr();
  auto io = out.impl_ptr();
  std::weak_ptr<TensorImpl<T>> weak_out = io;
  return detail::record<T>("sigmoid", {&x}, out, [ix, weak_out](std::span<const T> g) {
    auto o = weak_out.lock();
    auto dx = detail::grad_sink(ix);
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * o->data[i] * (T{1} - o->data[i]);
  });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  if (!(slope > T{0} && slope < T{1})) throw std::invalid_argument("leaky_relu slope must lie in (0, 1)");
  std::vector<T> out_data(x.numel());
  for (std::size_t i = 0; i < out_data.size(); ++i) out_data[i] = x[i] >= T{0} ? x[i] : slope * x[i];
  Tensor<T> out(x.shape(), std::move(out_data));
  auto ix = x.impl_ptr();
  return detail::record<T>("leaky_relu", {&x}, out, [ix, slope](std::span<const T> g) {
    auto dx = detail::grad_sink(ix);
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += ix->data[i] >= T{0} ? g[i] : slope * g[i];
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out_data(x.numel());
  for (std::size_t i = 0; i < out_data.size(); ++i) out_data[i] = x[i] > T{0} ? x[i] : T{0};
  Tensor<T> out(x.shape(), std::move(out_data));
  auto ix = x.impl_ptr();
  return detail::record<T>("relu", {&x}, out, [ix](std::span<const T> g) {
    auto dx = detail::grad_sink(ix);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (ix->data[i] > T{0}) dx[i] += g[i];
    }
  });
}

// Concatenation along axis 1 of [B, C_i, ...] tensors.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() < 2 || a.rank() != b.rank() || a.dim(0) != b.dim(0)) {
    throw ShapeError("concat: incompatible shapes " + to_string(a.shape()) + " and " + to_string(b.shape()));
  }
  for (std::size_t k = 2; k < a.rank(); ++k) {
    if (a.dim(k) != b.dim(k)) {
      throw ShapeError("concat: incompatible shapes " + to_string(a.shape()) + " and " + to_string(b.shape()));
    }
  }
  const std::size_t batch = a.dim(0);
  const std::size_t block_a = a.numel() / batch;
  const std::size_t block_b = b.numel() / batch;
  Shape out_shape = a.shape();
  out_shape[1] += b.dim(1);
  std::vector<T> out_data;
  out_data.reserve(a.numel() + b.numel());
  for (std::size_t n = 0; n < batch; ++n) {
    out_data.insert(out_data.end(), a.data().begin() + n * block_a, a.data().begin() + (n + 1) * block_a);
    out_data.insert(out_data.end(), b.data().begin() + n * block_b, b.data().begin() + (n + 1) * block_b);
  }
  Tensor<T> out(std::move(out_shape), std::move(out_data));
  auto ia = a.impl_ptr();
  auto ib = b.impl_ptr();
  return detail::record<T>("concat", {&a, &b}, out, [ia, ib, batch, block_a, block_b](std::span<const T> g) {
    auto da = detail::grad_sink(ia);
    auto db = detail::grad_sink(ib);
    for (std::size_t n = 0; n < batch; ++n) {
      const T* src = g.data() + n * (block_a + block_b);
      if (!da.empty()) {
        for (std::size_t i = 0; i < block_a; ++i) da[n * block_a + i] += src[i];
      }
      if (!db.empty()) {
        for (std::size_t i = 0; i < block_b; ++i) db[n * block_b + i] += src[block_a + i];
      }
    }
  });
}

// [B, C, H, W] <-> [B, H*W, C] helpers used by the token/conv layout switch.
template <typename T>
Tensor<T> flatten_to_tokens(const Tensor<T>& x) {
  const auto& s = x.shape();
  if (s.size() != 4) throw ShapeError("flatten_to_tokens expects [B,C,H,W], got " + to_string(s));
  return transpose(reshape(x, {s[0], s[1], s[2] * s[3]}), 1, 2);
}

template <typename T>
Tensor<T> tokens_to_map(const Tensor<T>& x, std::size_t height, std::size_t width) {
  const auto& s = x.shape();
  if (s.size() != 3 || s[1] != height * width) {
    throw ShapeError("tokens_to_map: " + to_string(s) + " is not [B," + std::to_string(height * width) + ",C]");
  }
  return reshape(transpose(x, 1, 2), {s[0], s[2], height, width});
}

}  // namespace ucm

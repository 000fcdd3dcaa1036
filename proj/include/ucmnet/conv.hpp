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

#include "ucmnet/tensor.hpp"

namespace ucm {

namespace detail {

struct ConvGeometry {
  std::size_t batch, in_channels, out_channels, groups, kernel, padding;
  std::size_t in_h, in_w, out_h, out_w;

  std::size_t in_per_group() const { return in_channels / groups; }
  std::size_t out_per_group() const { return out_channels / groups; }
};

// Visits every (input pixel, weight tap, output pixel) triple of a stride-1
// cross-correlation, innermost loop over contiguous output columns.
template <typename Fn>
void for_each_conv_row(const ConvGeometry& g, Fn&& fn) {
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      const std::size_t grp = co / g.out_per_group();
      for (std::size_t cl = 0; cl < g.in_per_group(); ++cl) {
        const std::size_t ci = grp * g.in_per_group() + cl;
        for (std::size_t kh = 0; kh < g.kernel; ++kh) {
          for (std::size_t kw = 0; kw < g.kernel; ++kw) {
            const std::size_t widx = ((co * g.in_per_group() + cl) * g.kernel + kh) * g.kernel + kw;
            const std::ptrdiff_t dw = static_cast<std::ptrdiff_t>(kw) - pad;
            const std::size_t ow_begin = dw < 0 ? static_cast<std::size_t>(-dw) : 0;
            const std::size_t ow_end = std::min<std::ptrdiff_t>(
                static_cast<std::ptrdiff_t>(g.out_w), static_cast<std::ptrdiff_t>(g.in_w) - dw);
            if (ow_end <= ow_begin) continue;
            for (std::size_t oh = 0; oh < g.out_h; ++oh) {
              const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh + kh) - pad;
              if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
              const std::size_t in_row = ((n * g.in_channels + ci) * g.in_h + static_cast<std::size_t>(ih)) * g.in_w;
              const std::size_t out_row = ((n * g.out_channels + co) * g.out_h + oh) * g.out_w;
              fn(widx, in_row + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(ow_begin) + dw),
                 out_row + ow_begin, ow_end - ow_begin);
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

// Stride-1 2-D cross-correlation. weight: [C_out, C_in/groups, k, k];
// bias: [C_out] or undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, std::size_t padding,
                 std::size_t groups = 1) {
  if (x.rank() != 4 || weight.rank() != 4) {
    throw ShapeError("conv2d expects 4-D input and weight, got " + to_string(x.shape()) + " and " +
                     to_string(weight.shape()));
  }
  const std::size_t k = weight.dim(2);
  if (weight.dim(3) != k || groups == 0 || x.dim(1) % groups != 0 || weight.dim(0) % groups != 0 ||
      weight.dim(1) * groups != x.dim(1)) {
    throw ShapeError("conv2d: input " + to_string(x.shape()) + " incompatible with weight " +
                     to_string(weight.shape()) + " (groups=" + std::to_string(groups) + ")");
  }
  if (bias.defined() && (bias.rank() != 1 || bias.numel() != weight.dim(0))) {
    throw ShapeError("conv2d: bias " + to_string(bias.shape()) + " does not match weight " + to_string(weight.shape()));
  }
  if (x.dim(2) + 2 * padding < k || x.dim(3) + 2 * padding < k) {
    throw ShapeError("conv2d: kernel larger than padded input " + to_string(x.shape()));
  }
  detail::ConvGeometry g{x.dim(0), x.dim(1), weight.dim(0), groups, k, padding, x.dim(2), x.dim(3),
                         x.dim(2) + 2 * padding - k + 1, x.dim(3) + 2 * padding - k + 1};

  std::vector<T> out_data(g.batch * g.out_channels * g.out_h * g.out_w, T{0});
  if (bias.defined()) {
    const std::size_t plane = g.out_h * g.out_w;
    for (std::size_t n = 0; n < g.batch; ++n) {
      for (std::size_t co = 0; co < g.out_channels; ++co) {
        std::fill_n(out_data.begin() + (n * g.out_channels + co) * plane, plane, bias[co]);
      }
    }
  }
  const T* px = x.data().data();
  const T* pw = weight.data().data();
  detail::for_each_conv_row(g, [&](std::size_t widx, std::size_t in_off, std::size_t out_off, std::size_t len) {
    const T wv = pw[widx];
    const T* src = px + in_off;
    T* dst = out_data.data() + out_off;
    for (std::size_t i = 0; i < len; ++i) dst[i] += wv * src[i];
  });

  Tensor<T> out({g.batch, g.out_channels, g.out_h, g.out_w}, std::move(out_data));
  auto ix = x.impl_ptr();
  auto iw = weight.impl_ptr();
  auto ib = bias.defined() ? bias.impl_ptr() : ImplPtr<T>{};
  return detail::record<T>("conv2d", {&x, &weight, bias.defined() ? &bias : nullptr}, out,
                           [ix, iw, ib, g](std::span<const T> grad) {
    auto dx = detail::grad_sink(ix);
    auto dw = detail::grad_sink(iw);
    if (!dx.empty() || !dw.empty()) {
      detail::for_each_conv_row(g, [&](std::size_t widx, std::size_t in_off, std::size_t out_off, std::size_t len) {
        const T* go = grad.data() + out_off;
        if (!dx.empty()) {
          const T wv = iw->data[widx];
          T* dst = dx.data() + in_off;
          for (std::size_t i = 0; i < len; ++i) dst[i] += wv * go[i];
        }
        if (!dw.empty()) {
          const T* src = ix->data.data() + in_off;
          T acc{0};
          for (std::size_t i = 0; i < len; ++i) acc += src[i] * go[i];
          dw[widx] += acc;
        }
      });
    }
    if (auto db = detail::grad_sink(ib); !db.empty()) {
      const std::size_t plane = g.out_h * g.out_w;
      for (std::size_t n = 0; n < g.batch; ++n) {
        for (std::size_t co = 0; co < g.out_channels; ++co) {
          const T* go = grad.data() + (n * g.out_channels + co) * plane;
          T acc{0};
          for (std::size_t i = 0; i < plane; ++i) acc += go[i];
          db[co] += acc;
        }
      }
    }
  });
}

// Transposed convolution with kernel == stride (non-overlapping taps), as
// used for 2x learned upsampling. weight: [C_in, C_out, k, k]; bias: [C_out].
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (x.rank() != 4 || weight.rank() != 4 || weight.dim(0) != x.dim(1) || weight.dim(2) != weight.dim(3)) {
    throw ShapeError("conv_transpose2d: input " + to_string(x.shape()) + " incompatible with weight " +
                     to_string(weight.shape()));
  }
  const std::size_t batch = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t cout = weight.dim(1), k = weight.dim(2);
  if (bias.defined() && bias.numel() != cout) {
    throw ShapeError("conv_transpose2d: bias " + to_string(bias.shape()) + " does not match C_out=" +
                     std::to_string(cout));
  }
  const std::size_t oh = h * k, ow = w * k;
  std::vector<T> out_data(batch * cout * oh * ow, T{0});
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t co = 0; co < cout; ++co) {
      T* plane = out_data.data() + (n * cout + co) * oh * ow;
      if (bias.defined()) std::fill_n(plane, oh * ow, bias[co]);
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const T* src = x.data().data() + (n * cin + ci) * h * w;
        for (std::size_t kh = 0; kh < k; ++kh) {
          for (std::size_t kw = 0; kw < k; ++kw) {
            const T wv = weight[((ci * cout + co) * k + kh) * k + kw];
            for (std::size_t i = 0; i < h; ++i) {
              T* dst = plane + (i * k + kh) * ow + kw;
              for (std::size_t j = 0; j < w; ++j) dst[j * k] += wv * src[i * w + j];
            }
          }
        }
      }
    }
  }
  Tensor<T> out({batch, cout, oh, ow}, std::move(out_data));
  auto ix = x.impl_ptr();
  auto iw = weight.impl_ptr();
  auto ib = bias.defined() ? bias.impl_ptr() : ImplPtr<T>{};
  return detail::record<T>("conv_transpose2d", {&x, &weight, bias.defined() ? &bias : nullptr}, out,
                           [=](std::span<const T> grad) {
    auto dx = detail::grad_sink(ix);
    auto dw = detail::grad_sink(iw);
    auto db = detail::grad_sink(ib);
    for (std::size_t n = 0; n < batch; ++n) {
      for (std::size_t co = 0; co < cout; ++co) {
        const T* gplane = grad.data() + (n * cout + co) * oh * ow;
        if (!db.empty()) {
          T acc{0};
          for (std::size_t i = 0; i < oh * ow; ++i) acc += gplane[i];
          db[co] += acc;
        }
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const std::size_t in_off = (n * cin + ci) * h * w;
          for (std::size_t kh = 0; kh < k; ++kh) {
            for (std::size_t kw = 0; kw < k; ++kw) {
              const std::size_t widx = ((ci * cout + co) * k + kh) * k + kw;
              T wacc{0};
              for (std::size_t i = 0; i < h; ++i) {
                const T* go = gplane + (i * k + kh) * ow + kw;
                for (std::size_t j = 0; j < w; ++j) {
                  if (!dx.empty()) dx[in_off + i * w + j] += iw->data[widx] * go[j * k];
                  wacc += ix->data[in_off + i * w + j] * go[j * k];
                }
              }
              if (!dw.empty()) dw[widx] += wacc;
            }
          }
        }
      }
    }
  });
}

}  // namespace ucm

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

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "ucmnet/ops.hpp"
#include "ucmnet/spatial.hpp"

namespace ucm {

enum class BaseLoss { bce_dice, bce_squared_dice };

inline BaseLoss parse_base_loss(const std::string& s) {
  if (s == "bce_dice") return BaseLoss::bce_dice;
  if (s == "bce_squared_dice") return BaseLoss::bce_squared_dice;
  throw std::invalid_argument("unknown base_loss '" + s + "'");
}

inline std::string to_string(BaseLoss b) { return b == BaseLoss::bce_dice ? "bce_dice" : "bce_squared_dice"; }

struct LossConfig {
  double smooth = 1.0;
  std::array<double, 5> stage_weights{0.1, 0.2, 0.3, 0.4, 0.5};  // deepest stage first
  BaseLoss base_loss = BaseLoss::bce_squared_dice;
  double clamp_eps = 1e-7;
};

namespace detail {

template <typename T>
void check_pair(const char* op, const Tensor<T>& p, const Tensor<T>& y) {
  if (p.shape() != y.shape()) {
    throw ShapeError(std::string(op) + ": prediction " + to_string(p.shape()) + " vs target " + to_string(y.shape()));
  }
}

// Per-image sums for the Dice family; axis 0 indexes images.
struct OverlapSums {
  std::vector<double> inter, pred, target;
};

template <typename T>
OverlapSums overlap_sums(const Tensor<T>& p, const Tensor<T>& y) {
  const std::size_t images = p.dim(0), per = p.numel() / images;
  OverlapSums s{std::vector<double>(images, 0.0), std::vector<double>(images, 0.0), std::vector<double>(images, 0.0)};
  for (std::size_t b = 0; b < images; ++b) {
    for (std::size_t i = b * per; i < (b + 1) * per; ++i) {
      s.inter[b] += static_cast<double>(p[i]) * y[i];
      s.pred[b] += p[i];
      s.target[b] += y[i];
    }
  }
  return s;
}

}  // namespace detail

// Mean binary cross-entropy on probabilities clamped to [eps, 1-eps]. The
// clamp is treated as identity in the backward pass so saturated pixels keep
// a gradient.
template <typename T>
Tensor<T> bce(const Tensor<T>& p, const Tensor<T>& y, double eps = 1e-7) {
  detail::check_pair("bce", p, y);
  const std::size_t n = p.numel();
  auto clamp = [eps](T v) { return std::min(std::max(static_cast<double>(v), eps), 1.0 - eps); };
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pc = clamp(p[i]);
    acc += y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc);
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(-acc / static_cast<double>(n)));
  auto ip = p.impl_ptr();
  auto iy = y.impl_ptr();
  return detail::record<T>("bce", {&p}, out, [ip, iy, n, clamp](std::span<const T> g) {
    auto dp = detail::grad_sink(ip);
    const double scale = g[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double pc = clamp(ip->data[i]), yv = iy->data[i];
      dp[i] += static_cast<T>(-scale * (yv / pc - (1.0 - yv) / (1.0 - pc)));
    }
  });
}

// 1 - (2*sum(p*y) + s) / (sum(p) + sum(y) + s), per image, averaged over axis 0.
template <typename T>
Tensor<T> dice_loss(const Tensor<T>& p, const Tensor<T>& y, double smooth = 1.0) {
  detail::check_pair("dice_loss", p, y);
  const auto s = detail::overlap_sums(p, y);
  const std::size_t images = p.dim(0), per = p.numel() / images;
  double acc = 0.0;
  for (std::size_t b = 0; b < images; ++b) {
    acc += 1.0 - (2.0 * s.inter[b] + smooth) / (s.pred[b] + s.target[b] + smooth);
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(images)));
  auto ip = p.impl_ptr();
  auto iy = y.impl_ptr();
  return detail::record<T>("dice_loss", {&p}, out, [ip, iy, s, images, per, smooth](std::span<const T> g) {
    auto dp = detail::grad_sink(ip);
    for (std::size_t b = 0; b < images; ++b) {
      const double num = 2.0 * s.inter[b] + smooth;
      const double den = s.pred[b] + s.target[b] + smooth;
      const double scale = g[0] / static_cast<double>(images);
      for (std::size_t i = b * per; i < (b + 1) * per; ++i) {
        dp[i] += static_cast<T>(-scale * (2.0 * iy->data[i] * den - num) / (den * den));
      }
    }
  });
}

// 1 - (2*sum(p*y)^2 + s) / (sum(p)^2 + sum(y)^2 + s), per image, averaged.
template <typename T>
Tensor<T> squared_dice_loss(const Tensor<T>& p, const Tensor<T>& y, double smooth = 1.0) {
  detail::check_pair("squared_dice_loss", p, y);
  const auto s = detail::overlap_sums(p, y);
  const std::size_t images = p.dim(0), per = p.numel() / images;
  double acc = 0.0;
  for (std::size_t b = 0; b < images; ++b) {
    const double in = s.inter[b], ps = s.pred[b], ys = s.target[b];
    acc += 1.0 - (2.0 * in * in + smooth) / (ps * ps + ys * ys + smooth);
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(images)));
  auto ip = p.impl_ptr();
  auto iy = y.impl_ptr();
  return detail::record<T>("squared_dice_loss", {&p}, out, [ip, iy, s, images, per, smooth](std::span<const T> g) {
    auto dp = detail::grad_sink(ip);
    for (std::size_t b = 0; b < images; ++b) {
      const double in = s.inter[b], ps = s.pred[b], ys = s.target[b];
      const double num = 2.0 * in * in + smooth;
      const double den = ps * ps + ys * ys + smooth;
      const double scale = g[0] / static_cast<double>(images);
      for (std::size_t i = b * per; i < (b + 1) * per; ++i) {
        dp[i] += static_cast<T>(-scale * (4.0 * in * iy->data[i] * den - num * 2.0 * ps) / (den * den));
      }
    }
  });
}

template <typename T>
Tensor<T> base_loss(const Tensor<T>& p, const Tensor<T>& y, const LossConfig& cfg) {
  Tensor<T> overlap = cfg.base_loss == BaseLoss::bce_dice ? dice_loss(p, y, cfg.smooth)
                                                          : squared_dice_loss(p, y, cfg.smooth);
  return add(bce(p, y, cfg.clamp_eps), overlap);
}

// Output loss plus lambda-weighted stage losses. Stage logits are resized
// to the target resolution before the sigmoid.
template <typename T>
Tensor<T> group_loss(const Tensor<T>& out_logits, const std::vector<Tensor<T>>& stage_logits, const Tensor<T>& target,
                     const LossConfig& cfg) {
  if (!stage_logits.empty() && stage_logits.size() != cfg.stage_weights.size()) {
    throw ShapeError("group_loss: expected " + std::to_string(cfg.stage_weights.size()) + " stage outputs, got " +
                     std::to_string(stage_logits.size()));
  }
  Tensor<T> total = base_loss(sigmoid(out_logits), target, cfg);
  const std::size_t h = target.dim(2), w = target.dim(3);
  for (std::size_t i = 0; i < stage_logits.size(); ++i) {
    const Tensor<T> p = sigmoid(upsample_bilinear(stage_logits[i], h, w));
    total = add(total, scale(base_loss(p, target, cfg), static_cast<T>(cfg.stage_weights[i])));
  }
  return total;
}

}  // namespace ucm

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

#include <cstdint>
#include <iomanip>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ucmnet/tensor.hpp"

namespace ucm {

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
};

// Binarizes pred at `threshold` (ties positive); target is positive when >= 0.5.
template <typename P, typename Y>
ConfusionCounts confusion(std::span<const P> pred, std::span<const Y> target, double threshold = 0.5) {
  if (pred.size() != target.size()) {
    throw ShapeError("confusion: " + std::to_string(pred.size()) + " predictions vs " +
                     std::to_string(target.size()) + " targets");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = static_cast<double>(pred[i]) >= threshold;
    const bool y = static_cast<double>(target[i]) >= 0.5;
    if (p && y) ++c.tp;
    else if (p) ++c.fp;
    else if (y) ++c.fn;
    else ++c.tn;
  }
  return c;
}

// An image with no positives in either mask scores IoU = Dice = 1.
inline double iou(const ConfusionCounts& c) {
  const std::uint64_t den = c.tp + c.fp + c.fn;
  return den == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(den);
}

inline double dice_tp(const ConfusionCounts& c) {
  const std::uint64_t den = 2 * c.tp + c.fp + c.fn;
  return den == 0 ? 1.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(den);
}

inline double dice_smooth(const ConfusionCounts& c, double smooth) {
  return (2.0 * static_cast<double>(c.tp) + smooth) / (static_cast<double>(2 * c.tp + c.fp + c.fn) + smooth);
}

struct MetricsReport {
  std::string split = "test";
  std::vector<ConfusionCounts> per_image;
  ConfusionCounts pooled;
  double miou = 0, mdice = 0, mdice_tp = 0, miou_star = 0, mdice_star = 0;
};

inline MetricsReport metrics_report(const std::vector<ConfusionCounts>& per_image, double smooth = 1.0,
                                    std::string split = "test") {
  if (per_image.empty()) throw std::invalid_argument("metrics_report: no images");
  MetricsReport r;
  r.split = std::move(split);
  r.per_image = per_image;
  for (const auto& c : per_image) {
    r.pooled += c;
    r.miou += iou(c);
    r.mdice += dice_smooth(c, smooth);
    r.mdice_tp += dice_tp(c);
  }
  const auto n = static_cast<double>(per_image.size());
  r.miou /= n;
  r.mdice /= n;
  r.mdice_tp /= n;
  r.miou_star = iou(r.pooled);
  r.mdice_star = dice_tp(r.pooled);
  return r;
}

inline void write_metrics_csv(std::ostream& os, const std::vector<MetricsReport>& reports) {
  os << "split,n_images,mIoU,mDice,mIoU_star,mDice_star\n";
  os << std::setprecision(10);
  for (const auto& r : reports) {
    os << r.split << ',' << r.per_image.size() << ',' << r.miou << ',' << r.mdice << ',' << r.miou_star << ','
       << r.mdice_star << '\n';
  }
}

}  // namespace ucm

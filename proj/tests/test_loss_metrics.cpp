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


#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "ucmnet/loss.hpp"
#include "ucmnet/metrics.hpp"

namespace {

using D = ucm::Tensor<double>;

D t(const ucm::Shape& s, std::vector<double> v) { return D(s, std::move(v)); }

TEST(Bce, HandComputedCases) {
  EXPECT_NEAR(ucm::bce(t({1, 1, 1, 2}, {0.9, 0.2}), t({1, 1, 1, 2}, {1, 0})).item(),
              (-std::log(0.9) - std::log(0.8)) / 2, 1e-12);
  EXPECT_NEAR(ucm::bce(t({1, 1, 1, 2}, {0.9, 0.2}), t({1, 1, 1, 2}, {1, 0})).item(), 0.16425, 1e-5);
  EXPECT_NEAR(ucm::bce(D::full({2, 1, 3, 3}, 0.5), D::ones({2, 1, 3, 3})).item(), std::log(2.0), 1e-12);
}

TEST(Bce, ClampKeepsSaturatedPredictionsFinite) {
  const double v = ucm::bce(t({1, 1, 1, 2}, {0.0, 1.0}), t({1, 1, 1, 2}, {1, 0})).item();
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, -std::log(1e-7), 1e-6);
}

TEST(Dice, HandComputedCases) {
  const D p = t({1, 1, 1, 2}, {1, 0}), y = t({1, 1, 1, 2}, {1, 1});
  EXPECT_NEAR(ucm::dice_loss(p, y, 1.0).item(), 0.25, 1e-12);
  EXPECT_NEAR(ucm::squared_dice_loss(p, y, 1.0).item(), 0.5, 1e-12);
  EXPECT_GT(ucm::squared_dice_loss(p, y, 1.0).item(), ucm::dice_loss(p, y, 1.0).item());
}

TEST(Dice, PerfectPredictionIsNearZero) {
  const D y = t({2, 1, 2, 2}, {1, 0, 1, 1, 0, 0, 1, 0});
  EXPECT_NEAR(ucm::dice_loss(y, y).item(), 0.0, 1e-12);
  EXPECT_NEAR(ucm::squared_dice_loss(y, y).item(), 0.0, 1e-12);
  ucm::LossConfig cfg;
  EXPECT_LT(ucm::base_loss(y, y, cfg).item(), 1e-6);
}

TEST(Dice, AveragedPerImage) {
  // Image 0 perfect, image 1 as the hand case above.
  const D p = t({2, 1, 1, 2}, {1, 1, 1, 0}), y = t({2, 1, 1, 2}, {1, 1, 1, 1});
  EXPECT_NEAR(ucm::dice_loss(p, y, 1.0).item(), 0.25 / 2, 1e-12);
}

TEST(GroupLoss, WeightedSumOfEqualComponents) {
  ucm::LossConfig cfg;
  const double logit = 0.3;
  const D target = t({1, 1, 4, 4}, {1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 1, 0, 0, 0, 0, 1});
  const D out = D::full({1, 1, 4, 4}, logit);
  std::vector<D> stages;
  for (std::size_t s : {1u, 1u, 2u, 2u, 4u}) stages.push_back(D::full({1, 1, s, s}, logit));
  const double single = ucm::base_loss(ucm::sigmoid(out), target, cfg).item();
  EXPECT_NEAR(ucm::group_loss(out, stages, target, cfg).item(), 2.5 * single, 1e-9);
  EXPECT_NEAR(ucm::group_loss(out, {}, target, cfg).item(), single, 1e-12);
  stages.pop_back();
  EXPECT_THROW(ucm::group_loss(out, stages, target, cfg), ucm::ShapeError);
}

TEST(LossConfig, BaseLossNames) {
  EXPECT_EQ(ucm::parse_base_loss("bce_dice"), ucm::BaseLoss::bce_dice);
  EXPECT_EQ(ucm::to_string(ucm::parse_base_loss("bce_squared_dice")), "bce_squared_dice");
  EXPECT_THROW(ucm::parse_base_loss("focal"), std::invalid_argument);
}

TEST(Loss, ShapeMismatchRejected) {
  EXPECT_THROW(ucm::bce(D::ones({1, 1, 2, 2}), D::ones({1, 1, 2, 3})), ucm::ShapeError);
}

ucm::ConfusionCounts counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  ucm::ConfusionCounts c;
  c.tp = tp;
  c.fp = fp;
  c.fn = fn;
  return c;
}

TEST(Confusion, ThresholdAndTies) {
  const std::vector<float> p{0.5f, 0.49f, 0.9f, 0.1f};
  const std::vector<float> y{1, 1, 0, 0};
  const auto c = ucm::confusion<float, float>(p, y, 0.5);
  EXPECT_EQ(c.tp, 1u);
  EXPECT_EQ(c.fn, 1u);
  EXPECT_EQ(c.fp, 1u);
  EXPECT_EQ(c.tn, 1u);
}

TEST(Metrics, WorkedExample) {
  const auto r = ucm::metrics_report({counts(2, 1, 1), counts(3, 0, 1)});
  EXPECT_DOUBLE_EQ(r.miou, 0.625);
  EXPECT_DOUBLE_EQ(r.miou_star, 0.625);
  EXPECT_DOUBLE_EQ(r.mdice_tp, (4.0 / 6 + 6.0 / 7) / 2);
  EXPECT_DOUBLE_EQ(r.mdice, (5.0 / 7 + 7.0 / 8) / 2);
  EXPECT_DOUBLE_EQ(r.mdice_star, 10.0 / 13);
}

TEST(Metrics, EmptyImagesCountAsPerfect) {
  EXPECT_EQ(ucm::iou(counts(0, 0, 0)), 1.0);
  EXPECT_EQ(ucm::dice_tp(counts(0, 0, 0)), 1.0);
  EXPECT_EQ(ucm::dice_smooth(counts(0, 0, 0), 1.0), 1.0);
  EXPECT_THROW(ucm::metrics_report({}), std::invalid_argument);
}

// Independent pixel-counting oracle, written without ConfusionCounts.
struct Oracle {
  double miou, mdice, miou_star, mdice_star;
};

Oracle brute_force(const std::vector<std::vector<float>>& preds, const std::vector<std::vector<float>>& targets) {
  double iou_sum = 0, dice_sum = 0, inter_all = 0, union_all = 0, psum_all = 0, ysum_all = 0;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    double inter = 0, uni = 0, ps = 0, ys = 0;
    for (std::size_t i = 0; i < preds[k].size(); ++i) {
      const bool a = preds[k][i] >= 0.5f, b = targets[k][i] >= 0.5f;
      inter += a && b;
      uni += a || b;
      ps += a;
      ys += b;
    }
    iou_sum += uni == 0 ? 1.0 : inter / uni;
    dice_sum += (2 * inter + 1) / (ps + ys + 1);
    inter_all += inter;
    union_all += uni;
    psum_all += ps;
    ysum_all += ys;
  }
  const double n = static_cast<double>(preds.size());
  return {iou_sum / n, dice_sum / n, inter_all / union_all, 2 * inter_all / (psum_all + ysum_all)};
}

TEST(Metrics, MatchesBruteForceOracle) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<float> u(0, 1);
  std::vector<std::vector<float>> preds(100), targets(100);
  std::vector<ucm::ConfusionCounts> per_image;
  for (std::size_t k = 0; k < 100; ++k) {
    const float density = u(rng);
    for (int i = 0; i < 64; ++i) {
      preds[k].push_back(u(rng));
      targets[k].push_back(u(rng) < density ? 1.0f : 0.0f);
    }
    per_image.push_back(ucm::confusion<float, float>(preds[k], targets[k]));
  }
  const auto r = ucm::metrics_report(per_image);
  const auto o = brute_force(preds, targets);
  EXPECT_NEAR(r.miou, o.miou, 1e-12);
  EXPECT_NEAR(r.mdice, o.mdice, 1e-12);
  EXPECT_NEAR(r.miou_star, o.miou_star, 1e-12);
  EXPECT_NEAR(r.mdice_star, o.mdice_star, 1e-12);
}

TEST(Metrics, InvariantToImageOrder) {
  std::vector<ucm::ConfusionCounts> v{counts(2, 1, 1), counts(3, 0, 1), counts(0, 4, 0), counts(7, 2, 5)};
  const auto a = ucm::metrics_report(v);
  std::reverse(v.begin(), v.end());
  const auto b = ucm::metrics_report(v);
  EXPECT_NEAR(a.miou, b.miou, 1e-15);
  EXPECT_EQ(a.miou_star, b.miou_star);
  EXPECT_EQ(a.mdice_star, b.mdice_star);
}

TEST(Metrics, CsvColumns) {
  std::ostringstream os;
  ucm::write_metrics_csv(os, {ucm::metrics_report({counts(2, 1, 1), counts(3, 0, 1)})});
  std::istringstream is(os.str());
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  EXPECT_EQ(header, "split,n_images,mIoU,mDice,mIoU_star,mDice_star");
  EXPECT_EQ(row.substr(0, 13), "test,2,0.625,");
}

}  // namespace

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


#include <cmath>

#include <gtest/gtest.h>

#include "support/gradcheck.hpp"
#include "ucmnet/model.hpp"

namespace {

using ucm::Tensor;
using F = Tensor<float>;

std::unique_ptr<ucm::SegmentationModel<float>> make(ucm::NetworkConfig cfg, std::uint64_t seed = 1) {
  auto m = ucm::build_variant<float>(cfg);
  ucm::init_params(m->params(), seed);
  return m;
}

F random_input(const ucm::Shape& s, std::uint64_t seed) {
  ucm::Rng rng(seed);
  std::uniform_real_distribution<float> u(0, 1);
  std::vector<float> d(ucm::numel(s));
  for (auto& v : d) v = u(rng);
  return F(s, std::move(d));
}

TEST(UcmBlock, ShapeContract) {
  ucm::ParamStore<float> store;
  ucm::UcmBlock<float> block(store, "b", 8, ucm::NetworkConfig{});
  ucm::init_params(store, 3);
  ucm::NoGradGuard ng;
  EXPECT_EQ(block.forward_tokens(F::zeros({2, 8, 64, 64}), true).shape(), (ucm::Shape{2, 4096, 8}));
  EXPECT_THROW(block.forward_tokens(F::zeros({2, 4, 8, 8}), true), ucm::ShapeError);
}

TEST(UcmBlock, ZeroWeightsGivePureResidual) {
  ucm::ParamStore<float> store;
  ucm::UcmBlock<float> block(store, "b", 4, ucm::NetworkConfig{});
  for (auto& e : store.entries()) {
    if (e.learnable) std::fill(e.tensor.mutable_data().begin(), e.tensor.mutable_data().end(), 0.0f);
  }
  const F x = random_input({2, 4, 4, 4}, 5);
  ucm::NoGradGuard ng;
  const F y = block.forward_tokens(x, true);
  const F ref = ucm::flatten_to_tokens(x);
  for (std::size_t i = 0; i < y.numel(); ++i) EXPECT_EQ(y[i], ref[i]);
}

TEST(UcmBlock, ParamCountFormula) {
  for (std::size_t c : {8u, 16u, 64u}) {
    ucm::ParamStore<float> store;
    ucm::UcmBlock<float> block(store, "b", c, ucm::NetworkConfig{});
    EXPECT_EQ(store.learnable_count(), 2 * c * c + 40 * c);
  }
}

TEST(UcmNet, OutputAndStageShapes) {
  auto m = make({});
  ucm::NoGradGuard ng;
  const auto out = m->forward(F::zeros({2, 3, 256, 256}));
  EXPECT_EQ(out.logits.shape(), (ucm::Shape{2, 1, 256, 256}));
  ASSERT_EQ(out.stage_logits.size(), 5u);
  const std::size_t sizes[5] = {8, 16, 32, 64, 128};
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(out.stage_logits[i].shape(), (ucm::Shape{2, 1, sizes[i], sizes[i]}));
  }
}

TEST(UcmNet, DeepSupervisionFlag) {
  ucm::NetworkConfig with, without;
  without.deep_supervision = false;
  auto a = make(with, 4), b = make(without, 4);
  ucm::NoGradGuard ng;
  const F x = random_input({1, 3, 64, 64}, 2);
  a->set_training(false);
  b->set_training(false);
  const auto oa = a->forward(x), ob = b->forward(x);
  EXPECT_TRUE(ob.stage_logits.empty());
  EXPECT_EQ(ob.logits.shape(), oa.logits.shape());
  EXPECT_EQ(b->params().learnable_count(), a->params().learnable_count() - (9 + 17 + 25 + 33 + 49));
}

TEST(UcmNet, ShapeRoundTripForMultiplesOf32) {
  auto m = make({});
  m->set_training(false);
  ucm::NoGradGuard ng;
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{32, 32}, {64, 96}, {128, 32}}) {
    EXPECT_EQ(m->forward(F::zeros({3, 3, h, w})).logits.shape(), (ucm::Shape{3, 1, h, w}));
  }
  EXPECT_THROW(m->forward(F::zeros({1, 3, 48, 64})), ucm::ShapeError);
  EXPECT_THROW(m->forward(F::zeros({1, 1, 64, 64})), ucm::ShapeError);
}

TEST(UcmNet, EvalForwardIsDeterministic) {
  auto m = make({});
  m->set_training(false);
  const F x = random_input({2, 3, 64, 64}, 8);
  ucm::NoGradGuard ng;
  const auto a = m->forward(x), b = m->forward(x);
  for (std::size_t i = 0; i < a.logits.numel(); ++i) ASSERT_EQ(a.logits[i], b.logits[i]);
}

TEST(UcmNet, ResidualHealthWithZeroedBlocks) {
  auto m = make({});
  for (auto& e : m->params().entries()) {
    if (e.learnable && e.name.find(".ucm.") != std::string::npos) {
      std::fill(e.tensor.mutable_data().begin(), e.tensor.mutable_data().end(), 0.0f);
    }
  }
  F x = random_input({2, 3, 64, 64}, 9);
  x.set_requires_grad(true);
  const auto out = m->forward(x);
  for (auto v : out.logits.data()) ASSERT_TRUE(std::isfinite(v));
  ucm::backward(ucm::sum(out.logits));
  double norm = 0;
  for (auto g : x.grad()) norm += std::abs(g);
  EXPECT_GT(norm, 0.0);
}

TEST(ParamCount, ExactAndAdditive) {
  for (auto kind : {ucm::BlockKind::variant_a_doubleconv, ucm::BlockKind::variant_b_conv1x1,
                    ucm::BlockKind::variant_c_ucm}) {
    ucm::NetworkConfig cfg;
    cfg.block_kind = kind;
    auto m = make(cfg);
    std::size_t walked = 0;
    for (const auto& e : m->params().entries()) {
      if (e.learnable) walked += e.tensor.numel();
    }
    EXPECT_EQ(walked, ucm::expected_param_count(cfg));
    EXPECT_EQ(m->params().learnable_count(), walked);
  }
  ucm::NetworkConfig c;
  EXPECT_EQ(ucm::expected_param_count(c), 49894u);
  c.block_kind = ucm::BlockKind::variant_b_conv1x1;
  EXPECT_EQ(ucm::expected_param_count(c), 148157u);
  c.block_kind = ucm::BlockKind::variant_a_doubleconv;
  EXPECT_EQ(ucm::expected_param_count(c), 248509u);
  ucm::NetworkConfig dense;
  dense.ucm_conv = ucm::UcmConv::dense1x1;
  EXPECT_EQ(make(dense)->params().learnable_count(), ucm::expected_param_count(dense));
}

TEST(BuildVariant, UnknownVariantRejected) {
  EXPECT_THROW(ucm::parse_block_kind("variant_d"), std::invalid_argument);
  EXPECT_EQ(ucm::parse_block_kind("B"), ucm::BlockKind::variant_b_conv1x1);
  ucm::NetworkConfig bad;
  bad.input_size = 100;
  EXPECT_THROW(ucm::build_variant<float>(bad), std::invalid_argument);
}

TEST(Variants, ForwardShapes) {
  for (auto kind : {ucm::BlockKind::variant_a_doubleconv, ucm::BlockKind::variant_b_conv1x1}) {
    ucm::NetworkConfig cfg;
    cfg.block_kind = kind;
    auto m = make(cfg);
    ucm::NoGradGuard ng;
    const auto out = m->forward(F::zeros({2, 3, 64, 64}));
    EXPECT_EQ(out.logits.shape(), (ucm::Shape{2, 1, 64, 64}));
    EXPECT_TRUE(out.stage_logits.empty());
  }
}

// End-to-end check of the assembled graph: gradient of a scalar of the full
// network w.r.t. a handful of parameters, in double precision. The network
// holds thousands of max-pool and leaky-relu kinks, so the step is small
// enough that a perturbation does not cross one.
TEST(UcmNet, WholeNetworkGradientMatchesFiniteDifferences) {
  ucm::NetworkConfig cfg;
  cfg.input_size = 32;
  cfg.stage_channels = {4, 6, 8, 8, 12, 12};
  auto model = ucm::build_variant<double>(cfg);
  ucm::init_params(model->params(), 21);
  ucm::Rng rng(4);
  const auto x = ucm::testing::random_tensor(rng, {2, 3, 32, 32});
  std::vector<Tensor<double>> inputs;
  for (const char* name : {"enc1.conv.weight", "enc3.ucm.fc1.weight", "enc6.ucm.bn.weight", "dec3.ucm.conv2.weight",
                           "dec3.head.bias", "final.weight"}) {
    inputs.push_back(model->params().find(name)->tensor);
  }
  auto f = [&]() {
    const auto out = model->forward(x);
    return ucm::add(ucm::sum(out.logits), ucm::sum(out.stage_logits[2]));
  };
  EXPECT_LT(ucm::testing::gradcheck(f, inputs, rng, 1e-7), ucm::testing::kTolerance);
}

}  // namespace

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


#include <set>

#include <gtest/gtest.h>

#include "support/gradcheck.hpp"
#include "ucmnet/ops.hpp"

namespace {

using ucm::Tensor;
using F = Tensor<float>;
using Dt = Tensor<double>;

std::vector<float> iota(std::size_t n) {
  std::vector<float> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<float>(i);
  return v;
}

TEST(Tensor, ConstructionValidatesShapeAndLength) {
  EXPECT_THROW(F({2, 0}, {}), ucm::ShapeError);
  EXPECT_THROW(F({2, 3}, iota(5)), ucm::ShapeError);
  const F t({2, 3}, iota(6));
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_FALSE(t.requires_grad());
  EXPECT_FALSE(t.has_grad());
}

TEST(Reshape, PreservesElementOrder) {
  const F t({2, 8, 4, 4}, iota(256));
  const F r = ucm::reshape(t, {2, 8, 16});
  EXPECT_EQ(r.shape(), (ucm::Shape{2, 8, 16}));
  for (std::size_t i = 0; i < 256; ++i) EXPECT_EQ(r[i], t[i]);
  const F same = ucm::reshape(t, t.shape());
  EXPECT_EQ(same.shape(), t.shape());
}

TEST(Reshape, RejectsElementCountChange) {
  const F t({2, 3}, iota(6));
  EXPECT_THROW(ucm::reshape(t, {4, 2}), ucm::ShapeError);
}

TEST(Transpose, IndexMap) {
  const F t({1, 2, 3}, iota(6));
  const F r = ucm::transpose(t, 1, 2);
  EXPECT_EQ(r.shape(), (ucm::Shape{1, 3, 2}));
  EXPECT_EQ(r[2 * 2 + 1], 5.0f);  // element (0,2,1)
  const F back = ucm::transpose(r, 1, 2);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(back[i], t[i]);
  const F same = ucm::transpose(t, 0, 0);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(same[i], t[i]);
  EXPECT_THROW(ucm::transpose(t, 0, 3), ucm::ShapeError);
}

TEST(Add, ElementwiseAndGradient) {
  F a({2}, {1, 2});
  F b({2}, {3, 4});
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  const F c = ucm::add(a, b);
  EXPECT_EQ(c[0], 4.0f);
  EXPECT_EQ(c[1], 6.0f);
  ucm::backward(ucm::sum(c));
  EXPECT_EQ(a.grad()[0], 1.0f);
  EXPECT_EQ(a.grad()[1], 1.0f);
  EXPECT_EQ(b.grad()[1], 1.0f);
  EXPECT_THROW(ucm::add(a, F({3}, {1, 2, 3})), ucm::ShapeError);
  const F z = ucm::add(a, F::zeros({2}));
  EXPECT_EQ(z[0], 1.0f);
}

TEST(Matmul, HandCases) {
  const F a({2, 2}, {1, 2, 3, 4});
  const F eye({2, 2}, {1, 0, 0, 1});
  const F r = ucm::matmul(a, eye);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(r[i], a[i]);
  const F row({1, 2}, {1, 2});
  const F col({2, 1}, {3, 4});
  EXPECT_EQ(ucm::matmul(row, col).item(), 11.0f);
  const F batch({2, 1, 2}, {1, 2, 3, 4});
  EXPECT_EQ(ucm::matmul(batch, eye).shape(), (ucm::Shape{2, 1, 2}));
  EXPECT_THROW(ucm::matmul(a, F({3, 1}, {1, 2, 3})), ucm::ShapeError);
}

TEST(Backward, LinearAndQuadratic) {
  F x({2}, {1, -2});
  x.set_requires_grad(true);
  const F w({2}, {0.5f, 3.0f});
  ucm::backward(ucm::sum(ucm::mul(w, x)));
  EXPECT_EQ(x.grad()[0], 0.5f);
  EXPECT_EQ(x.grad()[1], 3.0f);
  x.clear_grad();
  ucm::backward(ucm::sum(ucm::mul(x, x)));
  EXPECT_EQ(x.grad()[0], 2.0f);
  EXPECT_EQ(x.grad()[1], -4.0f);
}

TEST(Backward, Errors) {
  F x({2}, {1, 2});
  x.set_requires_grad(true);
  const F y = ucm::scale(x, 2.0f);
  EXPECT_THROW(ucm::backward(y), ucm::AutogradError);  // not scalar
  const F loss = ucm::sum(y);
  ucm::backward(loss);
  EXPECT_THROW(ucm::backward(loss), ucm::AutogradError);  // tape consumed
  ucm::active_tape<float>().clear();
  EXPECT_THROW(ucm::backward(F::scalar(1.0f)), ucm::AutogradError);  // empty tape
}

TEST(Backward, IndependentSubgraphsConcatenate) {
  F a({3}, {1, 2, 3});
  F b({2}, {-1, 4});
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  ucm::backward(ucm::add(ucm::sum(ucm::mul(a, a)), ucm::sum(ucm::scale(b, 3.0f))));
  const std::vector<float> ga(a.grad().begin(), a.grad().end()), gb(b.grad().begin(), b.grad().end());
  a.clear_grad();
  b.clear_grad();
  ucm::backward(ucm::sum(ucm::mul(a, a)));
  ucm::backward(ucm::sum(ucm::scale(b, 3.0f)));
  EXPECT_EQ(ga, std::vector<float>(a.grad().begin(), a.grad().end()));
  EXPECT_EQ(gb, std::vector<float>(b.grad().begin(), b.grad().end()));
}

TEST(Backward, ReshapeAndTransposeRoundTripGradients) {
  Dt x({2, 3, 4}, std::vector<double>(24, 0.0));
  for (std::size_t i = 0; i < 24; ++i) x.mutable_data()[i] = 0.1 * static_cast<double>(i);
  x.set_requires_grad(true);
  const Dt w({2, 3, 4}, std::vector<double>(x.data().begin(), x.data().end()));
  const Dt y = ucm::transpose(ucm::transpose(ucm::reshape(ucm::reshape(x, {6, 4}), {2, 3, 4}), 0, 2), 0, 2);
  ucm::backward(ucm::sum(ucm::mul(y, w)));
  for (std::size_t i = 0; i < 24; ++i) EXPECT_EQ(x.grad()[i], w[i]);
}

TEST(NoGrad, RecordsNothing) {
  F x({2}, {1, 2});
  x.set_requires_grad(true);
  ucm::active_tape<float>().clear();
  {
    ucm::NoGradGuard guard;
    const F y = ucm::sum(ucm::mul(x, x));
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE(ucm::active_tape<float>().empty());
}

TEST(Determinism, IdenticalInputsBitwiseIdentical) {
  ucm::Rng rng(3);
  const auto a = ucm::testing::random_tensor(rng, {3, 5, 4});
  const auto b = ucm::testing::random_tensor(rng, {4, 6});
  const auto r1 = ucm::matmul(a, b), r2 = ucm::matmul(a, b);
  for (std::size_t i = 0; i < r1.numel(); ++i) EXPECT_EQ(r1[i], r2[i]);
}

// Finite-difference oracle over the primitive ops (layers and losses are
// checked in their own suites).
TEST(GradCheck, PrimitiveOps) {
  const std::set<std::string> primitives{"reshape", "transpose", "add", "add_bias", "mul", "scale", "sum",
                                         "mean", "matmul", "sigmoid", "concat_channels", "flatten_to_tokens"};
  for (const auto& op : ucm::testing::gradcheck_catalogue()) {
    if (!primitives.count(op.name)) continue;
    ucm::Rng rng(ucm::derive_seed(11, op.name));
    for (int k = 0; k < 30; ++k) {
      auto c = op.make(rng);
      EXPECT_LT(ucm::testing::gradcheck(c.f, c.inputs, rng), ucm::testing::kTolerance) << op.name << " case " << k;
    }
  }
}

}  // namespace

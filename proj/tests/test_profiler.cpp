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


#include <sstream>

#include <gtest/gtest.h>

#include "ucmnet/profiler.hpp"

namespace {

using F = ucm::Tensor<float>;

ucm::LayerCost trace_conv(std::size_t cin, std::size_t cout, std::size_t k, std::size_t hw) {
  ucm::ParamStore<float> store;
  ucm::Conv2dLayer<float> conv(store, "c", cin, cout, k);
  ucm::NoGradGuard ng;
  ucm::CostTrace trace;
  conv.forward(F::zeros({1, cin, hw, hw}));
  EXPECT_EQ(trace.entries().size(), 1u);
  return trace.entries().at(0);
}

TEST(LayerCost, ConvClosedForm) {
  const auto c = trace_conv(8, 16, 1, 4);
  EXPECT_EQ(c.params, 144u);
  const auto d = trace_conv(8, 8, 1, 64);
  EXPECT_EQ(d.macs, 262144u);
  EXPECT_EQ(d.counted_ops, 262144u);
  EXPECT_EQ(trace_conv(8, 8, 3, 64).macs, 64u * 64 * 8 * 8 * 9);
  EXPECT_EQ(trace_conv(8, 8, 1, 128).macs, 4 * d.macs);
}

TEST(LayerCost, NormsAreElementwiseOnly) {
  ucm::ParamStore<float> store;
  ucm::LayerNormLayer<float> ln(store, "ln", 8, 1, 1e-5);
  ucm::NoGradGuard ng;
  ucm::CostTrace trace;
  ln.forward(F::ones({2, 8, 4, 4}));
  ASSERT_EQ(trace.entries().size(), 1u);
  EXPECT_EQ(trace.entries()[0].macs, 0u);
  EXPECT_EQ(trace.entries()[0].elementwise, 4u * 256);
  EXPECT_EQ(trace.entries()[0].params, 16u);
}

TEST(LayerCost, NoTraceOutsideScope) {
  EXPECT_FALSE(ucm::tracing());
  {
    ucm::CostTrace t;
    EXPECT_TRUE(ucm::tracing());
  }
  EXPECT_FALSE(ucm::tracing());
}

std::unique_ptr<ucm::SegmentationModel<float>> model(ucm::BlockKind kind = ucm::BlockKind::variant_c_ucm) {
  ucm::NetworkConfig cfg;
  cfg.block_kind = kind;
  auto m = ucm::build_variant<float>(cfg);
  ucm::init_params(m->params(), 1);
  return m;
}

TEST(CostReport, TotalsEqualSums) {
  auto m = model();
  const auto r = ucm::count_flops(*m, {1, 3, 256, 256});
  std::uint64_t p = 0, macs = 0, ops = 0;
  for (const auto& e : r.per_layer) {
    p += e.params;
    macs += e.macs;
    ops += e.counted_ops;
  }
  EXPECT_EQ(r.total_params, p);
  EXPECT_EQ(r.total_macs, macs);
  EXPECT_EQ(r.total_counted_ops, ops);
  EXPECT_EQ(r.total_params, ucm::count_params(*m));
  EXPECT_EQ(r.param_bytes, 4 * ucm::count_params(*m));
  EXPECT_DOUBLE_EQ(r.gflops_2mac(), 2 * r.gflops_mac());
}

TEST(CostReport, IndependentOfWeightsAndRepeatable) {
  auto a = model();
  auto b = model();
  ucm::init_params(b->params(), 77);
  const auto ra = ucm::count_flops(*a, {1, 3, 64, 64});
  const auto rb = ucm::count_flops(*b, {1, 3, 64, 64});
  EXPECT_EQ(ra.total_counted_ops, rb.total_counted_ops);
  EXPECT_EQ(ra.peak_activation_bytes, rb.peak_activation_bytes);
  EXPECT_EQ(ra.peak_activation_bytes, ucm::count_flops(*a, {1, 3, 64, 64}).peak_activation_bytes);
}

TEST(CostReport, ConvCostsScaleWithArea) {
  auto m = model();
  const auto small = ucm::count_flops(*m, {1, 3, 128, 128});
  const auto large = ucm::count_flops(*m, {1, 3, 256, 256});
  EXPECT_EQ(large.total_macs, 4 * small.total_macs);
}

TEST(MemoryEstimate, MonotoneAndOrderedByVariant) {
  auto c = model();
  const auto m64 = ucm::memory_estimate(*c, {1, 3, 64, 64});
  const auto m128 = ucm::memory_estimate(*c, {1, 3, 128, 128});
  const auto m256 = ucm::memory_estimate(*c, {1, 3, 256, 256});
  EXPECT_LT(m64, m128);
  EXPECT_LT(m128, m256);
  auto a = model(ucm::BlockKind::variant_a_doubleconv);
  EXPECT_GT(ucm::memory_estimate(*a, {1, 3, 256, 256}), m256);
  EXPECT_GT(ucm::count_params(*a), ucm::count_params(*c));
}

TEST(CostReport, CsvHasOneRowPerLayer) {
  auto m = model();
  const auto r = ucm::count_flops(*m, {1, 3, 64, 64});
  std::ostringstream os;
  ucm::write_cost_csv(os, r);
  std::istringstream is(os.str());
  std::string line;
  std::size_t rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_GE(rows, r.per_layer.size() + 1);
  std::ostringstream text;
  ucm::write_cost_text(text, r, false);
  EXPECT_NE(text.str().find("input"), std::string::npos);
}

}  // namespace

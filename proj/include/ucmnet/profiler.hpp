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
#include <sstream>
#include <string>
#include <vector>

#include "ucmnet/model.hpp"
#include "ucmnet/trace.hpp"

namespace ucm {

// FLOP conventions:
//   opcounter  hook-style op counter, the headline figure. Convolutions and
//              linears count one op per MAC (bias excluded), transposed convs
//              charge each output element C_in * k^2, affine norms 4 ops per
//              element, activations / pooling / resizing nothing.
//   mac        pure multiply-accumulates of conv, transposed conv and linear
//   2mac       2 x mac
struct CostReport {
  Shape input_shape;
  std::vector<LayerCost> per_layer;
  std::uint64_t total_params = 0;
  std::uint64_t total_macs = 0;
  std::uint64_t total_counted_ops = 0;
  std::uint64_t total_elementwise = 0;
  std::uint64_t param_bytes = 0;
  std::uint64_t peak_activation_bytes = 0;
  std::string convention = "opcounter";

  double gflops() const { return static_cast<double>(total_counted_ops) / 1e9; }
  double gflops_mac() const { return static_cast<double>(total_macs) / 1e9; }
  double gflops_2mac() const { return 2.0 * static_cast<double>(total_macs) / 1e9; }
  std::uint64_t memory_bytes() const { return param_bytes + peak_activation_bytes; }
};

// Learnable elements only; running statistics are excluded.
template <typename T>
std::uint64_t count_params(const SegmentationModel<T>& model) {
  return model.params().learnable_count();
}

// Traces one eval-mode forward on a zero input of `input_shape`. Costs are
// analytic, so the report does not depend on weight values.
template <typename T>
CostReport count_flops(SegmentationModel<T>& model, const Shape& input_shape) {
  CostReport report;
  report.input_shape = input_shape;
  const bool was_training = model.training();
  model.set_training(false);
  {
    NoGradGuard no_grad;
    auto& stats = allocation_stats();
    const std::size_t baseline = stats.live_bytes;
    stats.reset_peak();
    CostTrace trace;
    {
      const Tensor<T> x = Tensor<T>::zeros(input_shape);
      model.forward(x);
    }
    report.per_layer = trace.entries();
    report.peak_activation_bytes = stats.peak_bytes - baseline;
  }
  model.set_training(was_training);
  for (const auto& e : report.per_layer) {
    report.total_params += e.params;
    report.total_macs += e.macs;
    report.total_counted_ops += e.counted_ops;
    report.total_elementwise += e.elementwise;
  }
  report.param_bytes = count_params(model) * 4;
  return report;
}

template <typename T>
std::uint64_t memory_estimate(SegmentationModel<T>& model, const Shape& input_shape) {
  return count_flops(model, input_shape).memory_bytes();
}

inline void write_cost_csv(std::ostream& os, const CostReport& r) {
  os << "name,kind,output_shape,params,macs,opcounter_ops,elementwise_ops\n";
  for (const auto& e : r.per_layer) {
    std::string shape = to_string(e.output_shape);
    for (auto& ch : shape) {
      if (ch == ',') ch = 'x';
    }
    shape.erase(std::remove(shape.begin(), shape.end(), ' '), shape.end());
    os << e.name << ',' << e.kind << ',' << shape << ',' << e.params << ',' << e.macs << ',' << e.counted_ops << ','
       << e.elementwise << '\n';
  }
  os << "TOTAL,,," << r.total_params << ',' << r.total_macs << ',' << r.total_counted_ops << ','
     << r.total_elementwise << '\n';
}

inline void write_cost_text(std::ostream& os, const CostReport& r, bool per_layer = true) {
  if (per_layer) {
    os << std::left << std::setw(26) << "layer" << std::setw(18) << "kind" << std::setw(20) << "output" << std::right
       << std::setw(9) << "params" << std::setw(14) << "macs" << std::setw(14) << "opcounter" << '\n';
    for (const auto& e : r.per_layer) {
      os << std::left << std::setw(26) << e.name << std::setw(18) << e.kind << std::setw(20)
         << to_string(e.output_shape) << std::right << std::setw(9) << e.params << std::setw(14) << e.macs
         << std::setw(14) << e.counted_ops << '\n';
    }
  }
  std::ostringstream g;
  g << std::fixed << std::setprecision(6);
  g << "input                 " << to_string(r.input_shape) << '\n'
    << "params                " << r.total_params << '\n'
    << "GFLOPs (" << r.convention << ")   " << r.gflops() << '\n'
    << "GFLOPs (1 MAC = 1)    " << r.gflops_mac() << '\n'
    << "GFLOPs (1 MAC = 2)    " << r.gflops_2mac() << '\n'
    << "elementwise ops       " << r.total_elementwise << '\n'
    << "param bytes           " << r.param_bytes << '\n'
    << "peak activation bytes " << r.peak_activation_bytes << '\n'
    << "memory estimate (MB)  " << static_cast<double>(r.memory_bytes()) / (1024.0 * 1024.0) << '\n';
  os << g.str();
}

}  // namespace ucm

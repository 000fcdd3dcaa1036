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
#include <string>
#include <vector>

#include "ucmnet/tensor.hpp"

namespace ucm {

// Cost of one layer invocation, recorded while a CostTrace is active.
//   macs        multiply-accumulates of the layer proper
//   counted_ops the hook-style op-counter figure (see profiler.hpp)
//   elementwise per-element work of norms, activations, pooling, resizing
struct LayerCost {
  std::string name;
  std::string kind;
  Shape output_shape;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
  std::uint64_t counted_ops = 0;
  std::uint64_t elementwise = 0;
};

namespace detail {
inline std::vector<LayerCost>*& cost_sink() {
  thread_local std::vector<LayerCost>* sink = nullptr;
  return sink;
}
}  // namespace detail

// RAII scope collecting every traced layer call on this thread.
class CostTrace {
 public:
  CostTrace() : previous_(detail::cost_sink()) { detail::cost_sink() = &entries_; }
  ~CostTrace() { detail::cost_sink() = previous_; }
  CostTrace(const CostTrace&) = delete;
  CostTrace& operator=(const CostTrace&) = delete;

  const std::vector<LayerCost>& entries() const { return entries_; }

 private:
  std::vector<LayerCost> entries_;
  std::vector<LayerCost>* previous_;
};

inline bool tracing() { return detail::cost_sink() != nullptr; }

inline void trace_cost(LayerCost cost) {
  if (auto* sink = detail::cost_sink()) sink->push_back(std::move(cost));
}

}  // namespace ucm

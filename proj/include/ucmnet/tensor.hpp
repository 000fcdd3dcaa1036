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

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ucm {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream oss;
  oss << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    oss << (i ? ", " : "") << shape[i];
  }
  oss << ']';
  return oss.str();
}

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class AutogradError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Live/peak byte counters for tensor payloads on the current thread. The
// profiler reads these to measure peak activation memory.
struct AllocationStats {
  std::size_t live_bytes = 0;
  std::size_t peak_bytes = 0;

  void reset_peak() { peak_bytes = live_bytes; }
};

inline AllocationStats& allocation_stats() {
  thread_local AllocationStats stats;
  return stats;
}

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until the first accumulation
  bool requires_grad = false;
  std::optional<std::size_t> tape_id;

  TensorImpl(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    auto& stats = allocation_stats();
    stats.live_bytes += data.size() * sizeof(T);
    stats.peak_bytes = std::max(stats.peak_bytes, stats.live_bytes);
  }
  TensorImpl(const TensorImpl&) = delete;
  TensorImpl& operator=(const TensorImpl&) = delete;
  ~TensorImpl() { allocation_stats().live_bytes -= data.size() * sizeof(T); }

  // Gradient buffer for accumulation, allocated zero-filled on first use.
  std::span<T> grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), T{0});
    return grad;
  }
};

template <typename T>
using ImplPtr = std::shared_ptr<TensorImpl<T>>;

// ---------------------------------------------------------------------------
// Gradient mode

namespace detail {
inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode_flag(); }

class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
  ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// ---------------------------------------------------------------------------
// Tensor

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  Tensor(Shape shape, std::vector<T> data) {
    for (auto d : shape) {
      if (d == 0) throw ShapeError("tensor dimensions must be >= 1, got " + ucm::to_string(shape));
    }
    if (ucm::numel(shape) != data.size()) {
      throw ShapeError("data length " + std::to_string(data.size()) +
                       " does not match shape " + ucm::to_string(shape));
    }
    impl_ = std::make_shared<TensorImpl<T>>(std::move(shape), std::move(data));
  }

  static Tensor full(const Shape& shape, T value) {
    return Tensor(shape, std::vector<T>(ucm::numel(shape), value));
  }
  static Tensor zeros(const Shape& shape) { return full(shape, T{0}); }
  static Tensor ones(const Shape& shape) { return full(shape, T{1}); }
  static Tensor scalar(T value) { return Tensor({1}, {value}); }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl().shape; }
  std::size_t dim(std::size_t axis) const { return shape().at(axis); }
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const { return impl().data.size(); }

  std::span<const T> data() const { return impl().data; }
  // Direct write access; reserved for parameter updates, running statistics
  // and test fixtures. Never mutate a tensor that is referenced by the tape.
  std::span<T> mutable_data() { return impl().data; }
  T operator[](std::size_t i) const { return impl().data[i]; }

  T item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + ucm::to_string(shape()));
    return impl().data[0];
  }

  bool requires_grad() const { return defined() && impl_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    impl().requires_grad = on;
    return *this;
  }

  bool has_grad() const { return defined() && !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl().grad; }
  void zero_grad() {
    if (!impl().grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), T{0});
  }
  void clear_grad() { impl().grad.clear(); }

  std::optional<std::size_t> tape_id() const { return impl().tape_id; }

  // Deep copy detached from any tape.
  Tensor clone() const { return Tensor(shape(), impl().data); }

  const ImplPtr<T>& impl_ptr() const { return impl_; }
  explicit Tensor(ImplPtr<T> impl) : impl_(std::move(impl)) {}

 private:
  TensorImpl<T>& impl() const {
    if (!impl_) throw AutogradError("use of undefined tensor");
    return *impl_;
  }

  ImplPtr<T> impl_;
};

// ---------------------------------------------------------------------------
// Gradient tape

template <typename T>
class GradientTape {
 public:
  // Receives the output gradient; accumulates into its inputs.
  using BackwardFn = std::function<void(std::span<const T>)>;

  struct Node {
    std::string op;
    std::vector<std::size_t> input_ids;  // tape ids of recorded inputs
    ImplPtr<T> output;
    BackwardFn backward;
  };

  std::size_t record(std::string op, const std::vector<ImplPtr<T>>& inputs, const ImplPtr<T>& output,
                     BackwardFn backward) {
    Node node{std::move(op), {}, output, std::move(backward)};
    for (const auto& in : inputs) {
      if (in && in->tape_id) node.input_ids.push_back(*in->tape_id);
    }
    const std::size_t id = nodes_.size();
    output->tape_id = id;
    nodes_.push_back(std::move(node));
    return id;
  }

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  const std::vector<Node>& nodes() const { return nodes_; }

  void clear() {
    for (auto& node : nodes_) {
      if (node.output) node.output->tape_id.reset();
    }
    nodes_.clear();
  }

  void backward(const Tensor<T>& loss) {
    if (!loss.defined() || loss.numel() != 1) {
      throw AutogradError("backward() requires a scalar loss");
    }
    if (nodes_.empty()) throw AutogradError("backward() on an empty gradient tape");
    if (!loss.requires_grad() || !loss.tape_id()) {
      throw AutogradError("loss is not connected to the gradient tape");
    }
    const auto& out = loss.impl_ptr();
    out->grad_buffer()[0] += T{1};
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      Node& node = nodes_[i];
      if (!node.output->grad.empty()) node.backward(node.output->grad);
      node.backward = nullptr;  // drop saved activations early
    }
    clear();
  }

 private:
  std::vector<Node> nodes_;
};

template <typename T>
GradientTape<T>& active_tape() {
  thread_local GradientTape<T> tape;
  return tape;
}

template <typename T>
void backward(const Tensor<T>& loss) {
  active_tape<T>().backward(loss);
}

namespace detail {

template <typename T>
bool any_requires_grad(std::initializer_list<const Tensor<T>*> inputs) {
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor<T>* t) { return t && t->requires_grad(); });
}

// Records `out` on the active tape when grad mode is on and any input needs a
// gradient; otherwise returns it untouched.
template <typename T>
Tensor<T> record(std::string op, std::initializer_list<const Tensor<T>*> inputs, Tensor<T> out,
                 typename GradientTape<T>::BackwardFn backward) {
  if (!grad_enabled() || !any_requires_grad<T>(inputs)) return out;
  std::vector<ImplPtr<T>> impls;
  for (const auto* t : inputs) {
    if (t && t->defined()) impls.push_back(t->impl_ptr());
  }
  out.impl_ptr()->requires_grad = true;
  active_tape<T>().record(std::move(op), impls, out.impl_ptr(), std::move(backward));
  return out;
}

// Gradient span for an input, or an empty span when it needs none.
template <typename T>
std::span<T> grad_sink(const ImplPtr<T>& impl) {
  if (!impl || !impl->requires_grad) return {};
  return impl->grad_buffer();
}

}  // namespace detail

}  // namespace ucm

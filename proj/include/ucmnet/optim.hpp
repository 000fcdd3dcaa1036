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

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "ucmnet/layers.hpp"

namespace ucm {

struct AdamWConfig {
  double lr = 1e-3;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with decoupled weight decay over the learnable entries of a store:
//   p <- p - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * p
template <typename T>
class AdamW {
 public:
  AdamW(ParamStore<T>& store, AdamWConfig cfg) : store_(&store), cfg_(cfg) {
    for (const auto& e : store.entries()) {
      if (!e.learnable) continue;
      slots_.push_back(e.tensor);
      names_.push_back(e.name);
      m_.emplace_back(e.tensor.numel(), T{0});
      v_.emplace_back(e.tensor.numel(), T{0});
    }
  }

  const AdamWConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }
  std::uint64_t step_count() const { return t_; }
  void set_step_count(std::uint64_t t) { t_ = t; }

  std::size_t size() const { return slots_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  std::vector<T>& first_moment(std::size_t i) { return m_[i]; }
  std::vector<T>& second_moment(std::size_t i) { return v_[i]; }
  const std::vector<T>& first_moment(std::size_t i) const { return m_[i]; }
  const std::vector<T>& second_moment(std::size_t i) const { return v_[i]; }

  void step() {
    for (std::size_t i = 0; i < slots_.size(); ++i) {
      if (!slots_[i].has_grad()) throw AutogradError("AdamW: parameter " + names_[i] + " has no gradient");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T lr = static_cast<T>(cfg_.lr), decay = static_cast<T>(cfg_.lr * cfg_.weight_decay);
    const T inv_bc1 = static_cast<T>(1.0 / bc1), inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
    const T eps = static_cast<T>(cfg_.eps);
    for (std::size_t i = 0; i < slots_.size(); ++i) {
      auto p = slots_[i].mutable_data();
      const auto g = slots_[i].grad();
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t k = 0; k < p.size(); ++k) {
        m[k] = b1 * m[k] + (T{1} - b1) * g[k];
        v[k] = b2 * v[k] + (T{1} - b2) * g[k] * g[k];
        const T update = (m[k] * inv_bc1) / (std::sqrt(v[k]) * inv_sqrt_bc2 + eps);
        p[k] = p[k] - lr * update - decay * p[k];
      }
    }
  }

  void zero_grad() { store_->zero_grad(); }

 private:
  ParamStore<T>* store_;
  AdamWConfig cfg_;
  std::vector<Tensor<T>> slots_;
  std::vector<std::string> names_;
  std::vector<std::vector<T>> m_, v_;
  std::uint64_t t_ = 0;
};

enum class LrSchedule { periodic, plateau };

inline LrSchedule parse_lr_schedule(const std::string& s) {
  if (s == "periodic") return LrSchedule::periodic;
  if (s == "plateau") return LrSchedule::plateau;
  throw std::invalid_argument("unknown lr_schedule '" + s + "'");
}

inline std::string to_string(LrSchedule s) { return s == LrSchedule::periodic ? "periodic" : "plateau"; }

// Cosine annealing evaluated per epoch. `periodic` keeps the closed form
// past t_max; `plateau` holds eta_min from t_max on.
inline double cosine_lr(std::size_t epoch, double lr0 = 1e-3, std::size_t t_max = 50, double eta_min = 1e-5,
                        LrSchedule mode = LrSchedule::periodic) {
  if (t_max == 0) throw std::invalid_argument("t_max must be >= 1");
  if (mode == LrSchedule::plateau && epoch >= t_max) return eta_min;
  if (epoch % (2 * t_max) == t_max) return eta_min;
  if (epoch % (2 * t_max) == 0) return lr0;
  const double phase = std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(t_max);
  return eta_min + (lr0 - eta_min) * (1.0 + std::cos(phase)) / 2.0;
}

}  // namespace ucm

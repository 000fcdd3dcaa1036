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
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "ucmnet/layers.hpp"

namespace ucm {

enum class BlockKind { variant_a_doubleconv, variant_b_conv1x1, variant_c_ucm };

// How the three convolutions inside a UCM block are realized.
enum class UcmConv { depthwise3x3, dense1x1 };

inline std::string to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::variant_a_doubleconv: return "variant_a_doubleconv";
    case BlockKind::variant_b_conv1x1: return "variant_b_conv1x1";
    case BlockKind::variant_c_ucm: return "variant_c_ucm";
  }
  return "unknown";
}

inline BlockKind parse_block_kind(const std::string& s) {
  if (s == "variant_a_doubleconv" || s == "a" || s == "A") return BlockKind::variant_a_doubleconv;
  if (s == "variant_b_conv1x1" || s == "b" || s == "B") return BlockKind::variant_b_conv1x1;
  if (s == "variant_c_ucm" || s == "c" || s == "C") return BlockKind::variant_c_ucm;
  throw std::invalid_argument("unknown variant '" + s + "'");
}

inline std::string to_string(UcmConv conv) { return conv == UcmConv::depthwise3x3 ? "depthwise3x3" : "dense1x1"; }

inline UcmConv parse_ucm_conv(const std::string& s) {
  if (s == "depthwise3x3") return UcmConv::depthwise3x3;
  if (s == "dense1x1") return UcmConv::dense1x1;
  throw std::invalid_argument("unknown ucm_conv '" + s + "'");
}

struct NetworkConfig {
  std::array<std::size_t, 6> stage_channels{8, 16, 24, 32, 48, 64};
  std::size_t input_channels = 3;
  std::size_t input_size = 256;  // square H = W
  BlockKind block_kind = BlockKind::variant_c_ucm;
  UcmConv ucm_conv = UcmConv::depthwise3x3;
  bool deep_supervision = true;
  double leaky_slope = 0.01;
  double ln_eps = 1e-5;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;

  void validate() const {
    if (input_size == 0 || input_size % 32 != 0) {
      throw std::invalid_argument("input_size must be a positive multiple of 32, got " + std::to_string(input_size));
    }
    for (auto c : stage_channels) {
      if (c == 0) throw std::invalid_argument("stage channels must be positive");
    }
    if (block_kind != BlockKind::variant_c_ucm) {
      for (std::size_t i = 1; i < 6; ++i) {
        if (stage_channels[i] % 2) throw std::invalid_argument("U-Net variants need even stage channels");
      }
    }
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw std::invalid_argument("leaky_slope must lie in (0,1)");
  }
};

template <typename T>
struct ModelOutput {
  Tensor<T> logits;                     // [B,1,H,W]
  std::vector<Tensor<T>> stage_logits;  // deepest first, at 1/32 .. 1/2 resolution
};

template <typename T>
class SegmentationModel {
 public:
  explicit SegmentationModel(NetworkConfig cfg) : config_(std::move(cfg)) { config_.validate(); }
  virtual ~SegmentationModel() = default;
  SegmentationModel(const SegmentationModel&) = delete;
  SegmentationModel& operator=(const SegmentationModel&) = delete;

  virtual ModelOutput<T> forward(const Tensor<T>& x) = 0;

  const NetworkConfig& config() const { return config_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  void set_training(bool on) { training_ = on; }
  bool training() const { return training_; }

 protected:
  void check_input(const Tensor<T>& x) const {
    if (x.rank() != 4 || x.dim(1) != config_.input_channels || x.dim(2) % 32 || x.dim(3) % 32) {
      throw ShapeError("model input must be [B," + std::to_string(config_.input_channels) +
                       ",H,W] with H and W divisible by 32, got " + to_string(x.shape()));
    }
  }

  NetworkConfig config_;
  ParamStore<T> params_;
  bool training_ = true;
};

// ---------------------------------------------------------------------------
// UCM block: linear transforms and convolutions interleaved with
// normalizations, one residual around the whole pipeline.

template <typename T>
class UcmBlock {
 public:
  UcmBlock() = default;
  UcmBlock(ParamStore<T>& store, const std::string& name, std::size_t channels, const NetworkConfig& cfg)
      : name_(name), channels_(channels), slope_(static_cast<T>(cfg.leaky_slope)) {
    const T ln_eps = static_cast<T>(cfg.ln_eps);
    const std::size_t k = cfg.ucm_conv == UcmConv::depthwise3x3 ? 3 : 1;
    const std::size_t groups = cfg.ucm_conv == UcmConv::depthwise3x3 ? channels : 1;
    ln1_ = LayerNormLayer<T>(store, name + ".ln1", channels, 2, ln_eps);
    fc1_ = LinearLayer<T>(store, name + ".fc1", channels, channels);
    ln2_ = LayerNormLayer<T>(store, name + ".ln2", channels, 1, ln_eps);
    conv1_ = Conv2dLayer<T>(store, name + ".conv1", channels, channels, k, groups);
    conv2_ = Conv2dLayer<T>(store, name + ".conv2", channels, channels, k, groups);
    bn_ = BatchNormLayer<T>(store, name + ".bn", channels, 2, static_cast<T>(cfg.bn_momentum),
                            static_cast<T>(cfg.bn_eps));
    fc2_ = LinearLayer<T>(store, name + ".fc2", channels, channels);
    ln3_ = LayerNormLayer<T>(store, name + ".ln3", channels, 1, ln_eps);
    conv3_ = Conv2dLayer<T>(store, name + ".conv3", channels, channels, k, groups);
  }

  std::size_t channels() const { return channels_; }

  // [B,C,H,W] -> [B,H*W,C]
  Tensor<T> forward_tokens(const Tensor<T>& x, bool training) {
    if (x.rank() != 4 || x.dim(1) != channels_) {
      throw ShapeError(name_ + ": expected " + std::to_string(channels_) + " channels, got " + to_string(x.shape()));
    }
    const std::size_t h = x.dim(2), w = x.dim(3);
    Tensor<T> t = flatten_to_tokens(x);
    const Tensor<T> x1 = t;
    t = fc1_.forward(ln1_.forward(t));
    Tensor<T> m = tokens_to_map(t, h, w);
    m = conv1_.forward(ln2_.forward(m));
    m = conv2_.forward(traced_leaky_relu(name_ + ".leaky", m, slope_));
    t = flatten_to_tokens(m);
    t = fc2_.forward(bn_.forward(t, training));
    m = tokens_to_map(t, h, w);
    m = conv3_.forward(ln3_.forward(m));
    return traced_add(name_ + ".residual", flatten_to_tokens(m), x1);
  }

  Tensor<T> forward(const Tensor<T>& x, bool training) {
    return tokens_to_map(forward_tokens(x, training), x.dim(2), x.dim(3));
  }

 private:
  std::string name_;
  std::size_t channels_ = 0;
  T slope_{0.01};
  LayerNormLayer<T> ln1_, ln2_, ln3_;
  LinearLayer<T> fc1_, fc2_;
  Conv2dLayer<T> conv1_, conv2_, conv3_;
  BatchNormLayer<T> bn_;
};

// Six-stage encoder-decoder. Encoder stage i: conv (3x3 for the first
// stage, 1x1 after), 2x max-pool for stages 1-5, UCM block. Decoder stage j
// (deepest first): UCM block on its input (j >= 2), 1x1 conv, 2x bilinear
// upsample (j >= 2), additive skip, then a 1-channel stage head.
template <typename T>
class UcmNet : public SegmentationModel<T> {
 public:
  explicit UcmNet(const NetworkConfig& cfg) : SegmentationModel<T>(cfg) {
    auto& store = this->params_;
    const auto& ch = cfg.stage_channels;
    std::size_t in = cfg.input_channels;
    for (std::size_t i = 0; i < 6; ++i) {
      const std::string stage = "enc" + std::to_string(i + 1);
      const std::size_t k = i == 0 ? 3 : 1;
      enc_conv_[i] = Conv2dLayer<T>(store, stage + ".conv", in, ch[i], k);
      enc_block_[i] = UcmBlock<T>(store, stage + ".ucm", ch[i], cfg);
      in = ch[i];
    }
    for (std::size_t j = 0; j < 5; ++j) {
      const std::string stage = "dec" + std::to_string(j + 1);
      const std::size_t hi = ch[5 - j], lo = ch[4 - j];
      if (j > 0) dec_block_[j] = UcmBlock<T>(store, stage + ".ucm", hi, cfg);
      dec_conv_[j] = Conv2dLayer<T>(store, stage + ".conv", hi, lo, 1);
      if (cfg.deep_supervision) head_[j] = Conv2dLayer<T>(store, stage + ".head", lo, 1, 1);
    }
    final_ = Conv2dLayer<T>(store, "final", ch[0], 1, 1);
  }

  ModelOutput<T> forward(const Tensor<T>& input) override {
    this->check_input(input);
    const bool training = this->training_;
    std::array<Tensor<T>, 5> skips;
    Tensor<T> x = input;
    for (std::size_t i = 0; i < 6; ++i) {
      x = enc_conv_[i].forward(x);
      if (i < 5) x = traced_max_pool("enc" + std::to_string(i + 1) + ".pool", x);
      x = enc_block_[i].forward(x, training);
      if (i < 5) skips[i] = x;
    }
    ModelOutput<T> out;
    for (std::size_t j = 0; j < 5; ++j) {
      const std::string stage = "dec" + std::to_string(j + 1);
      if (j > 0) x = dec_block_[j].forward(x, training);
      x = dec_conv_[j].forward(x);
      if (j > 0) x = traced_upsample2x(stage + ".up", x);
      x = traced_add(stage + ".skip", x, skips[4 - j]);
      if (this->config_.deep_supervision) out.stage_logits.push_back(head_[j].forward(x));
    }
    out.logits = traced_upsample2x("final.up", final_.forward(x));
    return out;
  }

 private:
  std::array<Conv2dLayer<T>, 6> enc_conv_;
  std::array<UcmBlock<T>, 6> enc_block_;
  std::array<UcmBlock<T>, 5> dec_block_;  // slot 0 unused
  std::array<Conv2dLayer<T>, 5> dec_conv_;
  std::array<Conv2dLayer<T>, 5> head_;
  Conv2dLayer<T> final_;
};

// ---------------------------------------------------------------------------
// Ablation variants A and B: six-stage U-Nets with double-conv stages,
// transposed-conv upsampling and concatenated skips.

template <typename T>
class DoubleConv {
 public:
  DoubleConv() = default;
  DoubleConv(ParamStore<T>& store, const std::string& name, std::size_t cin, std::size_t cout, std::size_t k2,
             const NetworkConfig& cfg)
      : name_(name) {
    const T mom = static_cast<T>(cfg.bn_momentum), eps = static_cast<T>(cfg.bn_eps);
    conv1_ = Conv2dLayer<T>(store, name + ".conv1", cin, cout, 3, 1, false);
    bn1_ = BatchNormLayer<T>(store, name + ".bn1", cout, 1, mom, eps);
    conv2_ = Conv2dLayer<T>(store, name + ".conv2", cout, cout, k2, 1, false);
    bn2_ = BatchNormLayer<T>(store, name + ".bn2", cout, 1, mom, eps);
  }

  Tensor<T> forward(const Tensor<T>& x, bool training) {
    Tensor<T> y = traced_relu(name_ + ".relu1", bn1_.forward(conv1_.forward(x), training));
    return traced_relu(name_ + ".relu2", bn2_.forward(conv2_.forward(y), training));
  }

 private:
  std::string name_;
  Conv2dLayer<T> conv1_, conv2_;
  BatchNormLayer<T> bn1_, bn2_;
};

template <typename T>
class UNetVariant : public SegmentationModel<T> {
 public:
  explicit UNetVariant(const NetworkConfig& cfg) : SegmentationModel<T>(cfg) {
    auto& store = this->params_;
    const auto& ch = cfg.stage_channels;
    const std::size_t k2 = cfg.block_kind == BlockKind::variant_a_doubleconv ? 3 : 1;
    std::size_t in = cfg.input_channels;
    for (std::size_t i = 0; i < 6; ++i) {
      enc_[i] = DoubleConv<T>(store, "enc" + std::to_string(i + 1), in, ch[i], k2, cfg);
      in = ch[i];
    }
    for (std::size_t j = 0; j < 5; ++j) {
      const std::string stage = "dec" + std::to_string(j + 1);
      const std::size_t hi = ch[5 - j], lo = ch[4 - j];
      up_[j] = ConvTranspose2xLayer<T>(store, stage + ".up", hi, hi / 2);
      dec_[j] = DoubleConv<T>(store, stage, hi / 2 + lo, lo, k2, cfg);
    }
    out_ = Conv2dLayer<T>(store, "final", ch[0], 1, 1);
  }

  ModelOutput<T> forward(const Tensor<T>& input) override {
    this->check_input(input);
    const bool training = this->training_;
    std::array<Tensor<T>, 5> skips;
    Tensor<T> x = input;
    for (std::size_t i = 0; i < 6; ++i) {
      if (i > 0) x = traced_max_pool("enc" + std::to_string(i + 1) + ".pool", x);
      x = enc_[i].forward(x, training);
      if (i < 5) skips[i] = x;
    }
    for (std::size_t j = 0; j < 5; ++j) {
      x = concat_channels(skips[4 - j], up_[j].forward(x));
      x = dec_[j].forward(x, training);
    }
    return {out_.forward(x), {}};
  }

 private:
  std::array<DoubleConv<T>, 6> enc_;
  std::array<ConvTranspose2xLayer<T>, 5> up_;
  std::array<DoubleConv<T>, 5> dec_;
  Conv2dLayer<T> out_;
};

template <typename T>
std::unique_ptr<SegmentationModel<T>> build_variant(const NetworkConfig& cfg) {
  switch (cfg.block_kind) {
    case BlockKind::variant_c_ucm: return std::make_unique<UcmNet<T>>(cfg);
    case BlockKind::variant_a_doubleconv:
    case BlockKind::variant_b_conv1x1: return std::make_unique<UNetVariant<T>>(cfg);
  }
  throw std::invalid_argument("unknown variant");
}

// Closed-form learnable parameter count, summed from per-layer formulas.
inline std::size_t expected_param_count(const NetworkConfig& cfg) {
  const auto& ch = cfg.stage_channels;
  auto conv = [](std::size_t cin, std::size_t cout, std::size_t k, bool bias) {
    return cout * cin * k * k + (bias ? cout : 0);
  };
  std::size_t total = 0;
  if (cfg.block_kind == BlockKind::variant_c_ucm) {
    auto ucm = [&](std::size_t c) {
      const std::size_t inner = cfg.ucm_conv == UcmConv::depthwise3x3 ? 10 * c : c * c + c;
      return 3 * 2 * c + 2 * (c * c + c) + 2 * c + 3 * inner;  // 3 LN, 2 linear, BN, 3 conv
    };
    std::size_t in = cfg.input_channels;
    for (std::size_t i = 0; i < 6; ++i) {
      total += conv(in, ch[i], i == 0 ? 3 : 1, true) + ucm(ch[i]);
      in = ch[i];
    }
    for (std::size_t j = 0; j < 5; ++j) {
      const std::size_t hi = ch[5 - j], lo = ch[4 - j];
      total += (j > 0 ? ucm(hi) : 0) + conv(hi, lo, 1, true) + (cfg.deep_supervision ? conv(lo, 1, 1, true) : 0);
    }
    return total + conv(ch[0], 1, 1, true);
  }
  const std::size_t k2 = cfg.block_kind == BlockKind::variant_a_doubleconv ? 3 : 1;
  auto double_conv = [&](std::size_t cin, std::size_t cout) {
    return conv(cin, cout, 3, false) + 2 * cout + conv(cout, cout, k2, false) + 2 * cout;
  };
  std::size_t in = cfg.input_channels;
  for (std::size_t i = 0; i < 6; ++i) {
    total += double_conv(in, ch[i]);
    in = ch[i];
  }
  for (std::size_t j = 0; j < 5; ++j) {
    const std::size_t hi = ch[5 - j], lo = ch[4 - j];
    total += hi * (hi / 2) * 4 + hi / 2 + double_conv(hi / 2 + lo, lo);
  }
  return total + conv(ch[0], 1, 1, true);
}

}  // namespace ucm

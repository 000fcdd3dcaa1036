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

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "ucmnet/seed.hpp"
#include "ucmnet/train.hpp"

namespace ucm {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every knob of a run. Defaults follow the reference training recipe.
struct RunConfig {
  NetworkConfig net;
  TrainConfig train;
  std::filesystem::path manifest;
  double split_ratio = 0.7;
};

namespace detail {

template <typename V>
V parse_number(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  V v{};
  in >> v;
  if (in.fail() || !(in >> std::ws).eof()) throw ConfigError("invalid value '" + text + "' for key " + key);
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("invalid boolean '" + text + "' for key " + key);
}

template <typename V, std::size_t N>
std::array<V, N> parse_list(const std::string& key, const std::string& text) {
  std::array<V, N> out{};
  std::stringstream ss(text);
  std::string cell;
  std::size_t n = 0;
  while (std::getline(ss, cell, ',')) {
    if (n == N) throw ConfigError("key " + key + " takes exactly " + std::to_string(N) + " values");
    out[n++] = parse_number<V>(key, trim(cell));
  }
  if (n != N) throw ConfigError("key " + key + " takes exactly " + std::to_string(N) + " values");
  return out;
}

template <typename Enum>
Enum parse_enum(const std::string& key, const std::string& text, Enum (*parser)(const std::string&)) {
  try {
    return parser(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("key " + key + ": " + e.what());
  }
}

}  // namespace detail

// Applies one `key = value` assignment. Relative paths resolve against base.
inline void apply_config_key(RunConfig& c, const std::string& key, const std::string& value,
                             const std::filesystem::path& base = {}) {
  using namespace detail;
  auto path = [&](const std::string& v) {
    const std::filesystem::path p(v);
    return p.is_absolute() || base.empty() ? p : base / p;
  };
  static const std::map<std::string, std::function<void(RunConfig&, const std::string&)>> setters = {
      {"channels", [](RunConfig& r, const std::string& v) { r.net.stage_channels = parse_list<std::size_t, 6>("channels", v); }},
      {"input_size", [](RunConfig& r, const std::string& v) { r.net.input_size = parse_number<std::size_t>("input_size", v); }},
      {"block_kind", [](RunConfig& r, const std::string& v) { r.net.block_kind = parse_enum("block_kind", v, &parse_block_kind); }},
      {"ucm_conv", [](RunConfig& r, const std::string& v) { r.net.ucm_conv = parse_enum("ucm_conv", v, &parse_ucm_conv); }},
      {"deep_supervision", [](RunConfig& r, const std::string& v) { r.net.deep_supervision = parse_bool("deep_supervision", v); }},
      {"leaky_slope", [](RunConfig& r, const std::string& v) { r.net.leaky_slope = parse_number<double>("leaky_slope", v); }},
      {"ln_eps", [](RunConfig& r, const std::string& v) { r.net.ln_eps = parse_number<double>("ln_eps", v); }},
      {"bn_eps", [](RunConfig& r, const std::string& v) { r.net.bn_eps = parse_number<double>("bn_eps", v); }},
      {"bn_momentum", [](RunConfig& r, const std::string& v) { r.net.bn_momentum = parse_number<double>("bn_momentum", v); }},
      {"base_loss", [](RunConfig& r, const std::string& v) { r.train.loss.base_loss = parse_enum("base_loss", v, &parse_base_loss); }},
      {"smooth", [](RunConfig& r, const std::string& v) { r.train.loss.smooth = parse_number<double>("smooth", v); }},
      {"stage_weights", [](RunConfig& r, const std::string& v) { r.train.loss.stage_weights = parse_list<double, 5>("stage_weights", v); }},
      {"clamp_eps", [](RunConfig& r, const std::string& v) { r.train.loss.clamp_eps = parse_number<double>("clamp_eps", v); }},
      {"epochs", [](RunConfig& r, const std::string& v) { r.train.epochs = parse_number<std::size_t>("epochs", v); }},
      {"batch_size", [](RunConfig& r, const std::string& v) { r.train.batch_size = parse_number<std::size_t>("batch_size", v); }},
      {"eval_batch_size", [](RunConfig& r, const std::string& v) { r.train.eval_batch_size = parse_number<std::size_t>("eval_batch_size", v); }},
      {"lr", [](RunConfig& r, const std::string& v) { r.train.optim.lr = parse_number<double>("lr", v); }},
      {"weight_decay", [](RunConfig& r, const std::string& v) { r.train.optim.weight_decay = parse_number<double>("weight_decay", v); }},
      {"beta1", [](RunConfig& r, const std::string& v) { r.train.optim.beta1 = parse_number<double>("beta1", v); }},
      {"beta2", [](RunConfig& r, const std::string& v) { r.train.optim.beta2 = parse_number<double>("beta2", v); }},
      {"adam_eps", [](RunConfig& r, const std::string& v) { r.train.optim.eps = parse_number<double>("adam_eps", v); }},
      {"t_max", [](RunConfig& r, const std::string& v) { r.train.t_max = parse_number<std::size_t>("t_max", v); }},
      {"eta_min", [](RunConfig& r, const std::string& v) { r.train.eta_min = parse_number<double>("eta_min", v); }},
      {"lr_schedule", [](RunConfig& r, const std::string& v) { r.train.schedule = parse_enum("lr_schedule", v, &parse_lr_schedule); }},
      {"seed", [](RunConfig& r, const std::string& v) { r.train.seed = parse_number<std::uint64_t>("seed", v); }},
      {"augment", [](RunConfig& r, const std::string& v) { r.train.augment = parse_bool("augment", v); }},
      {"hflip_p", [](RunConfig& r, const std::string& v) { r.train.augmentation.hflip_p = parse_number<double>("hflip_p", v); }},
      {"vflip_p", [](RunConfig& r, const std::string& v) { r.train.augmentation.vflip_p = parse_number<double>("vflip_p", v); }},
      {"rotation_min", [](RunConfig& r, const std::string& v) { r.train.augmentation.rotation_min = parse_number<double>("rotation_min", v); }},
      {"rotation_max", [](RunConfig& r, const std::string& v) { r.train.augmentation.rotation_max = parse_number<double>("rotation_max", v); }},
      {"threshold", [](RunConfig& r, const std::string& v) { r.train.threshold = parse_number<double>("threshold", v); }},
      {"split_ratio", [](RunConfig& r, const std::string& v) { r.split_ratio = parse_number<double>("split_ratio", v); }},
  };
  if (key == "manifest") {
    c.manifest = path(value);
  } else if (key == "output_dir") {
    c.train.output_dir = path(value);
  } else if (auto it = setters.find(key); it != setters.end()) {
    it->second(c, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

inline void validate(const RunConfig& c) {
  try {
    c.net.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.train.epochs == 0) throw ConfigError("epochs must be >= 1");
  if (c.train.batch_size == 0 || c.train.eval_batch_size == 0) throw ConfigError("batch sizes must be >= 1");
  if (c.train.t_max == 0) throw ConfigError("t_max must be >= 1");
  if (!(c.train.loss.smooth > 0)) throw ConfigError("smooth must be > 0");
  if (!(c.split_ratio >= 0 && c.split_ratio <= 1)) throw ConfigError("split_ratio must lie in [0,1]");
  if (c.train.augmentation.rotation_max < c.train.augmentation.rotation_min) {
    throw ConfigError("rotation_max must be >= rotation_min");
  }
}

// `key = value` lines; '#' starts a comment.
inline RunConfig parse_config(const std::string& text, const std::filesystem::path& base = {}) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    apply_config_key(c, key, value, base);
  }
  validate(c);
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

inline std::string describe(const RunConfig& c) {
  std::ostringstream o;
  const auto& n = c.net;
  const auto& t = c.train;
  o << "channels = ";
  for (std::size_t i = 0; i < 6; ++i) o << (i ? "," : "") << n.stage_channels[i];
  o << "\ninput_size = " << n.input_size << "\nblock_kind = " << to_string(n.block_kind)
    << "\nucm_conv = " << to_string(n.ucm_conv) << "\ndeep_supervision = " << (n.deep_supervision ? "true" : "false")
    << "\nleaky_slope = " << n.leaky_slope << "\nbase_loss = " << to_string(t.loss.base_loss)
    << "\nsmooth = " << t.loss.smooth << "\nstage_weights = ";
  for (std::size_t i = 0; i < 5; ++i) o << (i ? "," : "") << t.loss.stage_weights[i];
  o << "\nepochs = " << t.epochs << "\nbatch_size = " << t.batch_size << "\neval_batch_size = " << t.eval_batch_size
    << "\nlr = " << t.optim.lr << "\nweight_decay = " << t.optim.weight_decay << "\nt_max = " << t.t_max
    << "\neta_min = " << t.eta_min << "\nlr_schedule = " << to_string(t.schedule) << "\nseed = " << t.seed
    << "\naugment = " << (t.augment ? "true" : "false") << "\nrotation_min = " << t.augmentation.rotation_min
    << "\nrotation_max = " << t.augmentation.rotation_max << "\nthreshold = " << t.threshold
    << "\nsplit_ratio = " << c.split_ratio << "\nmanifest = " << c.manifest.string()
    << "\noutput_dir = " << t.output_dir.string() << '\n';
  return o.str();
}

// Builds the configured network with seeded initial weights.
inline std::unique_ptr<SegmentationModel<float>> make_model(const RunConfig& c) {
  auto model = build_variant<float>(c.net);
  init_params(model->params(), derive_seed(c.train.seed, "init"));
  return model;
}

}  // namespace ucm

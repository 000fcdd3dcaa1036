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


// Command-line front end: train, eval, predict, profile, ablate, split,
// synth.
//
// Exit codes: 0 success, 1 unexpected failure, 2 config or usage error,
// 3 data error, 4 numeric abort.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ucmnet/ucmnet.hpp"

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

ucm::RunConfig load_run_config(const std::string& path) {
  return path.empty() ? ucm::RunConfig{} : ucm::load_config(path);
}

ucm::DatasetManifest load_manifest(const ucm::RunConfig& cfg) {
  if (cfg.manifest.empty()) throw ucm::ConfigError("no manifest given (set `manifest` or pass --manifest)");
  if (!fs::exists(cfg.manifest)) throw ucm::DataError("manifest not found: " + cfg.manifest.string());
  return ucm::make_split(ucm::read_manifest(cfg.manifest), cfg.split_ratio, cfg.train.seed);
}

std::unique_ptr<ucm::SegmentationModel<float>> load_model(const ucm::RunConfig& cfg, const std::string& weights) {
  auto model = ucm::build_variant<float>(cfg.net);
  ucm::load_weights(weights, model->params());
  model->set_training(false);
  return model;
}

int cmd_train(const ucm::RunConfig& cfg) {
  const auto manifest = load_manifest(cfg);
  const ucm::SegmentationDataset data(manifest, cfg.net.input_size);
  std::cout << "train " << data.split("train").size() << " / test " << data.split("test").size() << " samples, "
            << cfg.train.epochs << " epochs, output " << cfg.train.output_dir.string() << '\n';
  auto model = ucm::make_model(cfg);
  const auto result = ucm::train(*model, data, cfg.train, &std::cout);
  std::cout << "best test mIoU " << result.best_miou << " at epoch " << result.best_epoch << '\n';
  return kExitOk;
}

int cmd_eval(const ucm::RunConfig& cfg, const std::string& weights, const std::string& split,
             const std::string& out_csv) {
  const auto manifest = load_manifest(cfg);
  if (manifest.count(split) == 0) throw ucm::DataError("split '" + split + "' of the manifest is empty");
  const ucm::SegmentationDataset data(manifest, cfg.net.input_size);
  auto model = load_model(cfg, weights);
  const auto report = ucm::evaluate(*model, data, split, cfg.train.threshold, cfg.train.loss.smooth,
                                    cfg.train.eval_batch_size);
  ucm::write_metrics_csv(std::cout, {report});
  if (!out_csv.empty()) {
    std::ofstream out(out_csv);
    if (!out) throw ucm::DataError("cannot write " + out_csv);
    ucm::write_metrics_csv(out, {report});
  }
  return kExitOk;
}

int cmd_predict(const ucm::RunConfig& cfg, const std::string& weights, const std::string& image_path,
                const std::string& out_path) {
  cv::Mat bgr = cv::imread(image_path, cv::IMREAD_COLOR);
  if (bgr.empty()) throw ucm::DataError("cannot read image " + image_path);
  auto model = load_model(cfg, weights);
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  const int size = static_cast<int>(cfg.net.input_size);
  if (rgb.rows != size || rgb.cols != size) cv::resize(rgb, rgb, cv::Size(size, size), 0, 0, cv::INTER_LINEAR);
  const ucm::Tensor<float> x = ucm::image_to_tensor(rgb);
  ucm::NoGradGuard no_grad;
  const auto probs = ucm::sigmoid(model->forward(ucm::reshape(x, {1, 3, x.dim(1), x.dim(2)})).logits);
  cv::Mat mask(size, size, CV_8U);
  for (int i = 0; i < size * size; ++i) {
    mask.data[i] = probs[static_cast<std::size_t>(i)] >= cfg.train.threshold ? 255 : 0;
  }
  if (mask.size() != bgr.size()) cv::resize(mask, mask, bgr.size(), 0, 0, cv::INTER_NEAREST);
  bool ok = false;
  try {
    ok = cv::imwrite(out_path, mask);
  } catch (const cv::Exception&) {
    ok = false;
  }
  if (!ok) throw ucm::DataError("cannot write mask " + out_path);
  std::cout << "wrote " << out_path << " (" << mask.cols << "x" << mask.rows << ")\n";
  return kExitOk;
}

int cmd_profile(const ucm::RunConfig& cfg, const std::string& csv_path) {
  auto model = ucm::build_variant<float>(cfg.net);
  const std::size_t s = cfg.net.input_size;
  const auto report = ucm::count_flops(*model, {1, cfg.net.input_channels, s, s});
  std::cout << "variant " << ucm::to_string(cfg.net.block_kind) << '\n';
  ucm::write_cost_text(std::cout, report);
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    if (!out) throw ucm::DataError("cannot write " + csv_path);
    ucm::write_cost_csv(out, report);
  }
  return kExitOk;
}

int cmd_ablate(ucm::RunConfig cfg) {
  const std::size_t s = cfg.net.input_size;
  std::cout << std::left << std::setw(24) << "variant" << std::right << std::setw(10) << "params" << std::setw(12)
            << "GFLOPs" << std::setw(14) << "GFLOPs(MAC)" << '\n';
  for (auto kind : {ucm::BlockKind::variant_a_doubleconv, ucm::BlockKind::variant_b_conv1x1,
                    ucm::BlockKind::variant_c_ucm}) {
    cfg.net.block_kind = kind;
    auto model = ucm::build_variant<float>(cfg.net);
    const auto r = ucm::count_flops(*model, {1, cfg.net.input_channels, s, s});
    std::ostringstream line;
    line << std::left << std::setw(24) << ucm::to_string(kind) << std::right << std::setw(10) << r.total_params
         << std::fixed << std::setprecision(4) << std::setw(12) << r.gflops() << std::setw(14) << r.gflops_mac()
         << '\n';
    std::cout << line.str();
  }
  return kExitOk;
}

int cmd_split(const std::string& in, const std::string& out, double ratio, std::uint64_t seed) {
  auto manifest = ucm::read_manifest(in);
  for (auto& r : manifest.records) r.split.clear();
  manifest = ucm::make_split(std::move(manifest), ratio, seed);
  ucm::write_manifest(out, manifest);
  std::cout << "train " << manifest.count("train") << " / test " << manifest.count("test") << " -> " << out << '\n';
  return kExitOk;
}

int cmd_synth(const std::string& dir, std::size_t count, std::size_t size, std::uint64_t seed, bool both) {
  const std::vector<std::string> splits = both ? std::vector<std::string>{"train", "test"} : std::vector<std::string>{""};
  const auto manifest = ucm::write_synthetic_dataset(dir, count, size, seed, splits);
  std::cout << "wrote " << count << " samples and " << manifest.string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UCM-Net segmentation engine"};
  app.require_subcommand(1);

  std::string config_path, manifest, output_dir, weights, split = "test", out_csv, image, out_path, csv_path;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "run config (key = value)")->check(CLI::ExistingFile);
  };

  auto* train = app.add_subcommand("train", "train a model and write history + checkpoints");
  add_config(train);
  train->add_option("--manifest", manifest, "dataset manifest CSV (overrides config)");
  train->add_option("--epochs", epochs, "override epoch count");
  train->add_option("--seed", seed, "override seed");
  train->add_option("-o,--output-dir", output_dir, "override output directory");

  auto* eval = app.add_subcommand("eval", "evaluate weights on a manifest split");
  add_config(eval);
  eval->add_option("-w,--weights", weights, "weight file")->required();
  eval->add_option("--manifest", manifest, "dataset manifest CSV (overrides config)");
  eval->add_option("--split", split, "split to evaluate")->check(CLI::IsMember({"train", "test"}));
  eval->add_option("--out", out_csv, "metrics CSV path");

  auto* predict = app.add_subcommand("predict", "write a binary mask PNG for one image");
  add_config(predict);
  predict->add_option("-w,--weights", weights, "weight file")->required();
  predict->add_option("-i,--image", image, "input image")->required();
  predict->add_option("-o,--out", out_path, "output PNG")->required();

  auto* profile = app.add_subcommand("profile", "parameter, FLOP and memory report");
  add_config(profile);
  profile->add_option("--csv", csv_path, "per-layer CSV path");

  auto* ablate = app.add_subcommand("ablate", "params and GFLOPs of variants A, B, C");
  add_config(ablate);

  std::string split_in, split_out;
  double ratio = 0.7;
  std::uint64_t split_seed = 42;
  auto* split_cmd = app.add_subcommand("split", "assign a seeded train/test split to a manifest");
  split_cmd->add_option("--manifest", split_in, "input manifest")->required();
  split_cmd->add_option("-o,--out", split_out, "output manifest")->required();
  split_cmd->add_option("--ratio", ratio, "train fraction");
  split_cmd->add_option("--seed", split_seed, "shuffle seed");

  std::string synth_dir;
  std::size_t synth_count = 8, synth_size = 64;
  std::uint64_t synth_seed = 1;
  bool synth_both = false;
  auto* synth = app.add_subcommand("synth", "generate a synthetic circle-mask dataset");
  synth->add_option("-o,--out", synth_dir, "output directory")->required();
  synth->add_option("--count", synth_count, "number of samples");
  synth->add_option("--size", synth_size, "image side in pixels");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_flag("--train-and-test", synth_both, "list every sample under both splits (overfit check)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    ucm::RunConfig cfg = load_run_config(config_path);
    if (!manifest.empty()) cfg.manifest = manifest;
    if (!output_dir.empty()) cfg.train.output_dir = output_dir;
    if (epochs) cfg.train.epochs = *epochs;
    if (seed) cfg.train.seed = *seed;
    ucm::validate(cfg);
    if (*train) return cmd_train(cfg);
    if (*eval) return cmd_eval(cfg, weights, split, out_csv);
    if (*predict) return cmd_predict(cfg, weights, image, out_path);
    if (*profile) return cmd_profile(cfg, csv_path);
    if (*ablate) return cmd_ablate(cfg);
    if (*split_cmd) return cmd_split(split_in, split_out, ratio, split_seed);
    if (*synth) return cmd_synth(synth_dir, synth_count, synth_size, synth_seed, synth_both);
  } catch (const ucm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ucm::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ucm::NumericAbort& e) {
    std::cerr << "numeric abort: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ucm::FormatError& e) {
    std::cerr << "weight file error: " << e.what() << '\n';
    return kExitData;
  } catch (const ucm::ShapeError& e) {
    std::cerr << "architecture mismatch: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

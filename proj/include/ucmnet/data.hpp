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
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "ucmnet/seed.hpp"
#include "ucmnet/tensor.hpp"

namespace ucm {

namespace fs = std::filesystem;

// Unreadable or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ManifestRecord {
  std::string image;
  std::string mask;
  std::string split;  // "train", "test", or empty when unassigned
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  fs::path root;  // relative paths resolve against this directory

  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : root / path;
  }

  std::size_t count(const std::string& split) const {
    std::size_t n = 0;
    for (const auto& r : records) n += r.split == split;
    return n;
  }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace detail

// CSV with header `image,mask,split` (split column optional). Paths are
// relative to the manifest's directory unless absolute.
inline DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  DatasetManifest m;
  m.root = path.parent_path();
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty manifest " + path.string());
  const auto header = detail::split_csv_line(line);
  if (header.size() < 2 || header[0] != "image" || header[1] != "mask" || (header.size() > 2 && header[2] != "split")) {
    throw DataError("manifest " + path.string() + " must start with header image,mask,split");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() < 2 || cells.size() > 3) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 2 or 3 columns");
    }
    ManifestRecord r{cells[0], cells[1], cells.size() == 3 ? cells[2] : ""};
    if (!r.split.empty() && r.split != "train" && r.split != "test") {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": unknown split '" + r.split + "'");
    }
    for (const auto& p : {r.image, r.mask}) {
      if (!fs::exists(m.resolve(p))) throw DataError("missing data file " + m.resolve(p).string());
    }
    m.records.push_back(std::move(r));
  }
  if (m.records.empty()) throw DataError("manifest " + path.string() + " has no records");
  return m;
}

inline void write_manifest(const fs::path& path, const DatasetManifest& m) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << "image,mask,split\n";
  for (const auto& r : m.records) out << r.image << ',' << r.mask << ',' << r.split << '\n';
}

// Assigns unassigned records: seeded shuffle, first ceil(ratio * n) to train.
// Records that already carry a split keep it.
inline DatasetManifest make_split(DatasetManifest m, double ratio, std::uint64_t seed) {
  if (m.records.empty()) throw DataError("make_split: empty record list");
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw std::invalid_argument("split ratio must lie in [0,1]");
  std::vector<std::size_t> open;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    if (m.records[i].split.empty()) open.push_back(i);
  }
  std::mt19937_64 rng(derive_seed(seed, "split"));
  for (std::size_t i = open.size(); i > 1; --i) {
    std::swap(open[i - 1], open[rng() % i]);
  }
  // the small slack keeps 0.7 * 400 at 280 despite binary rounding
  const auto n_train = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(open.size()) - 1e-9));
  for (std::size_t k = 0; k < open.size(); ++k) m.records[open[k]].split = k < n_train ? "train" : "test";
  return m;
}

// ---------------------------------------------------------------------------

struct Sample {
  Tensor<float> image;  // [3,H,W] in [0,1]
  Tensor<float> mask;   // [1,H,W] in {0,1}
  std::string id;
};

// 8-bit RGB image and {0,255} mask at the working resolution.
struct RawSample {
  cv::Mat rgb;
  cv::Mat mask;
  std::string id;
};

inline RawSample load_raw(const fs::path& image_path, const fs::path& mask_path, std::size_t size) {
  cv::Mat bgr = cv::imread(image_path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw DataError("cannot read image " + image_path.string());
  cv::Mat mask = cv::imread(mask_path.string(), cv::IMREAD_GRAYSCALE);
  if (mask.empty()) throw DataError("cannot read mask " + mask_path.string());
  RawSample s;
  s.id = image_path.stem().string();
  cv::cvtColor(bgr, s.rgb, cv::COLOR_BGR2RGB);
  const cv::Size target(static_cast<int>(size), static_cast<int>(size));
  if (s.rgb.size() != target) cv::resize(s.rgb, s.rgb, target, 0, 0, cv::INTER_LINEAR);
  if (mask.size() != target) cv::resize(mask, mask, target, 0, 0, cv::INTER_NEAREST);
  cv::threshold(mask, s.mask, 127, 255, cv::THRESH_BINARY);
  return s;
}

inline Tensor<float> image_to_tensor(const cv::Mat& rgb8) {
  const auto h = static_cast<std::size_t>(rgb8.rows), w = static_cast<std::size_t>(rgb8.cols);
  std::vector<float> data(3 * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    const auto* row = rgb8.ptr<cv::Vec3b>(static_cast<int>(y));
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) data[(c * h + y) * w + x] = static_cast<float>(row[x][c]) / 255.0f;
    }
  }
  return Tensor<float>({3, h, w}, std::move(data));
}

inline Tensor<float> mask_to_tensor(const cv::Mat& mask8) {
  const auto h = static_cast<std::size_t>(mask8.rows), w = static_cast<std::size_t>(mask8.cols);
  std::vector<float> data(h * w);
  for (std::size_t y = 0; y < h; ++y) {
    const auto* row = mask8.ptr<unsigned char>(static_cast<int>(y));
    for (std::size_t x = 0; x < w; ++x) data[y * w + x] = row[x] > 127 ? 1.0f : 0.0f;
  }
  return Tensor<float>({1, h, w}, std::move(data));
}

inline Sample to_sample(const RawSample& raw) { return {image_to_tensor(raw.rgb), mask_to_tensor(raw.mask), raw.id}; }

// Resized to size x size; image scaled to [0,1], mask binarized at 127.
inline Sample load_sample(const fs::path& image_path, const fs::path& mask_path, std::size_t size = 256) {
  return to_sample(load_raw(image_path, mask_path, size));
}

// ---------------------------------------------------------------------------

struct AugmentConfig {
  double hflip_p = 0.5;
  double vflip_p = 0.5;
  double rotation_min = 0.0;    // degrees
  double rotation_max = 360.0;  // exclusive
};

namespace detail {

// Planes of a [C,H,W] tensor as float Mats sharing nothing with the tensor.
inline std::vector<cv::Mat> tensor_planes(const Tensor<float>& t) {
  const int h = static_cast<int>(t.dim(1)), w = static_cast<int>(t.dim(2));
  std::vector<cv::Mat> planes;
  for (std::size_t c = 0; c < t.dim(0); ++c) {
    cv::Mat m(h, w, CV_32F);
    std::copy_n(t.data().data() + c * h * w, static_cast<std::size_t>(h * w), m.ptr<float>());
    planes.push_back(m);
  }
  return planes;
}

inline Tensor<float> planes_tensor(const std::vector<cv::Mat>& planes) {
  const auto h = static_cast<std::size_t>(planes[0].rows), w = static_cast<std::size_t>(planes[0].cols);
  std::vector<float> data;
  data.reserve(planes.size() * h * w);
  for (const auto& m : planes) {
    cv::Mat c = m.isContinuous() ? m : m.clone();
    data.insert(data.end(), c.ptr<float>(), c.ptr<float>() + h * w);
  }
  return Tensor<float>({planes.size(), h, w}, std::move(data));
}

inline void transform_planes(std::vector<cv::Mat>& planes, bool hflip, bool vflip, double angle, int interp) {
  for (auto& m : planes) {
    if (hflip) cv::flip(m, m, 1);
    if (vflip) cv::flip(m, m, 0);
    if (angle != 0.0) {
      const cv::Point2f center(static_cast<float>(m.cols - 1) / 2.0f, static_cast<float>(m.rows - 1) / 2.0f);
      const cv::Mat rot = cv::getRotationMatrix2D(center, angle, 1.0);
      cv::Mat out;
      cv::warpAffine(m, out, rot, m.size(), interp, cv::BORDER_CONSTANT, cv::Scalar(0));
      m = out;
    }
  }
}

}  // namespace detail

// Random flips and rotation, identical geometry for image and mask. Three
// draws per call in a fixed order, so the stream stays aligned.
template <typename Engine>
Sample augment(const Sample& s, Engine& rng, const AugmentConfig& cfg = {}) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool hflip = unit(rng) < cfg.hflip_p;
  const bool vflip = unit(rng) < cfg.vflip_p;
  const double u = unit(rng);
  const double angle = cfg.rotation_min + u * (cfg.rotation_max - cfg.rotation_min);
  auto img = detail::tensor_planes(s.image);
  auto msk = detail::tensor_planes(s.mask);
  detail::transform_planes(img, hflip, vflip, angle, cv::INTER_LINEAR);
  detail::transform_planes(msk, hflip, vflip, angle, cv::INTER_NEAREST);
  return {detail::planes_tensor(img), detail::planes_tensor(msk), s.id};
}

// ---------------------------------------------------------------------------

struct Batch {
  Tensor<float> images;  // [B,3,H,W]
  Tensor<float> masks;   // [B,1,H,W]
  std::vector<std::string> ids;
};

inline Batch collate(const std::vector<Sample>& samples) {
  if (samples.empty()) throw std::invalid_argument("collate: empty batch");
  const Shape is = samples[0].image.shape(), ms = samples[0].mask.shape();
  std::vector<float> images, masks;
  Batch b;
  for (const auto& s : samples) {
    if (s.image.shape() != is || s.mask.shape() != ms) throw ShapeError("collate: samples differ in shape");
    images.insert(images.end(), s.image.data().begin(), s.image.data().end());
    masks.insert(masks.end(), s.mask.data().begin(), s.mask.data().end());
    b.ids.push_back(s.id);
  }
  const std::size_t n = samples.size();
  b.images = Tensor<float>({n, is[0], is[1], is[2]}, std::move(images));
  b.masks = Tensor<float>({n, ms[0], ms[1], ms[2]}, std::move(masks));
  return b;
}

// Index groups for one pass over n samples. With a shuffle seed the order is
// a seeded permutation; the last partial batch is kept.
inline std::vector<std::vector<std::size_t>> batch_plan(std::size_t n, std::size_t batch_size,
                                                        std::optional<std::uint64_t> shuffle_seed) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (shuffle_seed) {
    std::mt19937_64 rng(*shuffle_seed);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  }
  std::vector<std::vector<std::size_t>> plan;
  for (std::size_t start = 0; start < n; start += batch_size) {
    plan.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                      order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
  }
  return plan;
}

// Decoded, resized samples of one manifest, kept as 8-bit in memory.
class SegmentationDataset {
 public:
  SegmentationDataset(const DatasetManifest& manifest, std::size_t size) : size_(size) {
    for (const auto& r : manifest.records) {
      auto raw = load_raw(manifest.resolve(r.image), manifest.resolve(r.mask), size);
      (r.split == "train" ? train_ : test_).push_back(std::move(raw));
    }
  }

  const std::vector<RawSample>& split(const std::string& name) const {
    if (name == "train") return train_;
    if (name == "test") return test_;
    throw std::invalid_argument("unknown split '" + name + "'");
  }

  std::size_t size() const { return size_; }

  // Training batches for one epoch: per-epoch shuffle, per-sample augment
  // streams keyed by (epoch, sample index) so the result does not depend on
  // iteration order.
  std::vector<std::vector<std::size_t>> train_plan(std::size_t batch_size, std::uint64_t seed, std::size_t epoch) const {
    return batch_plan(train_.size(), batch_size, derive_seed(seed, "shuffle", epoch));
  }

  Batch train_batch(const std::vector<std::size_t>& indices, std::uint64_t seed, std::size_t epoch,
                    const AugmentConfig& aug, bool augment_on = true) const {
    std::vector<Sample> samples;
    for (auto i : indices) {
      Sample s = to_sample(train_.at(i));
      if (augment_on) {
        std::mt19937_64 rng(derive_seed(seed, "augment/" + std::to_string(epoch), i));
        s = augment(s, rng, aug);
      }
      samples.push_back(std::move(s));
    }
    return collate(samples);
  }

  Batch batch(const std::string& split_name, const std::vector<std::size_t>& indices) const {
    std::vector<Sample> samples;
    for (auto i : indices) samples.push_back(to_sample(split(split_name).at(i)));
    return collate(samples);
  }

 private:
  std::size_t size_;
  std::vector<RawSample> train_, test_;
};

// Synthetic lesion-like circles on a skin-toned background, written as PNGs
// plus a manifest listing every sample under `split`.
inline fs::path write_synthetic_dataset(const fs::path& dir, std::size_t count, std::size_t size, std::uint64_t seed,
                                        const std::vector<std::string>& splits = {"train"}) {
  fs::create_directories(dir);
  std::mt19937_64 rng(derive_seed(seed, "synthetic"));
  const double s = static_cast<double>(size);
  std::uniform_real_distribution<double> centre(0.375 * s, 0.625 * s), radius(0.1875 * s, 0.3125 * s);
  std::normal_distribution<double> noise(0.0, 0.05);
  DatasetManifest m;
  for (std::size_t k = 0; k < count; ++k) {
    const double cy = centre(rng), cx = centre(rng), r = radius(rng);
    cv::Mat bgr(static_cast<int>(size), static_cast<int>(size), CV_8UC3);
    cv::Mat mask(static_cast<int>(size), static_cast<int>(size), CV_8U);
    for (int y = 0; y < bgr.rows; ++y) {
      for (int x = 0; x < bgr.cols; ++x) {
        const bool in = (y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r;
        mask.at<unsigned char>(y, x) = in ? 255 : 0;
        const double rgb[3] = {in ? 0.45 : 0.85, in ? 0.25 : 0.65, in ? 0.15 : 0.55};
        for (int c = 0; c < 3; ++c) {
          const double v = std::clamp(rgb[c] + noise(rng), 0.0, 1.0);
          bgr.at<cv::Vec3b>(y, x)[2 - c] = static_cast<unsigned char>(std::lround(v * 255.0));
        }
      }
    }
    const std::string stem = "sample_" + std::to_string(k);
    cv::imwrite((dir / (stem + ".png")).string(), bgr);
    cv::imwrite((dir / (stem + "_mask.png")).string(), mask);
    for (const auto& split : splits) m.records.push_back({stem + ".png", stem + "_mask.png", split});
  }
  const fs::path manifest = dir / "manifest.csv";
  write_manifest(manifest, m);
  return manifest;
}

}  // namespace ucm

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

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "ucmnet/model.hpp"
#include "ucmnet/optim.hpp"

namespace ucm {

// Weight file layout, all integers little-endian:
//   "UCMW" | u32 version (1) | u32 count |
//   count x { u32 name_len | name | u8 dtype | u8 rank | u32 dims[rank] | payload }
// dtype 0 is f32. dtype 1 (u32) only appears in checkpoints, for counters.

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kWeightFileVersion = 1;

enum class DType : std::uint8_t { f32 = 0, u32 = 1 };

struct WeightEntry {
  std::string name;
  DType dtype = DType::f32;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint32_t> words;  // raw payload, one 32-bit word per element

  std::size_t count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("truncated weight file");
  }
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<unsigned char> encode_weights(const std::vector<WeightEntry>& entries) {
  std::vector<unsigned char> out{'U', 'C', 'M', 'W'};
  detail::put_u32(out, kWeightFileVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.words.size() != e.count()) throw FormatError("payload size mismatch for " + e.name);
    detail::put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    out.push_back(static_cast<unsigned char>(e.dtype));
    out.push_back(static_cast<unsigned char>(e.dims.size()));
    for (auto d : e.dims) detail::put_u32(out, d);
    for (auto w : e.words) detail::put_u32(out, w);
  }
  return out;
}

inline std::vector<WeightEntry> decode_weights(const std::vector<unsigned char>& bytes) {
  detail::Reader r(bytes);
  if (r.str(4) != "UCMW") throw FormatError("not a weight file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kWeightFileVersion) {
    throw FormatError("unsupported weight file version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  std::vector<WeightEntry> entries;
  for (std::uint32_t k = 0; k < count; ++k) {
    WeightEntry e;
    e.name = r.str(r.u32());
    const auto dtype = r.u8();
    if (dtype > 1) throw FormatError("unknown dtype code " + std::to_string(dtype) + " for " + e.name);
    e.dtype = static_cast<DType>(dtype);
    const auto rank = r.u8();
    for (int i = 0; i < rank; ++i) e.dims.push_back(r.u32());
    e.words.resize(e.count());
    for (auto& w : e.words) w = r.u32();
    for (const auto& prev : entries) {
      if (prev.name == e.name) throw FormatError("duplicate tensor name " + e.name);
    }
    entries.push_back(std::move(e));
  }
  if (!r.done()) throw FormatError("trailing bytes after last tensor");
  return entries;
}

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

inline WeightEntry f32_entry(const std::string& name, const Shape& shape, std::span<const float> values) {
  WeightEntry e{name, DType::f32, {}, {}};
  for (auto d : shape) e.dims.push_back(static_cast<std::uint32_t>(d));
  e.words.reserve(values.size());
  for (float v : values) e.words.push_back(std::bit_cast<std::uint32_t>(v));
  return e;
}

inline WeightEntry u32_entry(const std::string& name, std::vector<std::uint32_t> values) {
  return {name, DType::u32, {static_cast<std::uint32_t>(values.size())}, std::move(values)};
}

inline std::vector<WeightEntry> store_entries(const ParamStore<float>& store) {
  std::vector<WeightEntry> out;
  for (const auto& e : store.entries()) out.push_back(f32_entry(e.name, e.tensor.shape(), e.tensor.data()));
  return out;
}

// Copies f32 entries into the store; names, order and shapes must match the
// model exactly. The first mismatch is reported by name.
inline void load_store_entries(ParamStore<float>& store, const std::vector<WeightEntry>& entries,
                               std::size_t offset = 0) {
  auto& target = store.entries();
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (offset + i >= entries.size()) throw ShapeError("weight file is missing tensor " + target[i].name);
    const auto& src = entries[offset + i];
    const auto& dst = target[i];
    Shape dims(src.dims.begin(), src.dims.end());
    if (src.name != dst.name || src.dtype != DType::f32 || dims != dst.tensor.shape()) {
      throw ShapeError("tensor " + dst.name + " " + to_string(dst.tensor.shape()) + " does not match file entry " +
                       src.name + " " + to_string(dims));
    }
  }
  for (std::size_t i = 0; i < target.size(); ++i) {
    auto data = target[i].tensor.mutable_data();
    const auto& words = entries[offset + i].words;
    for (std::size_t k = 0; k < data.size(); ++k) data[k] = std::bit_cast<float>(words[k]);
  }
}

inline void save_weights(const std::filesystem::path& path, const ParamStore<float>& store) {
  write_file_bytes(path, encode_weights(store_entries(store)));
}

inline void load_weights(const std::filesystem::path& path, ParamStore<float>& store) {
  const auto entries = decode_weights(read_file_bytes(path));
  load_store_entries(store, entries);
  if (entries.size() != store.entries().size()) {
    throw ShapeError("weight file has extra tensor " + entries[store.entries().size()].name);
  }
}

// Checkpoint: model tensors, then "optim.m.<name>" and "optim.v.<name>" per
// learnable tensor, then u32 counters "optim.step" and "train.epoch".
struct TrainingState {
  std::uint64_t epoch = 0;  // epochs completed
};

inline void save_checkpoint(const std::filesystem::path& path, const ParamStore<float>& store,
                            const AdamW<float>& optim, const TrainingState& state) {
  auto entries = store_entries(store);
  for (std::size_t i = 0; i < optim.size(); ++i) {
    const auto& m = optim.first_moment(i);
    const Shape shape{m.size()};
    entries.push_back(f32_entry("optim.m." + optim.name(i), shape, m));
    entries.push_back(f32_entry("optim.v." + optim.name(i), shape, optim.second_moment(i)));
  }
  auto split64 = [](std::uint64_t v) {
    return std::vector<std::uint32_t>{static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(v >> 32)};
  };
  entries.push_back(u32_entry("optim.step", split64(optim.step_count())));
  entries.push_back(u32_entry("train.epoch", split64(state.epoch)));
  write_file_bytes(path, encode_weights(entries));
}

inline TrainingState load_checkpoint(const std::filesystem::path& path, ParamStore<float>& store,
                                     AdamW<float>& optim) {
  const auto entries = decode_weights(read_file_bytes(path));
  load_store_entries(store, entries);
  std::size_t k = store.entries().size();
  auto expect = [&](const std::string& name, std::size_t n, DType dtype) -> const WeightEntry& {
    if (k >= entries.size()) throw FormatError("checkpoint ends before " + name);
    const auto& e = entries[k++];
    if (e.name != name || e.dtype != dtype || e.count() != n) {
      throw ShapeError("checkpoint entry " + e.name + " does not match expected " + name);
    }
    return e;
  };
  for (std::size_t i = 0; i < optim.size(); ++i) {
    auto& m = optim.first_moment(i);
    auto& v = optim.second_moment(i);
    const auto& em = expect("optim.m." + optim.name(i), m.size(), DType::f32);
    for (std::size_t j = 0; j < m.size(); ++j) m[j] = std::bit_cast<float>(em.words[j]);
    const auto& ev = expect("optim.v." + optim.name(i), v.size(), DType::f32);
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = std::bit_cast<float>(ev.words[j]);
  }
  auto join64 = [](const WeightEntry& e) { return e.words[0] | (static_cast<std::uint64_t>(e.words[1]) << 32); };
  optim.set_step_count(join64(expect("optim.step", 2, DType::u32)));
  TrainingState state{join64(expect("train.epoch", 2, DType::u32))};
  if (k != entries.size()) throw FormatError("unexpected trailing entries in checkpoint");
  return state;
}

}  // namespace ucm

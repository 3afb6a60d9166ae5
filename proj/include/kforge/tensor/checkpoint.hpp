// Copyright 2026 The kforge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Checkpoint layout: a directory holding
//   manifest.txt  "KFORGE-CKPT-1", then "@key = value" metadata lines, then
//                 one "path = shape=[..] dtype=f32|f64 offset=<bytes>" line
//                 per tensor;
//   values.bin    the raw little-endian values, concatenated.

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "kforge/tensor/parameter.hpp"

namespace kforge {

inline constexpr const char* kCheckpointHeader = "KFORGE-CKPT-1";

/// A named tensor as stored on disk (always kept at 64-bit precision in
/// memory; the on-disk dtype records the precision it was saved from).
struct StoredTensor {
  std::string name;
  Shape shape;
  std::string dtype;
  std::vector<double> values;
};

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<StoredTensor> tensors;

  const StoredTensor* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }

  template <typename T>
  void add(const std::string& name, const Shape& shape, const std::vector<T>& values) {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    tensors.push_back({name, shape, std::is_same_v<T, float> ? "f32" : "f64",
                       std::vector<double>(values.begin(), values.end())});
  }

  template <typename T>
  void add_parameters(const ParameterList<T>& params, const std::string& prefix = "") {
    for (auto* p : params) add(prefix + p->name, p->value.shape(), p->value.values());
  }

  /// Copies stored values into `params`; every parameter must be present
  /// with a matching shape.
  template <typename T>
  void load_parameters(const ParameterList<T>& params, const std::string& prefix = "") const {
    for (auto* p : params) {
      const auto* st = find(prefix + p->name);
      KFORGE_CHECK(st != nullptr, ParseError, "checkpoint has no tensor '", prefix + p->name, "'");
      KFORGE_CHECK(st->shape == p->value.shape(), ShapeError, "checkpoint tensor '", st->name, "' has shape ",
                   shape_str(st->shape), ", model expects ", shape_str(p->value.shape()));
      auto dst = p->value.mutable_data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(st->values[i]);
    }
  }
};

namespace detail {

template <typename U>
U to_little_endian(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(U)];
    std::memcpy(b, &v, sizeof(U));
    std::reverse(b, b + sizeof(U));
    std::memcpy(&v, b, sizeof(U));
  }
  return v;
}

inline Shape parse_shape(const std::string& text) {
  KFORGE_CHECK(text.size() >= 2 && text.front() == '[' && text.back() == ']', ParseError, "bad shape '", text, "'");
  Shape shape;
  std::stringstream ss(text.substr(1, text.size() - 2));
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) shape.push_back(std::stoll(item));
  return shape;
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt");
  std::ofstream blob(dir / "values.bin", std::ios::binary);
  KFORGE_CHECK(manifest && blob, Error, "cannot write checkpoint to ", dir.string());
  manifest << kCheckpointHeader << "\n";
  for (const auto& [k, v] : ckpt.meta) manifest << "@" << k << " = " << v << "\n";
  std::uint64_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    manifest << t.name << " = shape=" << shape_str(t.shape) << " dtype=" << t.dtype << " offset=" << offset << "\n";
    for (double v : t.values) {
      if (t.dtype == "f32") {
        std::uint32_t bits;
        const float f = static_cast<float>(v);
        std::memcpy(&bits, &f, 4);
        bits = detail::to_little_endian(bits);
        blob.write(reinterpret_cast<const char*>(&bits), 4);
        offset += 4;
      } else {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        bits = detail::to_little_endian(bits);
        blob.write(reinterpret_cast<const char*>(&bits), 8);
        offset += 8;
      }
    }
  }
  KFORGE_CHECK(manifest.good() && blob.good(), Error, "checkpoint write failed in ", dir.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.txt");
  KFORGE_CHECK(manifest.good(), ParseError, "no checkpoint manifest in ", dir.string());
  std::ifstream blob(dir / "values.bin", std::ios::binary);
  KFORGE_CHECK(blob.good(), ParseError, "no checkpoint value blob in ", dir.string());
  const std::string bytes((std::istreambuf_iterator<char>(blob)), std::istreambuf_iterator<char>());

  Checkpoint ckpt;
  std::string line;
  std::getline(manifest, line);
  KFORGE_CHECK(line == kCheckpointHeader, ParseError, "unsupported checkpoint header '", line, "'");
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    const auto eq = line.find(" = ");
    KFORGE_CHECK(eq != std::string::npos, ParseError, "malformed manifest line '", line, "'");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 3);
    if (key.front() == '@') {
      ckpt.meta[key.substr(1)] = value;
      continue;
    }
    StoredTensor t;
    t.name = key;
    std::uint64_t offset = 0;
    std::stringstream ss(value);
    std::string field;
    while (ss >> field) {
      if (field.rfind("shape=", 0) == 0) t.shape = detail::parse_shape(field.substr(6));
      else if (field.rfind("dtype=", 0) == 0) t.dtype = field.substr(6);
      else if (field.rfind("offset=", 0) == 0) offset = std::stoull(field.substr(7));
    }
    KFORGE_CHECK(t.dtype == "f32" || t.dtype == "f64", ParseError, "unknown dtype for '", key, "'");
    const std::size_t width = t.dtype == "f32" ? 4 : 8;
    const auto n = static_cast<std::size_t>(numel_of(t.shape));
    KFORGE_CHECK(offset + n * width <= bytes.size(), ParseError, "value blob truncated at '", key, "'");
    t.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const char* p = bytes.data() + offset + i * width;
      if (width == 4) {
        std::uint32_t bits;
        std::memcpy(&bits, p, 4);
        bits = detail::to_little_endian(bits);
        float f;
        std::memcpy(&f, &bits, 4);
        t.values[i] = f;
      } else {
        std::uint64_t bits;
        std::memcpy(&bits, p, 8);
        bits = detail::to_little_endian(bits);
        std::memcpy(&t.values[i], &bits, 8);
      }
    }
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

}  // namespace kforge

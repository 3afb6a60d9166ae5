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

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kforge/data/motion.hpp"
#include "kforge/tensor/checkpoint.hpp"

namespace kforge::data {

inline std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ull) {
  const auto* b = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= 1099511628211ull;
  }
  return h;
}

/// Equal-shape labeled sequences with split tags; samples are [S, C, T, N].
struct Dataset {
  std::string skeleton;
  Index channels = 0;
  Index frames = 0;
  Index joints = 0;
  Tensor<float> samples;
  std::vector<Index> labels;
  std::vector<std::string> splits;
  std::vector<std::string> provenance;
  std::string normalization = "none";
  nlohmann::json source = nlohmann::json::object();

  Index size() const { return static_cast<Index>(labels.size()); }

  Index num_classes() const {
    Index k = 0;
    for (Index y : labels) k = std::max(k, y + 1);
    return k;
  }

  std::vector<Index> histogram() const {
    std::vector<Index> h(static_cast<std::size_t>(num_classes()), 0);
    for (Index y : labels) ++h[static_cast<std::size_t>(y)];
    return h;
  }

  void validate() const {
    KFORGE_CHECK(samples.defined() && samples.rank() == 4, ShapeError, "dataset samples must be [S,C,T,N]");
    KFORGE_CHECK(samples.dim(0) == size() && samples.dim(1) == channels && samples.dim(2) == frames &&
                     samples.dim(3) == joints,
                 ShapeError, "dataset tensor ", shape_str(samples.shape()), " disagrees with its header");
    KFORGE_CHECK(static_cast<Index>(splits.size()) == size() && static_cast<Index>(provenance.size()) == size(),
                 ShapeError, "dataset split/provenance lists do not match the sample count");
    for (Index y : labels) KFORGE_CHECK(y >= 0, ConfigError, "negative class id ", y);
    const auto h = histogram();
    for (std::size_t k = 0; k < h.size(); ++k)
      KFORGE_CHECK(h[k] > 0, ConfigError, "class ids are not contiguous: class ", k, " has no samples");
    for (const auto& s : splits)
      KFORGE_CHECK(s == "train" || s == "eval", ConfigError, "unknown split tag '", s, "'");
    KFORGE_CHECK(samples.all_finite(), NumericError, "dataset contains non-finite values");
  }

  MotionSample sample(Index i) const {
    NoGradGuard no_grad;
    MotionSample s;
    s.values = reshape(index_select(samples, {i}), {channels, frames, joints}).detach();
    s.label = labels[static_cast<std::size_t>(i)];
    s.skeleton = skeleton;
    s.provenance = provenance[static_cast<std::size_t>(i)];
    return s;
  }

  /// Indices carrying `split`, or all indices for "all".
  std::vector<Index> indices(const std::string& split) const {
    std::vector<Index> ids;
    for (Index i = 0; i < size(); ++i)
      if (split == "all" || splits[static_cast<std::size_t>(i)] == split) ids.push_back(i);
    return ids;
  }

  std::pair<Tensor<float>, std::vector<Index>> select(const std::vector<Index>& ids) const {
    NoGradGuard no_grad;
    std::vector<Index> y;
    for (Index i : ids) y.push_back(labels[static_cast<std::size_t>(i)]);
    return {index_select(samples, ids), y};
  }

  std::pair<Tensor<float>, std::vector<Index>> split(const std::string& name) const { return select(indices(name)); }

  std::string content_hash() const {
    std::uint64_t h = fnv1a(samples.data().data(), samples.data().size() * sizeof(float));
    h = fnv1a(labels.data(), labels.size() * sizeof(Index), h);
    return hex64(h);
  }

  nlohmann::json manifest() const {
    nlohmann::json entries = nlohmann::json::array();
    for (Index i = 0; i < size(); ++i)
      entries.push_back({{"id", i},
                         {"label", labels[static_cast<std::size_t>(i)]},
                         {"split", splits[static_cast<std::size_t>(i)]},
                         {"provenance", provenance[static_cast<std::size_t>(i)]}});
    return {{"format", "kforge-dataset-1"},
            {"skeleton", skeleton},
            {"channels", channels},
            {"frames", frames},
            {"joints", joints},
            {"classes", num_classes()},
            {"histogram", histogram()},
            {"normalization", normalization},
            {"source", source},
            {"content_hash", content_hash()},
            {"samples", std::move(entries)}};
  }

  std::string manifest_hash() const {
    const auto s = manifest().dump();
    return hex64(fnv1a(s.data(), s.size()));
  }

  static Dataset from_samples(const std::vector<MotionSample>& items, std::vector<std::string> split_tags,
                              std::string normalization, nlohmann::json source = nlohmann::json::object()) {
    KFORGE_CHECK(!items.empty(), ConfigError, "dataset is empty");
    KFORGE_CHECK(split_tags.size() == items.size(), ShapeError, "one split tag per sample required");
    Dataset d;
    d.skeleton = items[0].skeleton;
    d.channels = items[0].channels();
    d.frames = items[0].frames();
    d.joints = items[0].joints();
    std::vector<float> v;
    v.reserve(static_cast<std::size_t>(static_cast<Index>(items.size()) * d.channels * d.frames * d.joints));
    for (const auto& s : items) {
      KFORGE_CHECK(s.skeleton == d.skeleton && s.channels() == d.channels && s.frames() == d.frames &&
                       s.joints() == d.joints,
                   ShapeError, "sample '", s.provenance, "' has shape ", shape_str(s.values.shape()),
                   ", dataset expects [", d.channels, ",", d.frames, ",", d.joints, "]");
      v.insert(v.end(), s.values.data().begin(), s.values.data().end());
      d.labels.push_back(s.label);
      d.provenance.push_back(s.provenance);
    }
    d.samples = Tensor<float>({d.size(), d.channels, d.frames, d.joints}, std::move(v));
    d.splits = std::move(split_tags);
    d.normalization = std::move(normalization);
    d.source = std::move(source);
    d.validate();
    return d;
  }

  /// Writes manifest.json plus the sample tensor in checkpoint format.
  void save(const std::filesystem::path& dir) const {
    validate();
    std::filesystem::create_directories(dir);
    Checkpoint c;
    c.meta["content_hash"] = content_hash();
    c.add("samples", samples.shape(), samples.values());
    std::vector<double> y(labels.begin(), labels.end());
    c.add("labels", Shape{size()}, y);
    save_checkpoint(c, dir / "tensors");
    std::ofstream out(dir / "manifest.json");
    KFORGE_CHECK(static_cast<bool>(out), Error, "cannot write dataset manifest in ", dir.string());
    out << manifest().dump(2) << "\n";
  }

  static Dataset load(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    KFORGE_CHECK(static_cast<bool>(in), ParseError, "no dataset manifest in ", dir.string());
    nlohmann::json m;
    try {
      in >> m;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError((dir / "manifest.json").string() + ": " + e.what());
    }
    Dataset d;
    try {
      KFORGE_CHECK(m.at("format") == "kforge-dataset-1", ParseError, "unsupported dataset format ", m.at("format"));
      d.skeleton = m.at("skeleton").get<std::string>();
      d.channels = m.at("channels").get<Index>();
      d.frames = m.at("frames").get<Index>();
      d.joints = m.at("joints").get<Index>();
      d.normalization = m.at("normalization").get<std::string>();
      d.source = m.at("source");
      for (const auto& e : m.at("samples")) {
        d.labels.push_back(e.at("label").get<Index>());
        d.splits.push_back(e.at("split").get<std::string>());
        d.provenance.push_back(e.at("provenance").get<std::string>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("dataset manifest: " + std::string(e.what()));
    }
    const auto c = load_checkpoint(dir / "tensors");
    const auto* st = c.find("samples");
    KFORGE_CHECK(st != nullptr, ParseError, "dataset tensors lack 'samples'");
    d.samples = Tensor<float>(st->shape, std::vector<float>(st->values.begin(), st->values.end()));
    d.validate();
    KFORGE_CHECK(d.content_hash() == m.at("content_hash").get<std::string>(), ParseError,
                 "dataset content hash mismatch in ", dir.string());
    return d;
  }
};

/// Tags the last `eval_fraction` of each class (in order of appearance) as eval.
inline std::vector<std::string> per_class_splits(const std::vector<Index>& labels, double eval_fraction) {
  KFORGE_CHECK(eval_fraction >= 0 && eval_fraction < 1, ConfigError, "eval fraction must lie in [0, 1)");
  Index classes = 0;
  for (Index y : labels) classes = std::max(classes, y + 1);
  std::vector<Index> total(static_cast<std::size_t>(classes), 0), seen(static_cast<std::size_t>(classes), 0);
  for (Index y : labels) ++total[static_cast<std::size_t>(y)];
  std::vector<std::string> out;
  for (Index y : labels) {
    const auto k = static_cast<std::size_t>(y);
    const Index train = total[k] - static_cast<Index>(std::floor(eval_fraction * static_cast<double>(total[k])));
    out.push_back(seen[k]++ < train ? "train" : "eval");
  }
  return out;
}

}  // namespace kforge::data

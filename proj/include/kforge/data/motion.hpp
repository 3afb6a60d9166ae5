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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kforge/graph/pyramid.hpp"

namespace kforge::data {

/// One skeleton sequence: values are [C, T, N].
struct MotionSample {
  Tensor<float> values;
  Index label = 0;
  std::string skeleton;
  std::string provenance;

  Index channels() const { return values.dim(0); }
  Index frames() const { return values.dim(1); }
  Index joints() const { return values.dim(2); }

  float at(Index c, Index t, Index j) const { return values.data()[(c * frames() + t) * joints() + j]; }
};

inline void validate_sample(const MotionSample& s) {
  KFORGE_CHECK(s.values.defined() && s.values.rank() == 3, ShapeError, "motion sample must be [C,T,N]");
  KFORGE_CHECK(s.values.all_finite(), NumericError, "motion sample '", s.provenance, "' has non-finite values");
  if (!s.skeleton.empty()) {
    const auto spec = graph::bundled_skeleton(s.skeleton);
    KFORGE_CHECK(s.joints() == spec.joint_count(), ShapeError, "sample has ", s.joints(), " joints, skeleton '",
                 s.skeleton, "' has ", spec.joint_count());
  }
}

// ---------------------------------------------------------------------------
// NTU-style skeleton text files.

inline constexpr Index kNtuJoints = 25;

namespace detail {

class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  /// Next non-empty line; false at end of input.
  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++number_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) return true;
    }
    return false;
  }

  std::string require(const std::string& what) {
    std::string line;
    if (!next(line)) throw ParseError(source_ + ": truncated file, expected " + what);
    return line;
  }

  Index number() const { return number_; }
  const std::string& source() const { return source_; }

 private:
  std::istream& in_;
  std::string source_;
  Index number_ = 0;
};

inline Index parse_count(const std::string& line, const std::string& where) {
  std::istringstream ss(line);
  long long v = 0;
  std::string rest;
  if (!(ss >> v) || (ss >> rest) || v < 0) throw ParseError(where + ": expected a count, got '" + line + "'");
  return static_cast<Index>(v);
}

}  // namespace detail

/// Parses one NTU-style file from a stream. Each body id becomes one sample
/// holding the frames in which it appears.
inline std::vector<MotionSample> parse_skeleton_stream(std::istream& in, const std::string& source) {
  detail::LineReader r(in, source);
  std::string line;
  if (!r.next(line)) throw ParseError(source + ": malformed header, file is empty");
  const Index frames = detail::parse_count(line, source + ": malformed header");
  std::map<std::string, std::vector<std::vector<float>>> bodies;  // id -> frames of N*3 values
  std::vector<std::string> order;
  for (Index f = 0; f < frames; ++f) {
    const std::string where = source + ": frame " + std::to_string(f);
    const Index nbodies = detail::parse_count(r.require("body count of frame " + std::to_string(f)), where);
    for (Index b = 0; b < nbodies; ++b) {
      const auto meta = r.require("body metadata in frame " + std::to_string(f));
      std::istringstream ms(meta);
      std::string id;
      ms >> id;
      const Index joints = detail::parse_count(r.require("joint count in frame " + std::to_string(f)), where);
      KFORGE_CHECK(joints == kNtuJoints, ParseError, where, ": expected ", kNtuJoints, " joints, got ", joints);
      std::vector<float> xyz;
      for (Index j = 0; j < joints; ++j) {
        const auto jl = r.require("joint " + std::to_string(j) + " of frame " + std::to_string(f));
        std::istringstream js(jl);
        double v[3];
        KFORGE_CHECK(static_cast<bool>(js >> v[0] >> v[1] >> v[2]), ParseError, where, ", joint ", j, " (line ",
                     r.number(), "): expected x y z, got '", jl, "'");
        for (double c : v) xyz.push_back(static_cast<float>(c));
      }
      if (!bodies.count(id)) order.push_back(id);
      bodies[id].push_back(std::move(xyz));
    }
  }
  KFORGE_CHECK(!r.next(line), ParseError, source, ": unexpected content after frame ", frames - 1, " (line ",
               r.number(), ")");
  std::vector<MotionSample> out;
  for (const auto& id : order) {
    const auto& fr = bodies[id];
    const Index t = static_cast<Index>(fr.size());
    std::vector<float> v(static_cast<std::size_t>(3 * t * kNtuJoints));
    for (Index c = 0; c < 3; ++c)
      for (Index k = 0; k < t; ++k)
        for (Index j = 0; j < kNtuJoints; ++j) v[(c * t + k) * kNtuJoints + j] = fr[k][j * 3 + c];
    MotionSample s;
    s.values = Tensor<float>({3, t, kNtuJoints}, std::move(v));
    s.skeleton = "ntu25";
    s.provenance = source + "#body=" + id;
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<MotionSample> parse_skeleton_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  KFORGE_CHECK(static_cast<bool>(in), ParseError, "cannot open skeleton file ", path.string());
  auto samples = parse_skeleton_stream(in, path.string());
  // NTU names end in A<action>, e.g. S001C002P003R002A013.skeleton.
  const auto stem = path.stem().string();
  const auto a = stem.rfind('A');
  if (a != std::string::npos && a + 1 < stem.size() &&
      std::all_of(stem.begin() + static_cast<std::ptrdiff_t>(a + 1), stem.end(), ::isdigit))
    for (auto& s : samples) s.label = std::stoll(stem.substr(a + 1)) - 1;
  return samples;
}

// ---------------------------------------------------------------------------
// Normalization.

enum class NormMode { kGlobal3d, kLocal2d };

inline std::string to_string(NormMode m) { return m == NormMode::kGlobal3d ? "global3d" : "local2d"; }

inline NormMode norm_mode_from_string(const std::string& s) {
  if (s == "global3d") return NormMode::kGlobal3d;
  if (s == "local2d") return NormMode::kLocal2d;
  throw ConfigError("unknown normalization mode '" + s + "' (expected global3d or local2d)");
}

/// Root joint used for local normalization of a bundled skeleton.
inline Index default_root_joint(const std::string& skeleton) { return graph::bundled_skeleton(skeleton).root_joint; }

/// Resamples to `target_frames`; global3d keeps coordinates, local2d drops
/// depth and moves the root joint to the origin in every frame.
inline MotionSample normalize_sequence(const MotionSample& s, Index target_frames, NormMode mode, Index root = -1) {
  KFORGE_CHECK(s.values.rank() == 3, ShapeError, "motion sample must be [C,T,N]");
  KFORGE_CHECK(s.frames() >= 2, ShapeError, "normalization needs at least 2 frames, got ", s.frames());
  KFORGE_CHECK(target_frames >= 1, ShapeError, "target frame count must be positive");
  const Index c = s.channels(), n = s.joints();
  if (mode == NormMode::kGlobal3d)
    KFORGE_CHECK(c == 3, ShapeError, "global3d normalization needs 3 channels, got ", c);
  else
    KFORGE_CHECK(c >= 2, ShapeError, "local2d normalization needs at least 2 channels, got ", c);
  if (root < 0) root = default_root_joint(s.skeleton);
  KFORGE_CHECK(root < n, ShapeError, "root joint ", root, " outside ", n, " joints");
  Tensor<float> x;
  {
    NoGradGuard no_grad;
    x = graph::temporal_resample(reshape(s.values, {1, c, s.frames(), n}), target_frames);
  }
  MotionSample out = s;
  if (mode == NormMode::kGlobal3d) {
    out.values = reshape(x, {c, target_frames, n}).detach();
    return out;
  }
  std::vector<float> v(static_cast<std::size_t>(2 * target_frames * n));
  const auto d = x.data();
  for (Index ch = 0; ch < 2; ++ch)
    for (Index t = 0; t < target_frames; ++t) {
      const float r = d[(ch * target_frames + t) * n + root];
      for (Index j = 0; j < n; ++j) v[(ch * target_frames + t) * n + j] = d[(ch * target_frames + t) * n + j] - r;
    }
  out.values = Tensor<float>({2, target_frames, n}, std::move(v));
  return out;
}

// ---------------------------------------------------------------------------
// Sequence JSON: {skeleton, channels, frames, joints, label, data}, with
// data[t] listing the channels of joint 0, then joint 1, and so on.

inline nlohmann::json sequence_to_json(const MotionSample& s) {
  validate_sample(s);
  KFORGE_CHECK(s.frames() >= 1, ShapeError, "cannot export a sequence with no frames");
  nlohmann::json rows = nlohmann::json::array();
  for (Index t = 0; t < s.frames(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < s.joints(); ++j)
      for (Index c = 0; c < s.channels(); ++c) row.push_back(static_cast<double>(s.at(c, t, j)));
    rows.push_back(std::move(row));
  }
  return {{"skeleton", s.skeleton}, {"channels", s.channels()}, {"frames", s.frames()},
          {"joints", s.joints()},   {"label", s.label},          {"data", std::move(rows)}};
}

inline MotionSample sequence_from_json(const nlohmann::json& j) {
  KFORGE_CHECK(j.is_object(), ParseError, "sequence must be a JSON object");
  for (const char* key : {"skeleton", "channels", "frames", "joints", "label", "data"})
    KFORGE_CHECK(j.contains(key), ParseError, "sequence is missing field '", key, "'");
  auto int_field = [&](const char* key) {
    KFORGE_CHECK(j[key].is_number_integer(), ParseError, "sequence field '", key, "' must be an integer");
    return j[key].get<Index>();
  };
  KFORGE_CHECK(j["skeleton"].is_string(), ParseError, "sequence field 'skeleton' must be a string");
  MotionSample s;
  s.skeleton = j["skeleton"].get<std::string>();
  const Index c = int_field("channels"), t = int_field("frames"), n = int_field("joints");
  s.label = int_field("label");
  KFORGE_CHECK(c == 2 || c == 3, ParseError, "sequence field 'channels' must be 2 or 3, got ", c);
  KFORGE_CHECK(t >= 1, ParseError, "sequence field 'frames' must be positive, got ", t);
  KFORGE_CHECK(s.label >= 0, ParseError, "sequence field 'label' must be non-negative");
  graph::SkeletonSpec spec;
  try {
    spec = graph::bundled_skeleton(s.skeleton);
  } catch (const ConfigError&) {
    throw ParseError("sequence field 'skeleton': unknown skeleton '" + s.skeleton + "'");
  }
  KFORGE_CHECK(n == spec.joint_count(), ParseError, "sequence field 'joints': ", n, " does not match skeleton '",
               s.skeleton, "' with ", spec.joint_count(), " joints");
  const auto& rows = j["data"];
  KFORGE_CHECK(rows.is_array() && static_cast<Index>(rows.size()) == t, ParseError,
               "sequence field 'data' must hold ", t, " frames");
  std::vector<float> v(static_cast<std::size_t>(c * t * n));
  for (Index k = 0; k < t; ++k) {
    const auto& row = rows[static_cast<std::size_t>(k)];
    KFORGE_CHECK(row.is_array() && static_cast<Index>(row.size()) == n * c, ParseError, "sequence field 'data[", k,
                 "]' must hold ", n * c, " numbers");
    for (Index jn = 0; jn < n; ++jn)
      for (Index ch = 0; ch < c; ++ch) {
        const auto& e = row[static_cast<std::size_t>(jn * c + ch)];
        KFORGE_CHECK(e.is_number(), ParseError, "sequence field 'data[", k, "]' has a non-numeric entry");
        v[(ch * t + k) * n + jn] = static_cast<float>(e.get<double>());
      }
  }
  s.values = Tensor<float>({c, t, n}, std::move(v));
  return s;
}

inline void export_sequence(const MotionSample& s, const std::filesystem::path& path) {
  const auto j = sequence_to_json(s);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  KFORGE_CHECK(static_cast<bool>(out), Error, "cannot write ", path.string());
  out << j.dump() << "\n";
}

inline MotionSample import_sequence(const std::filesystem::path& path) {
  std::ifstream in(path);
  KFORGE_CHECK(static_cast<bool>(in), ParseError, "cannot open sequence file ", path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  auto s = sequence_from_json(j);
  s.provenance = path.string();
  return s;
}

// ---------------------------------------------------------------------------
// SVG strip rendering.

struct RenderOptions {
  double panel = 120.0;
  double margin = 10.0;
  double joint_radius = 2.5;
};

/// Every `stride`-th frame as a wireframe panel in a horizontal strip;
/// 3D samples are projected orthographically onto x-y.
inline std::string render_svg_string(const MotionSample& s, Index stride, const RenderOptions& opt = {}) {
  KFORGE_CHECK(stride >= 1, ArgumentError, "render stride must be positive");
  validate_sample(s);
  const auto spec = graph::bundled_skeleton(s.skeleton);
  std::vector<Index> frames;
  for (Index t = 0; t < s.frames(); t += stride) frames.push_back(t);
  double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
  for (Index t : frames)
    for (Index j = 0; j < s.joints(); ++j) {
      lo_x = std::min(lo_x, static_cast<double>(s.at(0, t, j)));
      hi_x = std::max(hi_x, static_cast<double>(s.at(0, t, j)));
      lo_y = std::min(lo_y, static_cast<double>(s.at(1, t, j)));
      hi_y = std::max(hi_y, static_cast<double>(s.at(1, t, j)));
    }
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-9});
  const double inner = opt.panel - 2 * opt.margin;
  const double scale = inner / span;
  const double width = opt.panel * static_cast<double>(frames.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" "
                "version=\"1.1\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n",
                width, opt.panel, width, opt.panel);
  out += buf;
  std::snprintf(buf, sizeof(buf), "<rect width=\"%.0f\" height=\"%.0f\" fill=\"white\"/>\n", width, opt.panel);
  out += buf;
  for (std::size_t p = 0; p < frames.size(); ++p) {
    const Index t = frames[p];
    const double ox = opt.panel * static_cast<double>(p) + opt.margin;
    auto px = [&](Index j) { return ox + (static_cast<double>(s.at(0, t, j)) - lo_x) * scale; };
    auto py = [&](Index j) { return opt.margin + (hi_y - static_cast<double>(s.at(1, t, j))) * scale; };
    std::snprintf(buf, sizeof(buf), "<g class=\"frame\" id=\"frame-%lld\">\n", static_cast<long long>(t));
    out += buf;
    for (const auto& [a, b] : spec.edges) {
      std::snprintf(buf, sizeof(buf),
                    "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#1f4e79\" stroke-width=\"1.5\"/>\n",
                    px(a), py(a), px(b), py(b));
      out += buf;
    }
    for (Index j = 0; j < s.joints(); ++j) {
      std::snprintf(buf, sizeof(buf), "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"%.2f\" fill=\"#c0392b\"/>\n", px(j), py(j),
                    opt.joint_radius);
      out += buf;
    }
    out += "</g>\n";
  }
  out += "</svg>\n";
  return out;
}

inline void render_svg(const MotionSample& s, const std::filesystem::path& path, Index stride,
                       const RenderOptions& opt = {}) {
  const auto svg = render_svg_string(s, stride, opt);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  KFORGE_CHECK(static_cast<bool>(out), Error, "cannot write ", path.string());
  out << svg;
}

}  // namespace kforge::data

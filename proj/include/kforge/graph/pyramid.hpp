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

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kforge/graph/pyramid_tables.hpp"
#include "kforge/graph/skeleton.hpp"
#include "kforge/tensor/ops.hpp"

namespace kforge::graph {

struct PyramidLevel {
  SkeletonSpec skeleton;
  PartitionedAdjacency adjacency;
  /// For each vertex of this level, the previous-level vertices averaged to
  /// produce it (empty at level 0).
  std::vector<std::vector<Index>> up_sources;
  /// Vertices of this level that survive coarsening, in previous-level order
  /// (empty at level 0).
  std::vector<Index> keep;

  Index joints() const { return skeleton.joint_count(); }
};

/// Multi-resolution skeleton graphs, coarsest first.
class GraphPyramid {
 public:
  GraphPyramid() = default;

  static GraphPyramid from_json(const nlohmann::json& j) {
    GraphPyramid p;
    try {
      p.name_ = j.at("skeleton_name").get<std::string>();
      const auto sizes = j.at("level_sizes").get<std::vector<Index>>();
      const auto edges = j.at("edges").get<std::vector<std::vector<std::vector<Index>>>>();
      const auto centers = j.at("center_joint").get<std::vector<Index>>();
      const auto roots = j.at("root_joint").get<std::vector<Index>>();
      const auto ups = j.at("up_maps").get<std::vector<std::vector<std::vector<Index>>>>();
      const auto keeps = j.at("keep_lists").get<std::vector<std::vector<Index>>>();
      std::vector<std::vector<std::string>> names;
      if (j.contains("joint_names")) names = j.at("joint_names").get<std::vector<std::vector<std::string>>>();

      const std::size_t levels = sizes.size();
      KFORGE_CHECK(levels >= 1, ConfigError, "pyramid '", p.name_, "' has no levels");
      KFORGE_CHECK(edges.size() == levels && centers.size() == levels && roots.size() == levels, ConfigError,
                   "pyramid '", p.name_, "': per-level fields must have ", levels, " entries");
      KFORGE_CHECK(ups.size() == levels - 1 && keeps.size() == levels - 1, ConfigError, "pyramid '", p.name_,
                   "': up_maps and keep_lists must have ", levels - 1, " entries");
      KFORGE_CHECK(names.empty() || names.size() == levels, ConfigError, "pyramid '", p.name_,
                   "': joint_names must have ", levels, " entries");

      for (std::size_t l = 0; l < levels; ++l) {
        PyramidLevel level;
        auto& s = level.skeleton;
        s.name = p.name_ + "/L" + std::to_string(l);
        if (!names.empty()) {
          s.joint_names = names[l];
          KFORGE_CHECK(static_cast<Index>(s.joint_names.size()) == sizes[l], ConfigError, "pyramid '", p.name_,
                       "' level ", l, ": ", s.joint_names.size(), " joint names for ", sizes[l], " joints");
        } else {
          for (Index i = 0; i < sizes[l]; ++i) s.joint_names.push_back("j" + std::to_string(i));
        }
        for (const auto& e : edges[l]) {
          KFORGE_CHECK(e.size() == 2, ConfigError, "pyramid '", p.name_, "' level ", l, ": edge must have 2 ends");
          s.edges.emplace_back(e[0], e[1]);
        }
        s.center_joint = centers[l];
        s.root_joint = roots[l];
        level.adjacency = partition_and_normalize(s, static_cast<Index>(l));
        if (l > 0) {
          level.up_sources = ups[l - 1];
          level.keep = keeps[l - 1];
        }
        p.levels_.push_back(std::move(level));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("pyramid definition: " + std::string(e.what()));
    }
    p.validate();
    return p;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["skeleton_name"] = name_;
    std::vector<Index> sizes;
    nlohmann::json edges = nlohmann::json::array(), names = nlohmann::json::array();
    std::vector<Index> centers, roots;
    nlohmann::json ups = nlohmann::json::array(), keeps = nlohmann::json::array();
    for (std::size_t l = 0; l < levels_.size(); ++l) {
      const auto& lv = levels_[l];
      sizes.push_back(lv.joints());
      nlohmann::json e = nlohmann::json::array();
      for (const auto& [a, b] : lv.skeleton.edges) e.push_back({a, b});
      edges.push_back(e);
      names.push_back(lv.skeleton.joint_names);
      centers.push_back(lv.skeleton.center_joint);
      roots.push_back(lv.skeleton.root_joint);
      if (l > 0) {
        ups.push_back(lv.up_sources);
        keeps.push_back(lv.keep);
      }
    }
    j["level_sizes"] = sizes;
    j["joint_names"] = names;
    j["edges"] = edges;
    j["center_joint"] = centers;
    j["root_joint"] = roots;
    j["up_maps"] = ups;
    j["keep_lists"] = keeps;
    return j;
  }

  static GraphPyramid load(const std::filesystem::path& path) {
    std::ifstream in(path);
    KFORGE_CHECK(in.good(), ConfigError, "cannot open pyramid file ", path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("pyramid file " + path.string() + ": " + e.what());
    }
    return from_json(j);
  }

  /// One of the bundled tables: "ntu25", "h36m15" or "toy2".
  static GraphPyramid bundled(const std::string& name) {
    if (name == "ntu25") return from_json(nlohmann::json::parse(tables::kNtu25));
    if (name == "h36m15") return from_json(nlohmann::json::parse(tables::kH36m15));
    if (name == "toy2") return from_json(nlohmann::json::parse(tables::kToy2));
    throw ConfigError("unknown bundled pyramid '" + name + "'");
  }

  static std::vector<std::string> bundled_names() { return {"ntu25", "h36m15", "toy2"}; }

  /// Single-level pyramid over `spec` alone.
  static GraphPyramid single(const SkeletonSpec& spec) {
    GraphPyramid p;
    p.name_ = spec.name;
    PyramidLevel level;
    level.skeleton = spec;
    level.adjacency = partition_and_normalize(spec, 0);
    p.levels_.push_back(std::move(level));
    return p;
  }

  const std::string& name() const { return name_; }
  Index size() const { return static_cast<Index>(levels_.size()); }
  const PyramidLevel& level(Index l) const {
    KFORGE_CHECK(l >= 0 && l < size(), ShapeError, "pyramid level ", l, " out of range [0,", size(), ")");
    return levels_[static_cast<std::size_t>(l)];
  }
  Index joints(Index l) const { return level(l).joints(); }
  std::vector<Index> level_sizes() const {
    std::vector<Index> out;
    for (const auto& lv : levels_) out.push_back(lv.joints());
    return out;
  }
  const SkeletonSpec& finest() const { return levels_.back().skeleton; }

  /// Averaging map from level l to level l+1.
  template <typename T>
  std::shared_ptr<const AxisMap<T>> up_map(Index l) const {
    KFORGE_CHECK(l >= 0 && l + 1 < size(), ShapeError, "no upsampling from level ", l, " in a ", size(),
                 "-level pyramid");
    const auto& next = level(l + 1);
    auto map = std::make_shared<AxisMap<T>>();
    map->in_size = joints(l);
    map->out_size = next.joints();
    for (const auto& src : next.up_sources) {
      std::vector<std::pair<Index, T>> row;
      for (Index s : src) row.emplace_back(s, T(1) / static_cast<T>(src.size()));
      map->rows.push_back(std::move(row));
    }
    return map;
  }

  /// Selection map from level l to level l-1.
  template <typename T>
  std::shared_ptr<const AxisMap<T>> down_map(Index l) const {
    KFORGE_CHECK(l >= 1 && l < size(), ShapeError, "no downsampling from level ", l, " in a ", size(),
                 "-level pyramid");
    const auto& cur = level(l);
    auto map = std::make_shared<AxisMap<T>>();
    map->in_size = cur.joints();
    map->out_size = joints(l - 1);
    for (Index v : cur.keep) map->rows.push_back({{v, T(1)}});
    return map;
  }

 private:
  void validate() const {
    for (Index l = 1; l < size(); ++l) {
      const auto& lv = levels_[l];
      const Index prev = levels_[l - 1].joints();
      KFORGE_CHECK(lv.joints() > prev, ConfigError, "pyramid '", name_, "': level sizes must increase (level ", l,
                   " has ", lv.joints(), " joints, level ", l - 1, " has ", prev, ")");
      KFORGE_CHECK(static_cast<Index>(lv.up_sources.size()) == lv.joints(), ConfigError, "pyramid '", name_,
                   "': up map into level ", l, " has ", lv.up_sources.size(), " entries for ", lv.joints(),
                   " vertices");
      for (std::size_t v = 0; v < lv.up_sources.size(); ++v) {
        const auto& src = lv.up_sources[v];
        KFORGE_CHECK(src.size() == 1 || src.size() == 2, ConfigError, "pyramid '", name_, "': vertex ", v,
                     " of level ", l, " must average 1 or 2 sources");
        for (Index s : src)
          KFORGE_CHECK(s >= 0 && s < prev, ConfigError, "pyramid '", name_, "': vertex ", v, " of level ", l,
                       " refers to unreachable source vertex ", s);
      }
      KFORGE_CHECK(static_cast<Index>(lv.keep.size()) == prev, ConfigError, "pyramid '", name_, "': keep list of level ",
                   l, " has ", lv.keep.size(), " entries, level ", l - 1, " has ", prev, " vertices");
      for (std::size_t i = 0; i < lv.keep.size(); ++i) {
        const Index v = lv.keep[i];
        KFORGE_CHECK(v >= 0 && v < lv.joints(), ConfigError, "pyramid '", name_, "': keep list of level ", l,
                     " refers to missing vertex ", v);
        KFORGE_CHECK(lv.up_sources[v] == std::vector<Index>{static_cast<Index>(i)}, ConfigError, "pyramid '", name_,
                     "': kept vertex ", v, " of level ", l, " is not a copy of vertex ", i, " of level ", l - 1);
      }
    }
  }

  std::string name_;
  std::vector<PyramidLevel> levels_;
};

/// Pyramid for `spec` with the given level sizes: a single level when only
/// the full joint count is requested, otherwise the bundled table of the
/// same skeleton, checked against `spec`.
inline GraphPyramid build_pyramid(const SkeletonSpec& spec, const std::vector<Index>& level_sizes) {
  spec.validate();
  KFORGE_CHECK(!level_sizes.empty() && level_sizes.back() == spec.joint_count(), ConfigError,
               "last pyramid level must equal the skeleton joint count ", spec.joint_count());
  for (std::size_t i = 1; i < level_sizes.size(); ++i)
    KFORGE_CHECK(level_sizes[i] > level_sizes[i - 1], ConfigError, "pyramid level sizes must be strictly increasing");
  if (level_sizes.size() == 1) return GraphPyramid::single(spec);
  for (const auto& name : GraphPyramid::bundled_names()) {
    auto p = GraphPyramid::bundled(name);
    if (p.level_sizes() != level_sizes) continue;
    const auto& f = p.finest();
    KFORGE_CHECK(f.edges == spec.edges, ConfigError, "bundled pyramid '", name,
                 "' is inconsistent with the skeleton edges of '", spec.name, "'");
    return p;
  }
  throw ConfigError("no pyramid table for level sizes of skeleton '" + spec.name + "'");
}

/// Finest-level skeleton of a bundled pyramid.
inline SkeletonSpec bundled_skeleton(const std::string& name) {
  auto spec = GraphPyramid::bundled(name).finest();
  spec.name = name;
  return spec;
}

/// Linear interpolation weights on uniform frame grids with aligned endpoints.
template <typename T>
std::shared_ptr<const AxisMap<T>> temporal_resample_map(Index frames, Index new_frames) {
  KFORGE_CHECK(frames >= 1, ShapeError, "temporal resample of an empty sequence");
  KFORGE_CHECK(new_frames >= 1, ShapeError, "temporal resample to 0 frames");
  auto map = std::make_shared<AxisMap<T>>();
  map->in_size = frames;
  map->out_size = new_frames;
  for (Index i = 0; i < new_frames; ++i) {
    if (new_frames == 1 || frames == 1) {
      map->rows.push_back({{0, T(1)}});
      continue;
    }
    const Index num = i * (frames - 1);
    const Index den = new_frames - 1;
    const Index lo = num / den;
    const Index rem = num % den;
    if (rem == 0) {
      map->rows.push_back({{lo, T(1)}});
    } else {
      const T frac = static_cast<T>(rem) / static_cast<T>(den);
      map->rows.push_back({{lo, T(1) - frac}, {lo + 1, frac}});
    }
  }
  return map;
}

// Public operations on MotionTensors laid out [batch, channels, frames, joints].

template <typename T>
Tensor<T> spatial_upsample(const Tensor<T>& x, const GraphPyramid& pyramid, Index level) {
  KFORGE_CHECK(x.rank() == 4, ShapeError, "expected [B,C,T,N], got ", shape_str(x.shape()));
  KFORGE_CHECK(x.dim(3) == pyramid.joints(level), ShapeError, "joint dimension ", x.dim(3), " != level ", level,
               " size ", pyramid.joints(level));
  return axis_linear(x, 3, pyramid.template up_map<T>(level));
}

template <typename T>
Tensor<T> spatial_downsample(const Tensor<T>& x, const GraphPyramid& pyramid, Index level) {
  KFORGE_CHECK(x.rank() == 4, ShapeError, "expected [B,C,T,N], got ", shape_str(x.shape()));
  KFORGE_CHECK(level >= 1, ShapeError, "cannot downsample level 0");
  KFORGE_CHECK(x.dim(3) == pyramid.joints(level), ShapeError, "joint dimension ", x.dim(3), " != level ", level,
               " size ", pyramid.joints(level));
  return axis_linear(x, 3, pyramid.template down_map<T>(level));
}

template <typename T>
Tensor<T> temporal_resample(const Tensor<T>& x, Index new_frames) {
  KFORGE_CHECK(x.rank() == 4, ShapeError, "expected [B,C,T,N], got ", shape_str(x.shape()));
  if (new_frames == x.dim(2)) return x;
  return axis_linear(x, 2, temporal_resample_map<T>(x.dim(2), new_frames));
}

}  // namespace kforge::graph

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
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "kforge/graph/pyramid.hpp"

namespace kforge::nn {

enum class BatchNormPolicy { kNone, kNonUpsampling, kAll };

inline std::string to_string(BatchNormPolicy p) {
  switch (p) {
    case BatchNormPolicy::kNone: return "none";
    case BatchNormPolicy::kNonUpsampling: return "non_upsampling";
    case BatchNormPolicy::kAll: return "all";
  }
  return "?";
}

inline BatchNormPolicy batch_norm_policy_from_string(const std::string& s) {
  if (s == "none") return BatchNormPolicy::kNone;
  if (s == "non_upsampling") return BatchNormPolicy::kNonUpsampling;
  if (s == "all") return BatchNormPolicy::kAll;
  throw ConfigError("unknown batch_norm policy '" + s + "' (expected none, non_upsampling or all)");
}

struct ModelConfig {
  /// Bundled pyramid name or path to a pyramid JSON file.
  std::string pyramid = "ntu25";
  Index frames = 64;
  Index channels = 3;
  Index num_classes = 60;
  Index latent_dim = 512;
  Index mapping_depth = 4;
  Index mapping_width = 512;
  Index embed_dim = 64;
  /// Number of temporal doublings between the initial projection and the
  /// output (the initial length is frames / 2^time_doublings).
  Index time_doublings = 4;
  /// Width of the initial projection and of every generator block output
  /// but the last (which has `channels`); the discriminator mirrors it.
  std::vector<Index> widths = {512, 256, 128, 64};
  Index temporal_kernel = 9;
  BatchNormPolicy batch_norm = BatchNormPolicy::kNonUpsampling;
  std::uint64_t init_seed = 0;

  nlohmann::json to_json() const {
    return {{"pyramid", pyramid},
            {"frames", frames},
            {"channels", channels},
            {"num_classes", num_classes},
            {"latent_dim", latent_dim},
            {"mapping_depth", mapping_depth},
            {"mapping_width", mapping_width},
            {"embed_dim", embed_dim},
            {"time_doublings", time_doublings},
            {"widths", widths},
            {"temporal_kernel", temporal_kernel},
            {"batch_norm", to_string(batch_norm)},
            {"init_seed", init_seed}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    KFORGE_CHECK(j.is_object(), ConfigError, "model config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      try {
        if (key == "pyramid") c.pyramid = value.get<std::string>();
        else if (key == "frames") c.frames = value.get<Index>();
        else if (key == "channels") c.channels = value.get<Index>();
        else if (key == "num_classes") c.num_classes = value.get<Index>();
        else if (key == "latent_dim") c.latent_dim = value.get<Index>();
        else if (key == "mapping_depth") c.mapping_depth = value.get<Index>();
        else if (key == "mapping_width") c.mapping_width = value.get<Index>();
        else if (key == "embed_dim") c.embed_dim = value.get<Index>();
        else if (key == "time_doublings") c.time_doublings = value.get<Index>();
        else if (key == "widths") c.widths = value.get<std::vector<Index>>();
        else if (key == "temporal_kernel") c.temporal_kernel = value.get<Index>();
        else if (key == "batch_norm") c.batch_norm = batch_norm_policy_from_string(value.get<std::string>());
        else if (key == "init_seed") c.init_seed = value.get<std::uint64_t>();
        else throw ConfigError("unknown model config key '" + key + "'");
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("model config key '" + key + "': " + e.what());
      }
    }
    return c;
  }

  void validate() const {
    KFORGE_CHECK(frames >= 1, ConfigError, "model.frames must be positive");
    KFORGE_CHECK(channels == 2 || channels == 3, ConfigError, "model.channels must be 2 or 3, got ", channels);
    KFORGE_CHECK(num_classes >= 1, ConfigError, "model.num_classes must be positive");
    KFORGE_CHECK(latent_dim >= 1 && mapping_width >= 1 && embed_dim >= 1, ConfigError,
                 "model latent, mapping and embedding sizes must be positive");
    KFORGE_CHECK(mapping_depth >= 0, ConfigError, "model.mapping_depth must be non-negative");
    KFORGE_CHECK(time_doublings >= 0 && time_doublings <= 16, ConfigError, "model.time_doublings out of range");
    KFORGE_CHECK(temporal_kernel >= 1 && temporal_kernel % 2 == 1, ConfigError, "model.temporal_kernel must be odd");
    for (Index w : widths) KFORGE_CHECK(w >= 1, ConfigError, "model.widths entries must be positive");
  }
};

inline graph::GraphPyramid load_pyramid(const std::string& name_or_path) {
  for (const auto& n : graph::GraphPyramid::bundled_names())
    if (n == name_or_path) return graph::GraphPyramid::bundled(n);
  KFORGE_CHECK(std::filesystem::exists(name_or_path), ConfigError, "unknown pyramid '", name_or_path,
               "' (neither a bundled table nor a file)");
  return graph::GraphPyramid::load(name_or_path);
}

/// Resolution of a feature map between blocks.
struct Stage {
  Index level = 0;
  Index joints = 0;
  Index frames = 0;
  Index channels = 0;
};

/// Generator resolutions, coarsest first: the initial projection, then the
/// output of each block. Spatial levels rise one per block until the finest
/// level; frames double per block until `frames` is reached.
inline std::vector<Stage> generator_schedule(const ModelConfig& c, const graph::GraphPyramid& p) {
  c.validate();
  const Index levels = p.size();
  const Index blocks = std::max(levels - 1, c.time_doublings);
  KFORGE_CHECK(blocks >= 1, ConfigError, "schedule has no blocks: single-level pyramid with time_doublings 0");
  KFORGE_CHECK(static_cast<Index>(c.widths.size()) == blocks, ConfigError, "model.widths has ", c.widths.size(),
               " entries, schedule has ", blocks, " blocks");
  KFORGE_CHECK(p.finest().joint_count() > 0, ConfigError, "empty pyramid");
  std::vector<Stage> out;
  for (Index k = 0; k <= blocks; ++k) {
    Stage s;
    s.level = std::min(k, levels - 1);
    s.joints = p.joints(s.level);
    if (k >= c.time_doublings) {
      s.frames = c.frames;
    } else {
      // Round half up of frames * 2^k / 2^D.
      const Index den = Index{1} << c.time_doublings;
      s.frames = std::max<Index>(1, (c.frames * (Index{1} << k) + den / 2) / den);
    }
    s.channels = k < blocks ? c.widths[static_cast<std::size_t>(k)] : c.channels;
    out.push_back(s);
  }
  return out;
}

}  // namespace kforge::nn

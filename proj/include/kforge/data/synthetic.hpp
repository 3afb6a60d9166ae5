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
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>
#include <json.hpp>

#include "kforge/data/dataset.hpp"

namespace kforge::data {

/// Motion class: every non-root joint oscillates at one frequency drawn from
/// [freq_lo, freq_hi] (cycles per sequence) with amplitude from
/// [amp_lo, amp_hi].
struct SynthClass {
  double freq_lo = 1;
  double freq_hi = 2;
  double amp_lo = 0.5;
  double amp_hi = 1.0;
  Index count = 200;
};

struct SynthMotionConfig {
  std::string skeleton = "h36m15";
  Index channels = 2;
  Index frames = 32;
  std::vector<SynthClass> classes{{1, 2, 0.5, 1.0, 200}, {3, 4, 0.5, 1.0, 200}, {5, 6, 0.5, 1.0, 200},
                                  {7, 8, 0.5, 1.0, 200}};
  /// Rest-pose height (root to deepest joint).
  double height = 5.0;
  double noise = 0.05;
  std::uint64_t seed = 7;
  double eval_fraction = 0.2;

  void validate() const {
    KFORGE_CHECK(channels == 2 || channels == 3, ConfigError, "synthetic channels must be 2 or 3");
    KFORGE_CHECK(frames >= 4, ConfigError, "synthetic sequences need at least 4 frames");
    KFORGE_CHECK(!classes.empty(), ConfigError, "synthetic dataset needs at least one class");
    KFORGE_CHECK(noise >= 0, ConfigError, "noise level must be non-negative");
    KFORGE_CHECK(height > 0, ConfigError, "rest-pose height must be positive");
    const auto spec = graph::bundled_skeleton(skeleton);
    KFORGE_CHECK(spec.joint_count() >= 2, ConfigError, "skeleton needs at least 2 joints");
    std::vector<std::pair<double, double>> bands;
    for (std::size_t k = 0; k < classes.size(); ++k) {
      const auto& c = classes[k];
      KFORGE_CHECK(c.freq_lo >= 1 && c.freq_hi >= c.freq_lo && c.freq_hi < static_cast<double>(frames) / 2,
                   ConfigError, "class ", k, " band [", c.freq_lo, ", ", c.freq_hi, "] must lie in [1, frames/2)");
      KFORGE_CHECK(c.freq_lo == std::floor(c.freq_lo) && c.freq_hi == std::floor(c.freq_hi), ConfigError, "class ",
                   k, " band edges must be whole cycles");
      KFORGE_CHECK(c.amp_lo > 0 && c.amp_hi >= c.amp_lo, ConfigError, "class ", k, " amplitude range is invalid");
      KFORGE_CHECK(c.count >= 1, ConfigError, "class ", k, " needs at least one sample");
      bands.emplace_back(c.freq_lo, c.freq_hi);
    }
    std::sort(bands.begin(), bands.end());
    for (std::size_t k = 1; k < bands.size(); ++k)
      KFORGE_CHECK(bands[k].first >= bands[k - 1].second + 1, ConfigError, "class frequency bands [",
                   bands[k - 1].first, ", ", bands[k - 1].second, "] and [", bands[k].first, ", ", bands[k].second,
                   "] overlap or touch");
  }

  nlohmann::json to_json() const {
    nlohmann::json cls = nlohmann::json::array();
    for (const auto& c : classes)
      cls.push_back({{"freq", {c.freq_lo, c.freq_hi}}, {"amp", {c.amp_lo, c.amp_hi}}, {"count", c.count}});
    return {{"skeleton", skeleton}, {"channels", channels}, {"frames", frames},
            {"classes", cls},       {"height", height},     {"noise", noise},
            {"seed", seed},         {"eval_fraction", eval_fraction}};
  }

  static SynthMotionConfig from_json(const nlohmann::json& j) {
    SynthMotionConfig c;
    KFORGE_CHECK(j.is_object(), ConfigError, "synthetic config must be a JSON object");
    for (const auto& [key, v] : j.items()) {
      try {
        if (key == "skeleton") c.skeleton = v.get<std::string>();
        else if (key == "channels") c.channels = v.get<Index>();
        else if (key == "frames") c.frames = v.get<Index>();
        else if (key == "height") c.height = v.get<double>();
        else if (key == "noise") c.noise = v.get<double>();
        else if (key == "seed") c.seed = v.get<std::uint64_t>();
        else if (key == "eval_fraction") c.eval_fraction = v.get<double>();
        else if (key == "classes") {
          c.classes.clear();
          for (const auto& e : v) {
            SynthClass s;
            for (const auto& [k, x] : e.items()) {
              if (k == "freq") s.freq_lo = x.at(0).get<double>(), s.freq_hi = x.at(1).get<double>();
              else if (k == "amp") s.amp_lo = x.at(0).get<double>(), s.amp_hi = x.at(1).get<double>();
              else if (k == "count") s.count = x.get<Index>();
              else throw ConfigError("unknown config key 'classes[]." + k + "'");
            }
            c.classes.push_back(s);
          }
        } else {
          throw ConfigError("unknown config key '" + key + "'");
        }
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
      }
    }
    return c;
  }
};

/// Rest pose from the skeleton tree: leaves spread along x in depth-first
/// order, parents centered over their children, depth along -y, scaled so
/// the deepest joint sits `height` below the root.
inline std::vector<std::array<double, 3>> rest_pose(const graph::SkeletonSpec& spec, double height = 1.0) {
  const Index n = spec.joint_count();
  std::vector<std::vector<Index>> nbrs(static_cast<std::size_t>(n));
  for (const auto& [a, b] : spec.edges) {
    nbrs[a].push_back(b);
    nbrs[b].push_back(a);
  }
  for (auto& v : nbrs) std::sort(v.begin(), v.end());
  std::vector<std::array<double, 3>> pos(static_cast<std::size_t>(n), {0, 0, 0});
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  double next_leaf = 0;
  Index max_depth = 1;
  auto visit = [&](auto&& self, Index j, Index depth) -> double {
    seen[j] = 1;
    max_depth = std::max(max_depth, depth);
    double sum = 0;
    int kids = 0;
    for (Index k : nbrs[j])
      if (!seen[k]) {
        sum += self(self, k, depth + 1);
        ++kids;
      }
    pos[j][0] = kids ? sum / kids : next_leaf++;
    pos[j][1] = -static_cast<double>(depth);
    return pos[j][0];
  };
  visit(visit, spec.root_joint, 0);
  for (Index j = 0; j < n; ++j)
    if (!seen[j]) visit(visit, j, 0);
  const double width = std::max(1.0, next_leaf - 1);
  const double scale = height / static_cast<double>(std::max<Index>(max_depth, 1));
  for (auto& p : pos) {
    p[0] = (p[0] - width / 2) * scale;
    p[1] *= scale;
  }
  return pos;
}

/// Random draws behind one synthetic sample.
struct SynthParams {
  double frequency = 0;
  double amplitude = 0;
  std::vector<double> phase;                    // per joint
  std::vector<std::array<double, 3>> direction;  // per joint, unit length
};

inline SynthParams synth_params(const SynthMotionConfig& cfg, Index cls, Index index) {
  const auto& c = cfg.classes[static_cast<std::size_t>(cls)];
  const Index n = graph::bundled_skeleton(cfg.skeleton).joint_count();
  Rng rng(cfg.seed, Stream::kSynth, {static_cast<std::uint64_t>(cls), static_cast<std::uint64_t>(index)});
  SynthParams p;
  p.frequency = rng.uniform(c.freq_lo, c.freq_hi);
  p.amplitude = rng.uniform(c.amp_lo, c.amp_hi);
  for (Index j = 0; j < n; ++j) {
    p.phase.push_back(rng.uniform(0.0, 2 * std::numbers::pi));
    std::array<double, 3> d{rng.normal(), rng.normal(), cfg.channels == 3 ? rng.normal() : 0.0};
    const double norm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    for (auto& x : d) x /= norm;
    p.direction.push_back(d);
  }
  return p;
}

inline MotionSample synth_sample(const SynthMotionConfig& cfg, Index cls, Index index) {
  const auto spec = graph::bundled_skeleton(cfg.skeleton);
  const auto pose = rest_pose(spec, cfg.height);
  const auto p = synth_params(cfg, cls, index);
  const Index c = cfg.channels, t = cfg.frames, n = spec.joint_count();
  Rng noise(cfg.seed, Stream::kSynth, {static_cast<std::uint64_t>(cls), static_cast<std::uint64_t>(index), 1});
  std::vector<float> v(static_cast<std::size_t>(c * t * n));
  for (Index ch = 0; ch < c; ++ch)
    for (Index k = 0; k < t; ++k)
      for (Index j = 0; j < n; ++j) {
        double x = pose[j][ch];
        if (j != spec.root_joint)
          x += p.amplitude * p.direction[j][ch] *
               std::sin(2 * std::numbers::pi * p.frequency * static_cast<double>(k) / static_cast<double>(t) +
                        p.phase[j]);
        if (cfg.noise > 0) x += cfg.noise * noise.normal();
        v[(ch * t + k) * n + j] = static_cast<float>(x);
      }
  MotionSample s;
  s.values = Tensor<float>({c, t, n}, std::move(v));
  s.label = cls;
  s.skeleton = cfg.skeleton;
  s.provenance = "synth:seed=" + std::to_string(cfg.seed) + ":class=" + std::to_string(cls) +
                 ":index=" + std::to_string(index);
  return s;
}

inline Dataset generate_synthetic_dataset(const SynthMotionConfig& cfg) {
  cfg.validate();
  std::vector<MotionSample> items;
  for (Index k = 0; k < static_cast<Index>(cfg.classes.size()); ++k)
    for (Index i = 0; i < cfg.classes[static_cast<std::size_t>(k)].count; ++i) items.push_back(synth_sample(cfg, k, i));
  std::vector<Index> labels;
  for (const auto& s : items) labels.push_back(s.label);
  return Dataset::from_samples(items, per_class_splits(labels, cfg.eval_fraction), "none",
                               {{"kind", "synthetic"}, {"config", cfg.to_json()}});
}

// ---------------------------------------------------------------------------
// Spectral oracle.

/// Power per integer frequency bin 1..T/2, summed over non-root joints and
/// channels of a [C, T, N] sequence after removing each trajectory's mean.
inline std::vector<double> motion_spectrum(const Tensor<float>& x, Index root) {
  KFORGE_CHECK(x.rank() == 3, ShapeError, "expected [C,T,N], got ", shape_str(x.shape()));
  const Index c = x.dim(0), t = x.dim(1), n = x.dim(2);
  Eigen::FFT<double> fft;
  std::vector<double> power(static_cast<std::size_t>(t / 2 + 1), 0.0);
  std::vector<double> series(static_cast<std::size_t>(t));
  std::vector<std::complex<double>> spec;
  for (Index ch = 0; ch < c; ++ch)
    for (Index j = 0; j < n; ++j) {
      if (j == root) continue;
      double mean = 0;
      for (Index k = 0; k < t; ++k) mean += series[k] = x.data()[(ch * t + k) * n + j];
      mean /= static_cast<double>(t);
      for (auto& s : series) s -= mean;
      fft.fwd(spec, series);
      for (Index k = 1; k <= t / 2; ++k) power[k] += std::norm(spec[k]);
    }
  return power;
}

inline Index dominant_frequency(const Tensor<float>& x, Index root) {
  const auto p = motion_spectrum(x, root);
  Index best = 1;
  for (Index k = 2; k < static_cast<Index>(p.size()); ++k)
    if (p[k] > p[best]) best = k;
  return best;
}

/// Nearest class band to the dominant frequency bin.
inline Index oracle_classify(const Tensor<float>& x, const SynthMotionConfig& cfg) {
  const double f = static_cast<double>(dominant_frequency(x, graph::bundled_skeleton(cfg.skeleton).root_joint));
  Index best = 0;
  double best_d = 1e300;
  for (Index k = 0; k < static_cast<Index>(cfg.classes.size()); ++k) {
    const auto& c = cfg.classes[static_cast<std::size_t>(k)];
    const double d = f < c.freq_lo ? c.freq_lo - f : (f > c.freq_hi ? f - c.freq_hi : 0.0);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

/// Fraction of sequences [S, C, T, N] whose oracle class equals the label.
inline double oracle_accuracy(const Tensor<float>& xs, const std::vector<Index>& labels, const SynthMotionConfig& cfg) {
  KFORGE_CHECK(xs.rank() == 4 && xs.dim(0) == static_cast<Index>(labels.size()) && xs.dim(0) > 0, ShapeError,
               "oracle accuracy needs one label per sequence");
  Index hit = 0;
  for (Index i = 0; i < xs.dim(0); ++i) {
    Tensor<float> one;
    {
      NoGradGuard no_grad;
      one = reshape(index_select(xs, {i}), {xs.dim(1), xs.dim(2), xs.dim(3)}).detach();
    }
    hit += oracle_classify(one, cfg) == labels[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(hit) / static_cast<double>(xs.dim(0));
}

// ---------------------------------------------------------------------------
// Eight-Gaussian toy mixture on the two-joint skeleton.

struct ToyMixtureConfig {
  Index per_class = 128;
  double radius = 2.0;
  double stddev = 0.1;
  std::uint64_t seed = 0;
  double eval_fraction = 0.0;

  nlohmann::json to_json() const {
    return {{"per_class", per_class}, {"radius", radius}, {"stddev", stddev}, {"seed", seed},
            {"eval_fraction", eval_fraction}};
  }

  static ToyMixtureConfig from_json(const nlohmann::json& j) {
    ToyMixtureConfig c;
    KFORGE_CHECK(j.is_object(), ConfigError, "toy mixture config must be a JSON object");
    for (const auto& [key, v] : j.items()) {
      try {
        if (key == "per_class") c.per_class = v.get<Index>();
        else if (key == "radius") c.radius = v.get<double>();
        else if (key == "stddev") c.stddev = v.get<double>();
        else if (key == "seed") c.seed = v.get<std::uint64_t>();
        else if (key == "eval_fraction") c.eval_fraction = v.get<double>();
        else throw ConfigError("unknown config key '" + key + "'");
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
      }
    }
    return c;
  }
};

inline constexpr Index kToyModes = 8;
inline constexpr Index kToyFrames = 4;
inline constexpr Index kToyJoints = 2;

/// Point p becomes a [2, 4, 2] sequence: frame t, joint j holds p rotated by
/// (2t + j) * pi / 8.
inline Tensor<float> embed_toy_point(double px, double py) {
  std::vector<float> v(static_cast<std::size_t>(2 * kToyFrames * kToyJoints));
  for (Index t = 0; t < kToyFrames; ++t)
    for (Index j = 0; j < kToyJoints; ++j) {
      const double a = static_cast<double>(2 * t + j) * std::numbers::pi / 8;
      v[(0 * kToyFrames + t) * kToyJoints + j] = static_cast<float>(std::cos(a) * px - std::sin(a) * py);
      v[(1 * kToyFrames + t) * kToyJoints + j] = static_cast<float>(std::sin(a) * px + std::cos(a) * py);
    }
  return Tensor<float>({2, kToyFrames, kToyJoints}, std::move(v));
}

/// Class k is a Gaussian centered at angle 2 pi k / 8 on the circle.
inline Dataset toy_mixture_dataset(const ToyMixtureConfig& cfg) {
  KFORGE_CHECK(cfg.per_class >= 1 && cfg.stddev >= 0 && cfg.radius > 0, ConfigError, "invalid toy mixture config");
  std::vector<MotionSample> items;
  std::vector<Index> labels;
  for (Index k = 0; k < kToyModes; ++k) {
    const double a = 2 * std::numbers::pi * static_cast<double>(k) / kToyModes;
    for (Index i = 0; i < cfg.per_class; ++i) {
      Rng rng(cfg.seed, Stream::kSynth, {0x70e, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(i)});
      const double px = cfg.radius * std::cos(a) + cfg.stddev * rng.normal();
      const double py = cfg.radius * std::sin(a) + cfg.stddev * rng.normal();
      MotionSample s;
      s.values = embed_toy_point(px, py);
      s.label = k;
      s.skeleton = "toy2";
      s.provenance = "toy:seed=" + std::to_string(cfg.seed) + ":mode=" + std::to_string(k) + ":index=" +
                     std::to_string(i);
      items.push_back(std::move(s));
      labels.push_back(k);
    }
  }
  return Dataset::from_samples(items, per_class_splits(labels, cfg.eval_fraction), "none",
                               {{"kind", "toy_mixture"}, {"config", cfg.to_json()}});
}

}  // namespace kforge::data

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

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kforge/graph/pyramid.hpp"
#include "kforge/nn/config.hpp"
#include "kforge/nn/layers.hpp"

namespace kforge::nn {

/// z (+ class embedding) -> w. Depth 0 is a single affine map; depth k
/// stacks k fully connected layers, each followed by a leaky rectifier.
template <typename T>
class MappingNetwork {
 public:
  MappingNetwork(const std::string& name, Index in, Index width, Index depth, std::uint64_t seed)
      : in_(in), width_(width), depth_(depth) {
    const Index layers = std::max<Index>(depth, 1);
    for (Index i = 0; i < layers; ++i)
      layers_.push_back(std::make_unique<Linear<T>>(name + ".fc" + std::to_string(i), i == 0 ? in : width, width, seed));
  }

  Tensor<T> operator()(const Tensor<T>& x) const {
    auto h = x;
    for (const auto& l : layers_) {
      h = (*l)(h);
      if (depth_ > 0) h = leaky_relu(h, T(0.2));
    }
    return h;
  }

  void collect(ParameterList<T>& out) {
    for (auto& l : layers_) l->collect(out);
  }

  Index in_features() const { return in_; }
  Index width() const { return width_; }
  Index depth() const { return depth_; }
  Linear<T>& layer(Index i) { return *layers_.at(static_cast<std::size_t>(i)); }

 private:
  Index in_, width_, depth_;
  std::vector<std::unique_ptr<Linear<T>>> layers_;
};

namespace detail {

template <typename T>
std::shared_ptr<const AxisMap<T>> frame_map(Index from, Index to) {
  if (from == to) return nullptr;
  return graph::temporal_resample_map<T>(from, to);
}

}  // namespace detail

/// Up(X) -> main path S, T, activation, optional batch norm; skip path T;
/// plus weighted per-joint noise.
template <typename T>
class GeneratorBlock {
 public:
  GeneratorBlock(const std::string& name, const Stage& in, const Stage& out, const graph::GraphPyramid& pyramid,
                 Index kernel, bool output_block, bool batch_norm, Index index, std::uint64_t seed)
      : in_(in),
        out_(out),
        output_block_(output_block),
        gcn_(name + ".gcn", pyramid.level(out.level).adjacency, in.channels, out.channels, seed),
        tconv_(name + ".tconv", out.channels, out.channels, kernel, seed),
        skip_(name + ".skip", in.channels, out.channels, kernel, seed),
        noise_(name + ".noise", out.channels, static_cast<std::uint64_t>(index)) {
    if (out.level != in.level) {
      KFORGE_CHECK(out.level == in.level + 1, ConfigError, name, ": blocks may rise one pyramid level at a time");
      joint_map_ = pyramid.template up_map<T>(in.level);
    }
    frame_map_ = detail::frame_map<T>(in.frames, out.frames);
    if (batch_norm) bn_.emplace(name + ".bn", out.channels);
  }

  Tensor<T> upsample(const Tensor<T>& x) const {
    auto h = x;
    if (joint_map_) h = axis_linear(h, 2, joint_map_);
    if (frame_map_) h = axis_linear(h, 1, frame_map_);
    return h;
  }

  /// [B, T_in, N_in, C_in] -> [B, T_out, N_out, C_out].
  Tensor<T> operator()(const Tensor<T>& x, std::uint64_t noise_seed, bool training) {
    KFORGE_CHECK(x.rank() == 4 && x.dim(1) == in_.frames && x.dim(2) == in_.joints && x.dim(3) == in_.channels,
                 ShapeError, "generator block expects [B,", in_.frames, ",", in_.joints, ",", in_.channels, "], got ",
                 shape_str(x.shape()));
    const auto u = upsample(x);
    auto main = tconv_(gcn_(u));
    if (!output_block_) main = relu(main);
    if (bn_) main = (*bn_)(main, training);
    return noise_(add(main, skip_(u)), noise_seed);
  }

  void set_track_running_stats(bool on) {
    if (bn_) bn_->set_track_running_stats(on);
  }

  bool spatial_upsampling() const { return static_cast<bool>(joint_map_); }
  bool has_batch_norm() const { return bn_.has_value(); }
  bool output_block() const { return output_block_; }
  const Stage& input_stage() const { return in_; }
  const Stage& output_stage() const { return out_; }

  std::vector<std::string> layer_kinds() const {
    std::vector<std::string> k;
    if (joint_map_) k.push_back("spatial_upsample");
    if (frame_map_) k.push_back("temporal_upsample");
    k.insert(k.end(), {"spatial_gcn", "temporal_conv"});
    if (!output_block_) k.push_back("relu");
    if (bn_) k.push_back("batch_norm");
    k.insert(k.end(), {"skip_temporal_conv", "noise_injection"});
    return k;
  }

  void collect(ParameterList<T>& out) {
    gcn_.collect(out);
    tconv_.collect(out);
    if (bn_) bn_->collect(out);
    skip_.collect(out);
    noise_.collect(out);
  }

  SpatialGCN<T>& gcn() { return gcn_; }
  TemporalConv<T>& tconv() { return tconv_; }
  TemporalConv<T>& skip() { return skip_; }
  NoiseInjection<T>& noise() { return noise_; }

 private:
  Stage in_, out_;
  bool output_block_;
  SpatialGCN<T> gcn_;
  TemporalConv<T> tconv_;
  TemporalConv<T> skip_;
  NoiseInjection<T> noise_;
  std::optional<BatchNorm<T>> bn_;
  std::shared_ptr<const AxisMap<T>> joint_map_;
  std::shared_ptr<const AxisMap<T>> frame_map_;
};

/// Down(lrelu(T(S(X))) + T(X)).
template <typename T>
class DiscriminatorBlock {
 public:
  DiscriminatorBlock(const std::string& name, const Stage& in, const Stage& out, const graph::GraphPyramid& pyramid,
                     Index kernel, std::uint64_t seed)
      : in_(in),
        out_(out),
        gcn_(name + ".gcn", pyramid.level(in.level).adjacency, in.channels, out.channels, seed),
        tconv_(name + ".tconv", out.channels, out.channels, kernel, seed),
        skip_(name + ".skip", in.channels, out.channels, kernel, seed) {
    if (out.level != in.level) {
      KFORGE_CHECK(out.level + 1 == in.level, ConfigError, name, ": blocks may drop one pyramid level at a time");
      joint_map_ = pyramid.template down_map<T>(in.level);
    }
    frame_map_ = detail::frame_map<T>(in.frames, out.frames);
  }

  Tensor<T> downsample(const Tensor<T>& x) const {
    auto h = x;
    if (joint_map_) h = axis_linear(h, 2, joint_map_);
    if (frame_map_) h = axis_linear(h, 1, frame_map_);
    return h;
  }

  Tensor<T> operator()(const Tensor<T>& x) const {
    KFORGE_CHECK(x.rank() == 4 && x.dim(1) == in_.frames && x.dim(2) == in_.joints && x.dim(3) == in_.channels,
                 ShapeError, "discriminator block expects [B,", in_.frames, ",", in_.joints, ",", in_.channels,
                 "], got ", shape_str(x.shape()));
    auto h = add(leaky_relu(tconv_(gcn_(x)), T(0.2)), skip_(x));
    return downsample(h);
  }

  bool spatial_downsampling() const { return static_cast<bool>(joint_map_); }
  const Stage& input_stage() const { return in_; }
  const Stage& output_stage() const { return out_; }

  std::vector<std::string> layer_kinds() const {
    std::vector<std::string> k{"spatial_gcn", "temporal_conv", "leaky_relu", "skip_temporal_conv"};
    if (joint_map_) k.push_back("spatial_downsample");
    if (frame_map_) k.push_back("temporal_downsample");
    return k;
  }

  void collect(ParameterList<T>& out) {
    gcn_.collect(out);
    tconv_.collect(out);
    skip_.collect(out);
  }

  SpatialGCN<T>& gcn() { return gcn_; }
  TemporalConv<T>& tconv() { return tconv_; }
  TemporalConv<T>& skip() { return skip_; }

 private:
  Stage in_, out_;
  SpatialGCN<T> gcn_;
  TemporalConv<T> tconv_;
  TemporalConv<T> skip_;
  std::shared_ptr<const AxisMap<T>> joint_map_;
  std::shared_ptr<const AxisMap<T>> frame_map_;
};

template <typename T>
class Generator {
 public:
  Generator(const ModelConfig& config, const graph::GraphPyramid& pyramid)
      : config_(config),
        schedule_(generator_schedule(config, pyramid)),
        embedding_("gen.embed", config.num_classes, config.embed_dim, config.init_seed),
        mapping_("gen.mapping", config.latent_dim + config.embed_dim, config.mapping_width, config.mapping_depth,
                 config.init_seed),
        projection_("gen.project", config.mapping_width,
                    schedule_[0].frames * schedule_[0].joints * schedule_[0].channels, config.init_seed) {
    const auto blocks = static_cast<Index>(schedule_.size()) - 1;
    for (Index k = 0; k < blocks; ++k) {
      const auto& in = schedule_[k];
      const auto& out = schedule_[k + 1];
      const bool output = k + 1 == blocks;
      const bool up = out.level != in.level;
      bool bn = false;
      if (!output && config.batch_norm == BatchNormPolicy::kAll) bn = true;
      if (!output && config.batch_norm == BatchNormPolicy::kNonUpsampling && !up) bn = true;
      blocks_.push_back(std::make_unique<GeneratorBlock<T>>("gen.block" + std::to_string(k), in, out, pyramid,
                                                            config.temporal_kernel, output, bn, k, config.init_seed));
    }
  }

  Generator(const Generator&) = delete;
  Generator& operator=(const Generator&) = delete;

  /// w = f(concat(z, embed(y))); z is [B, latent_dim].
  Tensor<T> map(const Tensor<T>& z, const std::vector<Index>& labels) const {
    KFORGE_CHECK(z.rank() == 2 && z.dim(1) == config_.latent_dim, ShapeError, "latent codes must be [B,",
                 config_.latent_dim, "], got ", shape_str(z.shape()));
    KFORGE_CHECK(static_cast<Index>(labels.size()) == z.dim(0), ShapeError, labels.size(), " labels for ", z.dim(0),
                 " latent codes");
    return mapping_(concat(std::vector<Tensor<T>>{z, embedding_(labels)}, 1));
  }

  /// w [B, mapping_width] -> motion [B, C, T, N].
  Tensor<T> synthesize(const Tensor<T>& w, std::uint64_t noise_seed, bool training = false) {
    KFORGE_CHECK(w.rank() == 2 && w.dim(1) == config_.mapping_width, ShapeError, "intermediate latents must be [B,",
                 config_.mapping_width, "], got ", shape_str(w.shape()));
    const auto& s0 = schedule_[0];
    auto h = reshape(projection_(w), {w.dim(0), s0.frames, s0.joints, s0.channels});
    for (auto& b : blocks_) h = (*b)(h, noise_seed, training);
    return to_channel_first(h);
  }

  Tensor<T> operator()(const Tensor<T>& z, const std::vector<Index>& labels, std::uint64_t noise_seed,
                       bool training = false) {
    return synthesize(map(z, labels), noise_seed, training);
  }

  void collect(ParameterList<T>& out) {
    embedding_.collect(out);
    mapping_.collect(out);
    projection_.collect(out);
    for (auto& b : blocks_) b->collect(out);
  }

  ParameterList<T> parameters() {
    ParameterList<T> out;
    collect(out);
    return out;
  }

  void set_track_running_stats(bool on) {
    for (auto& b : blocks_) b->set_track_running_stats(on);
  }

  const ModelConfig& config() const { return config_; }
  const std::vector<Stage>& schedule() const { return schedule_; }
  Index block_count() const { return static_cast<Index>(blocks_.size()); }
  GeneratorBlock<T>& block(Index i) { return *blocks_.at(static_cast<std::size_t>(i)); }
  const GeneratorBlock<T>& block(Index i) const { return *blocks_.at(static_cast<std::size_t>(i)); }
  ClassEmbedding<T>& embedding() { return embedding_; }
  MappingNetwork<T>& mapping() { return mapping_; }
  Linear<T>& projection() { return projection_; }
  Shape output_shape(Index batch) const {
    const auto& s = schedule_.back();
    return {batch, s.channels, s.frames, s.joints};
  }

 private:
  ModelConfig config_;
  std::vector<Stage> schedule_;
  ClassEmbedding<T> embedding_;
  MappingNetwork<T> mapping_;
  Linear<T> projection_;
  std::vector<std::unique_ptr<GeneratorBlock<T>>> blocks_;
};

template <typename T>
class Discriminator {
 public:
  Discriminator(const ModelConfig& config, const graph::GraphPyramid& pyramid)
      : config_(config),
        embedding_("disc.embed", config.num_classes, config.embed_dim, config.init_seed),
        head_("disc.head", config.widths.front(), 1, config.init_seed) {
    const auto gen = generator_schedule(config, pyramid);
    const auto blocks = static_cast<Index>(gen.size()) - 1;
    for (Index k = blocks; k >= 0; --k) {
      Stage s = gen[k];
      if (k == blocks) s.channels = config.channels + config.embed_dim;
      schedule_.push_back(s);
    }
    for (Index j = 0; j < blocks; ++j)
      blocks_.push_back(std::make_unique<DiscriminatorBlock<T>>("disc.block" + std::to_string(j), schedule_[j],
                                                                schedule_[j + 1], pyramid, config.temporal_kernel,
                                                                config.init_seed));
  }

  Discriminator(const Discriminator&) = delete;
  Discriminator& operator=(const Discriminator&) = delete;

  /// Critic scores [B] for motion [B, C, T, N] with class labels.
  Tensor<T> operator()(const Tensor<T>& x, const std::vector<Index>& labels) const {
    const auto& s = schedule_.front();
    KFORGE_CHECK(x.rank() == 4 && x.dim(1) == config_.channels && x.dim(2) == s.frames && x.dim(3) == s.joints,
                 ShapeError, "discriminator expects [B,", config_.channels, ",", s.frames, ",", s.joints, "], got ",
                 shape_str(x.shape()));
    const Index B = x.dim(0);
    KFORGE_CHECK(static_cast<Index>(labels.size()) == B, ShapeError, labels.size(), " labels for batch of ", B);
    const auto e = expand(reshape(embedding_(labels), {B, 1, 1, config_.embed_dim}),
                          {B, s.frames, s.joints, config_.embed_dim});
    auto h = concat(std::vector<Tensor<T>>{to_channel_last(x), e}, 3);
    for (const auto& b : blocks_) h = (*b)(h);
    return reshape(head_(mean(h, {1, 2}, false)), {B});
  }

  void collect(ParameterList<T>& out) {
    embedding_.collect(out);
    for (auto& b : blocks_) b->collect(out);
    head_.collect(out);
  }

  ParameterList<T> parameters() {
    ParameterList<T> out;
    collect(out);
    return out;
  }

  const std::vector<Stage>& schedule() const { return schedule_; }
  Index block_count() const { return static_cast<Index>(blocks_.size()); }
  DiscriminatorBlock<T>& block(Index i) { return *blocks_.at(static_cast<std::size_t>(i)); }
  const DiscriminatorBlock<T>& block(Index i) const { return *blocks_.at(static_cast<std::size_t>(i)); }
  ClassEmbedding<T>& embedding() { return embedding_; }
  Linear<T>& head() { return head_; }

  std::vector<std::string> head_kinds() const { return {"mean_frames_joints", "linear"}; }

 private:
  ModelConfig config_;
  std::vector<Stage> schedule_;
  ClassEmbedding<T> embedding_;
  std::vector<std::unique_ptr<DiscriminatorBlock<T>>> blocks_;
  Linear<T> head_;
};

// ---------------------------------------------------------------------------
// Truncation.

/// Per-class mean of the mapping output.
template <typename T>
struct TruncationCenter {
  Tensor<T> centers;  // [num_classes, mapping_width]
  Index samples = 0;
};

template <typename T>
Tensor<T> sample_latents(Index batch, Index dim, std::uint64_t seed, std::initializer_list<std::uint64_t> coords) {
  Rng rng(seed, Stream::kLatent, coords);
  return randn<T>({batch, dim}, rng);
}

template <typename T>
TruncationCenter<T> compute_truncation_center(const Generator<T>& gen, std::uint64_t seed, Index samples = 1000) {
  KFORGE_CHECK(samples >= 1, ArgumentError, "truncation center needs at least one sample");
  NoGradGuard no_grad;
  const auto& c = gen.config();
  std::vector<T> centers;
  for (Index y = 0; y < c.num_classes; ++y) {
    const auto z = sample_latents<T>(samples, c.latent_dim, seed, {0x7c3e, static_cast<std::uint64_t>(y)});
    const auto w = gen.map(z, std::vector<Index>(static_cast<std::size_t>(samples), y));
    const auto m = mean(w, {0}, false);
    centers.insert(centers.end(), m.data().begin(), m.data().end());
  }
  return {Tensor<T>({c.num_classes, c.mapping_width}, std::move(centers)), samples};
}

/// w' = center_y + psi (w - center_y); psi = 1 returns w unchanged.
template <typename T>
Tensor<T> truncate(const Tensor<T>& w, const std::vector<Index>& labels, const TruncationCenter<T>& center, double psi) {
  KFORGE_CHECK(psi >= 0.0 && psi <= 1.0, ArgumentError, "truncation psi must lie in [0,1], got ", psi);
  if (psi == 1.0) return w;
  KFORGE_CHECK(w.rank() == 2 && w.dim(1) == center.centers.dim(1), ShapeError, "latent shape ", shape_str(w.shape()),
               " does not match truncation center width ", center.centers.dim(1));
  for (Index y : labels)
    KFORGE_CHECK(y >= 0 && y < center.centers.dim(0), ArgumentError, "class id ", y, " outside [0,",
                 center.centers.dim(0), ")");
  const auto c = index_select(center.centers, labels);
  return add(c, mul_scalar(sub(w, c), static_cast<T>(psi)));
}

// ---------------------------------------------------------------------------
// Normalization placement audit.

struct BlockAudit {
  std::string model;
  Index index = 0;
  std::string resampling;
  std::vector<std::string> layers;
};

struct ModelAudit {
  std::vector<BlockAudit> blocks;
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

inline bool is_normalization(const std::string& kind) {
  return kind == "batch_norm" || kind == "layer_norm" || kind == "instance_norm" || kind == "group_norm";
}

template <typename T>
ModelAudit audit_models(const Generator<T>& gen, const Discriminator<T>& disc) {
  ModelAudit a;
  for (Index i = 0; i < gen.block_count(); ++i) {
    const auto& b = gen.block(i);
    BlockAudit ba{"generator", i, b.spatial_upsampling() ? "spatial+temporal up" : "temporal up", b.layer_kinds()};
    for (const auto& k : ba.layers)
      if (is_normalization(k) && b.spatial_upsampling())
        a.violations.push_back(::kforge::detail::concat("generator block ", i, " upsamples joints but contains ", k));
    a.blocks.push_back(std::move(ba));
  }
  for (Index i = 0; i < disc.block_count(); ++i) {
    const auto& b = disc.block(i);
    BlockAudit ba{"discriminator", i, b.spatial_downsampling() ? "spatial+temporal down" : "temporal down",
                  b.layer_kinds()};
    for (const auto& k : ba.layers)
      if (is_normalization(k)) a.violations.push_back(::kforge::detail::concat("discriminator block ", i, " contains ", k));
    a.blocks.push_back(std::move(ba));
  }
  for (const auto& k : disc.head_kinds())
    if (is_normalization(k)) a.violations.push_back("discriminator head contains " + k);
  return a;
}

}  // namespace kforge::nn

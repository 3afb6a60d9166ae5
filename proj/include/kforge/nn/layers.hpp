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

// Building blocks of the generator and discriminator. Feature maps inside the
// models are channel-last, [batch, frames, joints, channels].

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "kforge/core.hpp"
#include "kforge/graph/skeleton.hpp"

namespace kforge::nn {

inline std::uint64_t name_hash(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// N(0, stddev^2) initial values, keyed by the parameter path.
template <typename T>
Tensor<T> init_normal(std::uint64_t seed, const std::string& path, const Shape& shape, double stddev) {
  Rng rng(seed, Stream::kInit, {name_hash(path)});
  return randn<T>(shape, rng, static_cast<T>(stddev));
}

/// [B,C,T,N] -> [B,T,N,C].
template <typename T>
Tensor<T> to_channel_last(const Tensor<T>& x) {
  KFORGE_CHECK(x.rank() == 4, ShapeError, "expected [B,C,T,N], got ", shape_str(x.shape()));
  return permute(x, {0, 2, 3, 1});
}

/// [B,T,N,C] -> [B,C,T,N].
template <typename T>
Tensor<T> to_channel_first(const Tensor<T>& x) {
  KFORGE_CHECK(x.rank() == 4, ShapeError, "expected [B,T,N,C], got ", shape_str(x.shape()));
  return permute(x, {0, 3, 1, 2});
}

template <typename T>
Tensor<T> graph_matrix(const graph::Matrix& m) {
  return Tensor<T>(Shape{m.rows, m.cols}, std::vector<T>(m.values.begin(), m.values.end()));
}

template <typename T>
class Linear {
 public:
  Linear(std::string name, Index in, Index out, std::uint64_t seed, bool bias = true)
      : in_(in),
        out_(out),
        weight_(name + ".weight", init_normal<T>(seed, name + ".weight", {in, out}, 1.0 / std::sqrt(double(in)))),
        has_bias_(bias) {
    if (bias) bias_ = Parameter<T>(name + ".bias", Tensor<T>::zeros({out}));
  }

  /// [M, in] -> [M, out].
  Tensor<T> operator()(const Tensor<T>& x) const {
    KFORGE_CHECK(x.rank() == 2 && x.dim(1) == in_, ShapeError, weight_.name, ": expected [M,", in_, "], got ",
                 shape_str(x.shape()));
    auto y = matmul(x, weight_.value);
    return has_bias_ ? add(y, bias_.value) : y;
  }

  void collect(ParameterList<T>& out) {
    out.add(weight_);
    if (has_bias_) out.add(bias_);
  }

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }
  Index in_features() const { return in_; }
  Index out_features() const { return out_; }

 private:
  Index in_, out_;
  Parameter<T> weight_;
  Parameter<T> bias_;
  bool has_bias_;
};

template <typename T>
class ClassEmbedding {
 public:
  ClassEmbedding(std::string name, Index classes, Index dim, std::uint64_t seed)
      : classes_(classes), dim_(dim), table_(name + ".table", init_normal<T>(seed, name + ".table", {classes, dim}, 1.0)) {
    KFORGE_CHECK(classes >= 1 && dim >= 1, ConfigError, "class embedding needs at least one class and dimension");
  }

  /// [len(labels), dim].
  Tensor<T> operator()(const std::vector<Index>& labels) const {
    for (Index y : labels)
      KFORGE_CHECK(y >= 0 && y < classes_, ArgumentError, "class id ", y, " outside [0,", classes_, ")");
    return index_select(table_.value, labels);
  }

  void collect(ParameterList<T>& out) { out.add(table_); }
  Parameter<T>& table() { return table_; }
  Index classes() const { return classes_; }
  Index dim() const { return dim_; }

 private:
  Index classes_, dim_;
  Parameter<T> table_;
};

/// Partitioned spatial graph convolution with a learnable adjacency mask.
template <typename T>
class SpatialGCN {
 public:
  SpatialGCN(std::string name, const graph::PartitionedAdjacency& adj, Index in, Index out, std::uint64_t seed,
             bool bias = true)
      : name_(name),
        joints_(adj.raw[0].rows),
        in_(in),
        out_(out),
        weight_(name + ".weight", init_normal<T>(seed, name + ".weight", {3 * in, out}, 1.0 / std::sqrt(3.0 * in))),
        mask_(name + ".mask", Tensor<T>::ones({adj.raw[0].rows, adj.raw[0].rows})),
        has_bias_(bias) {
    for (Index p = 0; p < 3; ++p) {
      raw_.push_back(graph_matrix<T>(adj.raw[p]));
      fixed_.push_back(graph_matrix<T>(adj.normalized[p]));
    }
    if (bias) bias_ = Parameter<T>(name + ".bias", Tensor<T>::zeros({out}));
  }

  /// Degree-normalized (A_p * M) for the three partitions, stacked to [3N, N].
  Tensor<T> normalized_adjacency() const {
    std::vector<Tensor<T>> parts;
    for (const auto& a : raw_) {
      auto masked = mul(a, mask_.value);
      auto deg = sum(masked, {1}, true);
      std::vector<T> guard(static_cast<std::size_t>(joints_));
      for (Index i = 0; i < joints_; ++i) guard[i] = deg.data()[i] > kDegreeEps ? T(1) : T(0);
      const Tensor<T> keep({joints_, 1}, guard);
      const Tensor<T> fill({joints_, 1}, ::kforge::detail::unary_values(keep, [](T g) { return T(1) - g; }));
      auto inv = div(Tensor<T>::ones({joints_, 1}), sqrt(add(mul(deg, keep), fill)));
      parts.push_back(mul(mul(masked, inv), reshape(inv, {1, joints_})));
    }
    return concat(parts, 0);
  }

  /// [B,T,N,Cin] -> [B,T,N,Cout]. With `use_mask` false the fixed
  /// normalized partitions are used and the mask is ignored.
  Tensor<T> operator()(const Tensor<T>& x, bool use_mask = true) const {
    KFORGE_CHECK(x.rank() == 4 && x.dim(2) == joints_ && x.dim(3) == in_, ShapeError, name_, ": expected [B,T,",
                 joints_, ",", in_, "], got ", shape_str(x.shape()));
    const Index B = x.dim(0), Tn = x.dim(1), N = joints_, C = in_;
    const auto adj = use_mask ? normalized_adjacency() : concat(fixed_, 0);
    auto xs = reshape(permute(x, {2, 0, 1, 3}), {N, B * Tn * C});
    auto mixed = reshape(matmul(adj, xs), {3, N, B, Tn, C});
    auto rows = reshape(permute(mixed, {2, 3, 1, 0, 4}), {B * Tn * N, 3 * C});
    auto y = matmul(rows, weight_.value);
    if (has_bias_) y = add(y, bias_.value);
    return reshape(y, {B, Tn, N, out_});
  }

  void collect(ParameterList<T>& out) {
    out.add(weight_);
    out.add(mask_);
    if (has_bias_) out.add(bias_);
  }

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& mask() { return mask_; }
  Parameter<T>& bias() { return bias_; }
  Index joints() const { return joints_; }

  static constexpr T kDegreeEps = T(1e-6);

 private:
  std::string name_;
  Index joints_, in_, out_;
  Parameter<T> weight_;
  Parameter<T> mask_;
  Parameter<T> bias_;
  bool has_bias_;
  std::vector<Tensor<T>> raw_;
  std::vector<Tensor<T>> fixed_;
};

/// Joint-wise convolution along frames with stride 1; the sequence is padded
/// by repeating its first and last frames so the length is preserved.
template <typename T>
class TemporalConv {
 public:
  TemporalConv(std::string name, Index in, Index out, Index kernel, std::uint64_t seed, bool bias = true)
      : name_(name),
        in_(in),
        out_(out),
        kernel_(kernel),
        weight_(name + ".weight",
                init_normal<T>(seed, name + ".weight", {kernel * in, out}, 1.0 / std::sqrt(double(kernel * in)))),
        has_bias_(bias) {
    KFORGE_CHECK(kernel >= 1 && kernel % 2 == 1, ConfigError, name, ": temporal kernel must be odd, got ", kernel);
    if (bias) bias_ = Parameter<T>(name + ".bias", Tensor<T>::zeros({out}));
  }

  /// [B,T,N,Cin] -> [B,T,N,Cout].
  Tensor<T> operator()(const Tensor<T>& x) const {
    KFORGE_CHECK(x.rank() == 4 && x.dim(3) == in_, ShapeError, name_, ": expected [B,T,N,", in_, "], got ",
                 shape_str(x.shape()));
    const Index B = x.dim(0), Tn = x.dim(1), N = x.dim(2);
    const Index pad = (kernel_ - 1) / 2;
    auto xp = x;
    if (pad > 0) {
      auto head = expand(slice(x, 1, 0, 1), {B, pad, N, in_});
      auto tail = expand(slice(x, 1, Tn - 1, 1), {B, pad, N, in_});
      xp = concat(std::vector<Tensor<T>>{head, x, tail}, 1);
    }
    auto cols = reshape(unfold_time(xp, kernel_, 0), {B * Tn * N, kernel_ * in_});
    auto y = matmul(cols, weight_.value);
    if (has_bias_) y = add(y, bias_.value);
    return reshape(y, {B, Tn, N, out_});
  }

  void collect(ParameterList<T>& out) {
    out.add(weight_);
    if (has_bias_) out.add(bias_);
  }

  /// Weight entry for tap k (frame offset k - K/2), input channel i, output channel o.
  T& tap(Index k, Index i, Index o) { return weight_.value.mutable_data()[(k * in_ + i) * out_ + o]; }

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }
  Index kernel() const { return kernel_; }

 private:
  std::string name_;
  Index in_, out_, kernel_;
  Parameter<T> weight_;
  Parameter<T> bias_;
  bool has_bias_;
};

/// Adds r * w with r ~ N(0,1) drawn per (sample, frame, joint) and w a
/// learned per-channel weight starting at zero.
template <typename T>
class NoiseInjection {
 public:
  NoiseInjection(std::string name, Index channels, std::uint64_t stream_id)
      : channels_(channels), stream_id_(stream_id), weight_(name + ".weight", Tensor<T>::zeros({channels})) {}

  Tensor<T> operator()(const Tensor<T>& x, std::uint64_t noise_seed) const {
    KFORGE_CHECK(x.rank() == 4 && x.dim(3) == channels_, ShapeError, weight_.name, ": expected [B,T,N,", channels_,
                 "], got ", shape_str(x.shape()));
    Rng rng(noise_seed, Stream::kNoise, {stream_id_});
    const auto r = randn<T>({x.dim(0), x.dim(1), x.dim(2), 1}, rng);
    return add(x, mul(r, weight_.value));
  }

  void collect(ParameterList<T>& out) { out.add(weight_); }
  Parameter<T>& weight() { return weight_; }

 private:
  Index channels_;
  std::uint64_t stream_id_;
  Parameter<T> weight_;
};

/// Per-channel batch normalization over (batch, frames, joints).
template <typename T>
class BatchNorm {
 public:
  BatchNorm(std::string name, Index channels, T momentum = T(0.1), T eps = T(1e-5))
      : channels_(channels),
        momentum_(momentum),
        eps_(eps),
        gamma_(name + ".gamma", Tensor<T>::ones({channels})),
        beta_(name + ".beta", Tensor<T>::zeros({channels})),
        running_mean_(name + ".running_mean", Tensor<T>::zeros({channels}), false),
        running_var_(name + ".running_var", Tensor<T>::ones({channels}), false) {}

  Tensor<T> operator()(const Tensor<T>& x, bool training) {
    KFORGE_CHECK(x.rank() == 4 && x.dim(3) == channels_, ShapeError, gamma_.name, ": expected [B,T,N,", channels_,
                 "], got ", shape_str(x.shape()));
    if (!training) {
      auto inv = div(Tensor<T>::ones({channels_}), sqrt(add_scalar(running_var_.value, eps_)));
      return add(mul(mul(sub(x, running_mean_.value), inv), gamma_.value), beta_.value);
    }
    auto mu = mean(x, {0, 1, 2}, false);
    auto centered = sub(x, mu);
    auto var = mean(square(centered), {0, 1, 2}, false);
    auto y = add(mul(div(centered, sqrt(add_scalar(var, eps_))), gamma_.value), beta_.value);
    if (!track_) return y;
    const Index count = x.dim(0) * x.dim(1) * x.dim(2);
    auto rm = running_mean_.value.mutable_data();
    auto rv = running_var_.value.mutable_data();
    const T unbias = count > 1 ? static_cast<T>(count) / static_cast<T>(count - 1) : T(1);
    for (Index c = 0; c < channels_; ++c) {
      rm[c] = (T(1) - momentum_) * rm[c] + momentum_ * mu.data()[c];
      rv[c] = (T(1) - momentum_) * rv[c] + momentum_ * var.data()[c] * unbias;
    }
    return y;
  }

  /// When off, training-mode calls leave the running statistics untouched.
  void set_track_running_stats(bool on) { track_ = on; }

  void collect(ParameterList<T>& out) {
    out.add(gamma_);
    out.add(beta_);
    out.add(running_mean_);
    out.add(running_var_);
  }

 private:
  Index channels_;
  T momentum_, eps_;
  bool track_ = true;
  Parameter<T> gamma_, beta_, running_mean_, running_var_;
};

}  // namespace kforge::nn

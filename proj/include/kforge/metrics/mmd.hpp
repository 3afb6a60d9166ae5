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
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "kforge/tensor/tensor.hpp"

namespace kforge::metrics {

/// Row-major sample sets: one sample per row.
using SampleMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Gaussian RBF mixture. With `median_heuristic` each scale multiplies the
/// median pairwise distance of the pooled sets; otherwise scales are the
/// bandwidths themselves.
struct KernelConfig {
  std::vector<double> scales{0.25, 0.5, 1.0, 2.0, 4.0};
  bool median_heuristic = true;
  /// Base bandwidth when every pooled pair coincides.
  double fallback = 1.0;

  static KernelConfig fixed(std::vector<double> bandwidths) {
    KernelConfig k;
    k.scales = std::move(bandwidths);
    k.median_heuristic = false;
    return k;
  }

  void validate() const {
    KFORGE_CHECK(!scales.empty(), ConfigError, "kernel needs at least one bandwidth");
    for (double s : scales) KFORGE_CHECK(s > 0 && std::isfinite(s), ConfigError, "kernel bandwidth ", s, " must be positive");
    KFORGE_CHECK(fallback > 0, ConfigError, "fallback bandwidth must be positive");
  }

  nlohmann::json to_json() const {
    return {{"scales", scales}, {"median_heuristic", median_heuristic}, {"fallback", fallback}};
  }

  static KernelConfig from_json(const nlohmann::json& j) {
    KernelConfig k;
    KFORGE_CHECK(j.is_object(), ConfigError, "kernel config must be a JSON object");
    for (const auto& [key, v] : j.items()) {
      try {
        if (key == "scales") k.scales = v.get<std::vector<double>>();
        else if (key == "median_heuristic") k.median_heuristic = v.get<bool>();
        else if (key == "fallback") k.fallback = v.get<double>();
        else throw ConfigError("unknown kernel key '" + key + "'");
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("kernel key '" + key + "': " + e.what());
      }
    }
    return k;
  }

  std::string fingerprint() const {
    std::string s = median_heuristic ? "rbf-mixture/median[" : "rbf-mixture/fixed[";
    char buf[64];
    for (std::size_t i = 0; i < scales.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%s%.17g", i ? "," : "", scales[i]);
      s += buf;
    }
    std::snprintf(buf, sizeof(buf), "]/fallback=%.17g", fallback);
    return s + buf;
  }
};

namespace detail {

inline double squared_distance(const SampleMatrix& a, Index i, const SampleMatrix& b, Index j) {
  double s = 0.0;
  for (Index k = 0; k < a.cols(); ++k) {
    const double d = a(i, k) - b(j, k);
    s += d * d;
  }
  return s;
}

/// Squared distances, row i of `a` against row j of `b`.
inline Eigen::MatrixXd squared_distances(const SampleMatrix& a, const SampleMatrix& b) {
  Eigen::MatrixXd d(a.rows(), b.rows());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.rows(); ++j) d(i, j) = squared_distance(a, i, b, j);
  return d;
}

}  // namespace detail

/// Lower median of all pairwise distances within X ∪ Y (pairs of distinct
/// rows).
inline double median_pairwise_distance(const SampleMatrix& x, const SampleMatrix& y) {
  SampleMatrix pooled(x.rows() + y.rows(), x.cols());
  pooled << x, y;
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(pooled.rows() * (pooled.rows() - 1) / 2));
  for (Index i = 0; i < pooled.rows(); ++i)
    for (Index j = i + 1; j < pooled.rows(); ++j) d.push_back(detail::squared_distance(pooled, i, pooled, j));
  if (d.empty()) return 0.0;
  auto mid = d.begin() + static_cast<std::ptrdiff_t>((d.size() - 1) / 2);
  std::nth_element(d.begin(), mid, d.end());
  return std::sqrt(*mid);
}

/// Bandwidths actually used for the pair (X, Y).
inline std::vector<double> bandwidths(const SampleMatrix& x, const SampleMatrix& y, const KernelConfig& k) {
  k.validate();
  if (!k.median_heuristic) return k.scales;
  double base = median_pairwise_distance(x, y);
  if (!(base > 0)) base = k.fallback;
  std::vector<double> out;
  for (double s : k.scales) out.push_back(s * base);
  return out;
}

/// Unbiased MMD² with the diagonal excluded from the within-set sums,
/// summed over the bandwidth mixture.
inline double mmd2_unbiased(const SampleMatrix& x, const SampleMatrix& y, const KernelConfig& kernel = {}) {
  KFORGE_CHECK(x.rows() >= 2 && y.rows() >= 2, ArgumentError, "MMD needs at least 2 samples per set, got ",
               x.rows(), " and ", y.rows());
  KFORGE_CHECK(x.cols() == y.cols(), ShapeError, "MMD sets have dimensions ", x.cols(), " and ", y.cols());
  const auto bw = bandwidths(x, y, kernel);
  const auto dxx = detail::squared_distances(x, x), dyy = detail::squared_distances(y, y),
             dxy = detail::squared_distances(x, y);
  const double n = static_cast<double>(x.rows()), m = static_cast<double>(y.rows());
  double total = 0.0;
  for (double sigma : bw) {
    const double g = 1.0 / (2.0 * sigma * sigma);
    double kxx = 0.0, kyy = 0.0, kxy = 0.0;
    for (Index i = 0; i < x.rows(); ++i)
      for (Index j = 0; j < x.rows(); ++j)
        if (i != j) kxx += std::exp(-g * dxx(i, j));
    for (Index i = 0; i < y.rows(); ++i)
      for (Index j = 0; j < y.rows(); ++j)
        if (i != j) kyy += std::exp(-g * dyy(i, j));
    for (Index i = 0; i < x.rows(); ++i)
      for (Index j = 0; j < y.rows(); ++j) kxy += std::exp(-g * dxy(i, j));
    total += kxx / (n * (n - 1)) + kyy / (m * (m - 1)) - 2.0 * kxy / (n * m);
  }
  return total;
}

/// A reported MMD: sqrt(max(raw, 0)) with the raw estimate retained.
struct MmdValue {
  double value = 0.0;
  double raw = 0.0;
  bool clamped = false;
  /// Per-frame raw MMD² (action variant only).
  std::vector<double> per_frame;

  static MmdValue from_raw(double raw) {
    MmdValue v;
    v.raw = raw;
    v.clamped = raw < 0;
    v.value = std::sqrt(std::max(raw, 0.0));
    return v;
  }
};

/// Sequence sets [S, C, T, N] flattened per sample to [S, C*T*N].
template <typename T>
SampleMatrix flatten_sequences(const Tensor<T>& x) {
  KFORGE_CHECK(x.rank() == 4, ShapeError, "expected sequences [S,C,T,N], got ", shape_str(x.shape()));
  const Index s = x.dim(0), per = x.numel() / std::max<Index>(s, 1);
  SampleMatrix m(s, per);
  const auto d = x.data();
  for (Index i = 0; i < s; ++i)
    for (Index k = 0; k < per; ++k) m(i, k) = static_cast<double>(d[static_cast<std::size_t>(i * per + k)]);
  return m;
}

/// Frame `t` of every sequence, flattened over joints and channels.
template <typename T>
SampleMatrix frame_samples(const Tensor<T>& x, Index t) {
  KFORGE_CHECK(x.rank() == 4, ShapeError, "expected sequences [S,C,T,N], got ", shape_str(x.shape()));
  const Index s = x.dim(0), c = x.dim(1), f = x.dim(2), n = x.dim(3);
  SampleMatrix m(s, c * n);
  for (Index i = 0; i < s; ++i)
    for (Index ch = 0; ch < c; ++ch)
      for (Index j = 0; j < n; ++j) m(i, ch * n + j) = static_cast<double>(x.data()[((i * c + ch) * f + t) * n + j]);
  return m;
}

/// MMD_s: unbiased MMD² over whole flattened sequences.
template <typename T>
MmdValue mmd_sequences(const Tensor<T>& real, const Tensor<T>& fake, const KernelConfig& kernel = {}) {
  KFORGE_CHECK(real.rank() == 4 && fake.rank() == 4 && real.dim(1) == fake.dim(1) && real.dim(2) == fake.dim(2) &&
                   real.dim(3) == fake.dim(3),
               ShapeError, "sequence sets ", shape_str(real.shape()), " and ", shape_str(fake.shape()),
               " are not comparable");
  return MmdValue::from_raw(mmd2_unbiased(flatten_sequences(real), flatten_sequences(fake), kernel));
}

/// MMD_a: per-frame unbiased MMD² averaged over frames.
template <typename T>
MmdValue mmd_actions(const Tensor<T>& real, const Tensor<T>& fake, const KernelConfig& kernel = {}) {
  KFORGE_CHECK(real.rank() == 4 && fake.rank() == 4, ShapeError, "expected sequence sets [S,C,T,N]");
  KFORGE_CHECK(real.dim(2) == fake.dim(2), ShapeError, "frame count mismatch: ", real.dim(2), " vs ", fake.dim(2));
  KFORGE_CHECK(real.dim(1) == fake.dim(1) && real.dim(3) == fake.dim(3), ShapeError, "sequence sets ",
               shape_str(real.shape()), " and ", shape_str(fake.shape()), " are not comparable");
  std::vector<double> frames;
  double mean = 0.0;
  for (Index t = 0; t < real.dim(2); ++t) {
    frames.push_back(mmd2_unbiased(frame_samples(real, t), frame_samples(fake, t), kernel));
    mean += frames.back();
  }
  auto v = MmdValue::from_raw(mean / static_cast<double>(real.dim(2)));
  v.per_frame = std::move(frames);
  return v;
}

}  // namespace kforge::metrics

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

#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "kforge/error.hpp"
#include "kforge/tensor/tensor.hpp"

namespace kforge::graph {

using Edge = std::pair<Index, Index>;

/// Small dense row-major matrix used for adjacency bookkeeping.
struct Matrix {
  Index rows = 0;
  Index cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(Index r, Index c, double fill = 0.0) : rows(r), cols(c), values(static_cast<std::size_t>(r * c), fill) {}

  static Matrix identity(Index n) {
    Matrix m(n, n);
    for (Index i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(Index r, Index c) { return values[static_cast<std::size_t>(r * cols + c)]; }
  double operator()(Index r, Index c) const { return values[static_cast<std::size_t>(r * cols + c)]; }
  bool operator==(const Matrix&) const = default;
};

struct SkeletonSpec {
  std::string name;
  std::vector<std::string> joint_names;
  std::vector<Edge> edges;
  Index center_joint = 0;
  Index root_joint = 0;

  Index joint_count() const { return static_cast<Index>(joint_names.size()); }

  Matrix adjacency() const {
    Matrix a(joint_count(), joint_count());
    for (const auto& [i, j] : edges) {
      a(i, j) = 1.0;
      a(j, i) = 1.0;
    }
    return a;
  }

  /// Breadth-first hop distances from `source`; unreachable joints get -1.
  std::vector<Index> hop_distances(Index source) const {
    const Index n = joint_count();
    std::vector<std::vector<Index>> nbrs(static_cast<std::size_t>(n));
    for (const auto& [i, j] : edges) {
      nbrs[i].push_back(j);
      nbrs[j].push_back(i);
    }
    std::vector<Index> dist(static_cast<std::size_t>(n), -1);
    std::deque<Index> queue{source};
    dist[source] = 0;
    while (!queue.empty()) {
      const Index u = queue.front();
      queue.pop_front();
      for (Index v : nbrs[u])
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          queue.push_back(v);
        }
    }
    return dist;
  }

  bool connected() const {
    if (joint_count() == 0) return false;
    for (Index d : hop_distances(0))
      if (d < 0) return false;
    return true;
  }

  /// Throws ConfigError describing the first violated invariant.
  void validate() const {
    const Index n = joint_count();
    KFORGE_CHECK(n > 0, ConfigError, "skeleton '", name, "' has no joints");
    for (const auto& [i, j] : edges) {
      KFORGE_CHECK(i >= 0 && i < n && j >= 0 && j < n, ConfigError, "skeleton '", name, "': edge (", i, ",", j,
                   ") references a joint outside [0,", n, ")");
      KFORGE_CHECK(i != j, ConfigError, "skeleton '", name, "': self-loop on joint ", i);
    }
    KFORGE_CHECK(center_joint >= 0 && center_joint < n, ConfigError, "skeleton '", name, "': invalid center joint ",
                 center_joint);
    KFORGE_CHECK(root_joint >= 0 && root_joint < n, ConfigError, "skeleton '", name, "': invalid root joint ",
                 root_joint);
    KFORGE_CHECK(connected(), ConfigError, "skeleton '", name, "' is not connected");
  }
};

/// Root / centripetal / centrifugal neighbour subsets of A + I, each kept raw
/// and degree-normalized.
struct PartitionedAdjacency {
  static constexpr Index kPartitions = 3;
  Index level = 0;
  std::array<Matrix, kPartitions> raw;
  std::array<Matrix, kPartitions> normalized;
};

/// Degree normalization D^-1/2 A D^-1/2 with row sums as degrees; rows of
/// zero degree use degree 1.
inline Matrix normalize_adjacency(const Matrix& a) {
  std::vector<double> inv_sqrt(static_cast<std::size_t>(a.rows));
  for (Index i = 0; i < a.rows; ++i) {
    double d = 0.0;
    for (Index j = 0; j < a.cols; ++j) d += a(i, j);
    inv_sqrt[i] = 1.0 / std::sqrt(d > 0.0 ? d : 1.0);
  }
  Matrix out(a.rows, a.cols);
  for (Index i = 0; i < a.rows; ++i)
    for (Index j = 0; j < a.cols; ++j) out(i, j) = a(i, j) * inv_sqrt[i] * inv_sqrt[j];
  return out;
}

/// Splits A + I by hop distance to the center joint, seen from the receiving
/// joint i: root = identity, centripetal = neighbours strictly closer to the
/// center, centrifugal = the rest (ties included).
inline PartitionedAdjacency partition_and_normalize(const SkeletonSpec& spec, Index level = 0) {
  spec.validate();
  const Index n = spec.joint_count();
  const auto hops = spec.hop_distances(spec.center_joint);
  PartitionedAdjacency out;
  out.level = level;
  out.raw[0] = Matrix::identity(n);
  out.raw[1] = Matrix(n, n);
  out.raw[2] = Matrix(n, n);
  for (const auto& [a, b] : spec.edges) {
    for (auto [i, j] : {Edge{a, b}, Edge{b, a}}) {
      if (hops[j] < hops[i])
        out.raw[1](i, j) = 1.0;
      else
        out.raw[2](i, j) = 1.0;
    }
  }
  for (Index p = 0; p < PartitionedAdjacency::kPartitions; ++p) out.normalized[p] = normalize_adjacency(out.raw[p]);
  return out;
}

}  // namespace kforge::graph

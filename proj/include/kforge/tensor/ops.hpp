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

// Differentiable tensor operations. Every backward rule is expressed with the
// operations in this file, which is what makes gradients differentiable when
// the backward pass runs with recording enabled.

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "kforge/tensor/rng.hpp"
#include "kforge/tensor/tensor.hpp"

namespace kforge {

/// Sparse linear map applied along one tensor axis: out[r] = sum_k w_k * in[c_k].
template <typename T>
struct AxisMap {
  Index in_size = 0;
  Index out_size = 0;
  std::vector<std::vector<std::pair<Index, T>>> rows;

  AxisMap transposed() const {
    AxisMap t;
    t.in_size = out_size;
    t.out_size = in_size;
    t.rows.resize(static_cast<std::size_t>(in_size));
    for (Index r = 0; r < out_size; ++r)
      for (const auto& [c, w] : rows[r]) t.rows[c].emplace_back(r, w);
    return t;
  }
};

// Forward declarations so backward closures can refer to any op.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> neg(const Tensor<T>& a);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T s);
template <typename T> Tensor<T> mul_scalar(const Tensor<T>& a, T s);
template <typename T> Tensor<T> exp(const Tensor<T>& a);
template <typename T> Tensor<T> log(const Tensor<T>& a);
template <typename T> Tensor<T> sqrt(const Tensor<T>& a);
template <typename T> Tensor<T> pow(const Tensor<T>& a, T p);
template <typename T> Tensor<T> leaky_relu(const Tensor<T>& a, T slope);
template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> sum(const Tensor<T>& a, const std::vector<Index>& axes, bool keepdim);
template <typename T> Tensor<T> sum_to(const Tensor<T>& a, const Shape& shape);
template <typename T> Tensor<T> expand(const Tensor<T>& a, const Shape& shape);
template <typename T> Tensor<T> reshape(const Tensor<T>& a, const Shape& shape);
template <typename T> Tensor<T> permute(const Tensor<T>& a, const std::vector<Index>& perm);
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool trans_a = false, bool trans_b = false);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, Index axis);
template <typename T> Tensor<T> slice(const Tensor<T>& a, Index axis, Index start, Index length);
template <typename T> Tensor<T> pad_axis(const Tensor<T>& a, Index axis, Index before, Index full);
template <typename T> Tensor<T> index_select(const Tensor<T>& a, const std::vector<Index>& ids);
template <typename T> Tensor<T> index_add(const Tensor<T>& a, const std::vector<Index>& ids, Index rows);
template <typename T> Tensor<T> axis_linear(const Tensor<T>& a, Index axis, std::shared_ptr<const AxisMap<T>> map);
template <typename T> Tensor<T> unfold_time(const Tensor<T>& a, Index kernel, Index pad);
template <typename T> Tensor<T> fold_time(const Tensor<T>& a, Index frames, Index kernel, Index pad);

namespace detail {

inline Index normalize_axis(Index axis, Index rank) {
  if (axis < 0) axis += rank;
  KFORGE_CHECK(axis >= 0 && axis < rank, ShapeError, "axis ", axis, " out of range for rank ", rank);
  return axis;
}

inline Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    const Index da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const Index db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    KFORGE_CHECK(da == db || da == 1 || db == 1, ShapeError, "cannot broadcast ", shape_str(a), " with ",
                 shape_str(b));
    out[i] = da == 1 ? db : da;
  }
  return out;
}

/// Strides of `in` viewed in the broadcast shape `out` (0 on broadcast axes).
inline std::vector<Index> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<Index> strides(out.size(), 0);
  const auto base = contiguous_strides(in);
  const std::size_t off = out.size() - in.size();
  for (std::size_t i = 0; i < in.size(); ++i) strides[i + off] = in[i] == 1 ? 0 : base[i];
  return strides;
}

/// Calls fn(linear_out, offset_a, offset_b) over every element of `out`.
template <typename Fn>
void for_each_strided(const Shape& out, const std::vector<Index>& sa, const std::vector<Index>& sb, Fn&& fn) {
  const Index total = numel_of(out);
  if (total == 0) return;
  const std::size_t r = out.size();
  if (r == 0) {
    fn(Index{0}, Index{0}, Index{0});
    return;
  }
  const Index inner = out[r - 1];
  const Index step_a = sa[r - 1];
  const Index step_b = sb[r - 1];
  std::vector<Index> idx(r, 0);
  Index base_a = 0;
  Index base_b = 0;
  Index o = 0;
  const Index outer = total / inner;
  for (Index it = 0; it < outer; ++it) {
    Index ia = base_a;
    Index ib = base_b;
    for (Index k = 0; k < inner; ++k, ++o, ia += step_a, ib += step_b) fn(o, ia, ib);
    for (Index d = static_cast<Index>(r) - 2; d >= 0; --d) {
      ++idx[d];
      base_a += sa[d];
      base_b += sb[d];
      if (idx[d] < out[d]) break;
      base_a -= sa[d] * out[d];
      base_b -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
}

template <typename T, typename F>
std::pair<Shape, std::vector<T>> binary_values(const Tensor<T>& a, const Tensor<T>& b, F f) {
  if (a.shape() == b.shape()) {
    std::vector<T> out(static_cast<std::size_t>(a.numel()));
    const auto da = a.data();
    const auto db = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(da[i], db[i]);
    return {a.shape(), std::move(out)};
  }
  Shape shape = broadcast_shapes(a.shape(), b.shape());
  std::vector<T> out(static_cast<std::size_t>(numel_of(shape)));
  const auto da = a.data();
  const auto db = b.data();
  for_each_strided(shape, broadcast_strides(a.shape(), shape), broadcast_strides(b.shape(), shape),
                   [&](Index o, Index ia, Index ib) { out[o] = f(da[ia], db[ib]); });
  return {std::move(shape), std::move(out)};
}

template <typename T, typename F>
std::vector<T> unary_values(const Tensor<T>& a, F f) {
  std::vector<T> out(static_cast<std::size_t>(a.numel()));
  const auto da = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(da[i]);
  return out;
}

/// Sums `a` into a tensor of shape `keep` (same rank, 1 on reduced axes).
template <typename T>
std::vector<T> reduce_values(const Tensor<T>& a, const Shape& keep) {
  std::vector<T> out(static_cast<std::size_t>(numel_of(keep)), T(0));
  const auto da = a.data();
  for_each_strided(a.shape(), contiguous_strides(a.shape()), broadcast_strides(keep, a.shape()),
                   [&](Index, Index ia, Index ib) { out[ib] += da[ia]; });
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic.

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  auto [shape, values] = detail::binary_values(a, b, [](T x, T y) { return x + y; });
  const Shape sa = a.shape(), sb = b.shape();
  return Tensor<T>::make_result("add", std::move(shape), std::move(values), {a, b},
                                [sa, sb](const Tensor<T>& g, const std::vector<bool>& needs) {
                                  return std::vector<Tensor<T>>{needs[0] ? sum_to(g, sa) : Tensor<T>(),
                                                                needs[1] ? sum_to(g, sb) : Tensor<T>()};
                                });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  auto [shape, values] = detail::binary_values(a, b, [](T x, T y) { return x - y; });
  const Shape sa = a.shape(), sb = b.shape();
  return Tensor<T>::make_result("sub", std::move(shape), std::move(values), {a, b},
                                [sa, sb](const Tensor<T>& g, const std::vector<bool>& needs) {
                                  return std::vector<Tensor<T>>{needs[0] ? sum_to(g, sa) : Tensor<T>(),
                                                                needs[1] ? sum_to(neg(g), sb) : Tensor<T>()};
                                });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  auto [shape, values] = detail::binary_values(a, b, [](T x, T y) { return x * y; });
  return Tensor<T>::make_result("mul", std::move(shape), std::move(values), {a, b},
                                [a, b](const Tensor<T>& g, const std::vector<bool>& needs) {
                                  return std::vector<Tensor<T>>{needs[0] ? sum_to(mul(g, b), a.shape()) : Tensor<T>(),
                                                                needs[1] ? sum_to(mul(g, a), b.shape()) : Tensor<T>()};
                                });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  auto [shape, values] = detail::binary_values(a, b, [](T x, T y) { return x / y; });
  return Tensor<T>::make_result(
      "div", std::move(shape), std::move(values), {a, b}, [a, b](const Tensor<T>& g, const std::vector<bool>& needs) {
        Tensor<T> ga, gb;
        if (needs[0]) ga = sum_to(div(g, b), a.shape());
        if (needs[1]) gb = sum_to(neg(div(mul(g, a), mul(b, b))), b.shape());
        return std::vector<Tensor<T>>{ga, gb};
      });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& a) {
  return Tensor<T>::make_result("neg", a.shape(), detail::unary_values(a, [](T x) { return -x; }), {a},
                                [](const Tensor<T>& g, const std::vector<bool>&) { return std::vector<Tensor<T>>{neg(g)}; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  return Tensor<T>::make_result("add_scalar", a.shape(), detail::unary_values(a, [s](T x) { return x + s; }), {a},
                                [](const Tensor<T>& g, const std::vector<bool>&) { return std::vector<Tensor<T>>{g}; });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T s) {
  return Tensor<T>::make_result(
      "mul_scalar", a.shape(), detail::unary_values(a, [s](T x) { return x * s; }), {a},
      [s](const Tensor<T>& g, const std::vector<bool>&) { return std::vector<Tensor<T>>{mul_scalar(g, s)}; });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  return Tensor<T>::make_result(
      "exp", a.shape(), detail::unary_values(a, [](T x) { return std::exp(x); }), {a},
      [a](const Tensor<T>& g, const std::vector<bool>&) { return std::vector<Tensor<T>>{mul(g, exp(a))}; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& a) {
  return Tensor<T>::make_result(
      "log", a.shape(), detail::unary_values(a, [](T x) { return std::log(x); }), {a},
      [a](const Tensor<T>& g, const std::vector<bool>&) { return std::vector<Tensor<T>>{div(g, a)}; });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& a) {
  return Tensor<T>::make_result("sqrt", a.shape(), detail::unary_values(a, [](T x) { return std::sqrt(x); }), {a},
                                [a](const Tensor<T>& g, const std::vector<bool>&) {
                                  return std::vector<Tensor<T>>{div(mul_scalar(g, T(0.5)), sqrt(a))};
                                });
}

template <typename T>
Tensor<T> pow(const Tensor<T>& a, T p) {
  return Tensor<T>::make_result("pow", a.shape(), detail::unary_values(a, [p](T x) { return std::pow(x, p); }), {a},
                                [a, p](const Tensor<T>& g, const std::vector<bool>&) {
                                  return std::vector<Tensor<T>>{mul(g, mul_scalar(pow(a, p - T(1)), p))};
                                });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& a, T slope) {
  return Tensor<T>::make_result(
      "leaky_relu", a.shape(), detail::unary_values(a, [slope](T x) { return x > T(0) ? x : slope * x; }), {a},
      [a, slope](const Tensor<T>& g, const std::vector<bool>&) {
        // The local slope is piecewise constant, so it enters as a constant.
        Tensor<T> gate(a.shape(), detail::unary_values(a, [slope](T x) { return x > T(0) ? T(1) : slope; }));
        return std::vector<Tensor<T>>{mul(g, gate)};
      });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  return leaky_relu(a, T(0));
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  return mul(a, a);
}

// ---------------------------------------------------------------------------
// Reductions and broadcasting.

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = T(0);
  for (T v : a.data()) total += v;
  const Shape sa = a.shape();
  return Tensor<T>::make_result("sum", Shape{}, std::vector<T>{total}, {a},
                                [sa](const Tensor<T>& g, const std::vector<bool>&) {
                                  return std::vector<Tensor<T>>{expand(g, sa)};
                                });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a, const std::vector<Index>& axes, bool keepdim) {
  Shape keep = a.shape();
  std::vector<bool> reduced(keep.size(), false);
  for (Index ax : axes) {
    const Index n = detail::normalize_axis(ax, a.rank());
    reduced[n] = true;
    keep[n] = 1;
  }
  Shape out_shape;
  for (std::size_t i = 0; i < keep.size(); ++i)
    if (keepdim || !reduced[i]) out_shape.push_back(keep[i]);
  const Shape sa = a.shape();
  return Tensor<T>::make_result("sum_axes", out_shape, detail::reduce_values(a, keep), {a},
                                [sa, keep](const Tensor<T>& g, const std::vector<bool>&) {
                                  return std::vector<Tensor<T>>{expand(reshape(g, keep), sa)};
                                });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  return mul_scalar(sum(a), T(1) / static_cast<T>(a.numel()));
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a, const std::vector<Index>& axes, bool keepdim) {
  Index count = 1;
  for (Index ax : axes) count *= a.dim(ax);
  return mul_scalar(sum(a, axes, keepdim), T(1) / static_cast<T>(count));
}

template <typename T>
Tensor<T> sum_to(const Tensor<T>& a, const Shape& shape) {
  if (a.shape() == shape) return a;
  KFORGE_CHECK(static_cast<Index>(shape.size()) <= a.rank(), ShapeError, "sum_to: cannot reduce ",
               shape_str(a.shape()), " to ", shape_str(shape));
  Shape keep(a.shape().size(), 1);
  const std::size_t off = a.shape().size() - shape.size();
  for (std::size_t i = 0; i < shape.size(); ++i) {
    KFORGE_CHECK(shape[i] == 1 || shape[i] == a.shape()[i + off], ShapeError, "sum_to: cannot reduce ",
                 shape_str(a.shape()), " to ", shape_str(shape));
    keep[i + off] = shape[i];
  }
  const Shape sa = a.shape();
  return Tensor<T>::make_result("sum_to", shape, detail::reduce_values(a, keep), {a},
                                [sa](const Tensor<T>& g, const std::vector<bool>&) {
                                  return std::vector<Tensor<T>>{expand(g, sa)};
                                });
}

template <typename T>
Tensor<T> expand(const Tensor<T>& a, const Shape& shape) {
  if (a.shape() == shape) return a;
  KFORGE_CHECK(detail::broadcast_shapes(a.shape(), shape) == shape, ShapeError, "expand: cannot broadcast ",
               shape_str(a.shape()), " to ", shape_str(shape));
  std::vector<T> out(static_cast<std::size_t>(numel_of(shape)));
  const auto da = a.data();
  detail::for_each_strided(shape, detail::broadcast_strides(a.shape(), shape), std::vector<Index>(shape.size(), 0),
                           [&](Index o, Index ia, Index) { out[o] = da[ia]; });
  const Shape sa = a.shape();
  return Tensor<T>::make_result("expand", shape, std::move(out), {a},
                                [sa](const Tensor<T>& g, const std::vector<bool>&) {
                                  return std::vector<Tensor<T>>{sum_to(g, sa)};
                                });
}

/// Non-differentiable maximum along one axis (keeps the axis).
template <typename T>
Tensor<T> amax(const Tensor<T>& a, Index axis) {
  axis = detail::normalize_axis(axis, a.rank());
  Shape keep = a.shape();
  keep[axis] = 1;
  std::vector<T> out(static_cast<std::size_t>(numel_of(keep)), -std::numeric_limits<T>::infinity());
  const auto da = a.data();
  detail::for_each_strided(a.shape(), contiguous_strides(a.shape()), detail::broadcast_strides(keep, a.shape()),
                           [&](Index, Index ia, Index ib) { out[ib] = std::max(out[ib], da[ia]); });
  return Tensor<T>(keep, std::move(out));
}

// ---------------------------------------------------------------------------
// Layout.

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, const Shape& shape) {
  KFORGE_CHECK(numel_of(shape) == a.numel(), ShapeError, "reshape ", shape_str(a.shape()), " -> ", shape_str(shape));
  Tensor<T> out = Tensor<T>::alias(a, shape);
  if (grad_enabled() && a.requires_grad()) {
    auto node = std::make_shared<detail::Node<T>>();
    node->op = "reshape";
    node->inputs = {a};
    const Shape sa = a.shape();
    node->backward = [sa](const Tensor<T>& g, const std::vector<bool>&) {
      return std::vector<Tensor<T>>{reshape(g, sa)};
    };
    out.attach(std::move(node));
  }
  return out;
}

template <typename T>
Tensor<T> permute(const Tensor<T>& a, const std::vector<Index>& perm) {
  KFORGE_CHECK(static_cast<Index>(perm.size()) == a.rank(), ShapeError, "permute rank mismatch");
  Shape out_shape(perm.size());
  std::vector<Index> src_strides(perm.size());
  const auto base = contiguous_strides(a.shape());
  std::vector<Index> inverse(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    out_shape[i] = a.shape()[perm[i]];
    src_strides[i] = base[perm[i]];
    inverse[perm[i]] = static_cast<Index>(i);
  }
  std::vector<T> out(static_cast<std::size_t>(a.numel()));
  const auto da = a.data();
  detail::for_each_strided(out_shape, src_strides, std::vector<Index>(perm.size(), 0),
                           [&](Index o, Index ia, Index) { out[o] = da[ia]; });
  return Tensor<T>::make_result("permute", out_shape, std::move(out), {a},
                                [inverse](const Tensor<T>& g, const std::vector<bool>&) {
                                  return std::vector<Tensor<T>>{permute(g, inverse)};
                                });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  KFORGE_CHECK(a.rank() == 2, ShapeError, "transpose expects a matrix");
  return permute(a, {1, 0});
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool trans_a, bool trans_b) {
  KFORGE_CHECK(a.rank() == 2 && b.rank() == 2, ShapeError, "matmul expects matrices, got ", shape_str(a.shape()),
               " and ", shape_str(b.shape()));
  const Index m = trans_a ? a.dim(1) : a.dim(0);
  const Index k = trans_a ? a.dim(0) : a.dim(1);
  const Index kb = trans_b ? b.dim(1) : b.dim(0);
  const Index n = trans_b ? b.dim(0) : b.dim(1);
  KFORGE_CHECK(k == kb, ShapeError, "matmul inner dimensions differ: ", shape_str(a.shape()),
               trans_a ? "^T" : "", " x ", shape_str(b.shape()), trans_b ? "^T" : "");
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  std::vector<T> out(static_cast<std::size_t>(m * n));
  Eigen::Map<const Mat> ma(a.data().data(), a.dim(0), a.dim(1));
  Eigen::Map<const Mat> mb(b.data().data(), b.dim(0), b.dim(1));
  Eigen::Map<Mat> mc(out.data(), m, n);
  if (k == 0) {
    mc.setZero();
  } else if (!trans_a && !trans_b) {
    mc.noalias() = ma * mb;
  } else if (trans_a && !trans_b) {
    mc.noalias() = ma.transpose() * mb;
  } else if (!trans_a && trans_b) {
    mc.noalias() = ma * mb.transpose();
  } else {
    mc.noalias() = ma.transpose() * mb.transpose();
  }
  return Tensor<T>::make_result(
      "matmul", Shape{m, n}, std::move(out), {a, b},
      [a, b, trans_a, trans_b](const Tensor<T>& g, const std::vector<bool>& needs) {
        Tensor<T> ga, gb;
        if (needs[0]) ga = trans_a ? matmul(b, g, trans_b, true) : matmul(g, b, false, !trans_b);
        if (needs[1]) gb = trans_b ? matmul(g, a, true, trans_a) : matmul(a, g, !trans_a, false);
        return std::vector<Tensor<T>>{ga, gb};
      });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, Index axis) {
  KFORGE_CHECK(!parts.empty(), ShapeError, "concat of nothing");
  const Index rank = parts[0].rank();
  axis = detail::normalize_axis(axis, rank);
  Shape out_shape = parts[0].shape();
  out_shape[axis] = 0;
  std::vector<Index> extents;
  for (const auto& p : parts) {
    KFORGE_CHECK(p.rank() == rank, ShapeError, "concat rank mismatch");
    for (Index d = 0; d < rank; ++d)
      KFORGE_CHECK(d == axis || p.dim(d) == parts[0].dim(d), ShapeError, "concat shape mismatch ",
                   shape_str(p.shape()), " vs ", shape_str(parts[0].shape()));
    out_shape[axis] += p.dim(axis);
    extents.push_back(p.dim(axis));
  }
  Index outer = 1, inner = 1;
  for (Index d = 0; d < axis; ++d) outer *= out_shape[d];
  for (Index d = axis + 1; d < rank; ++d) inner *= out_shape[d];
  std::vector<T> out(static_cast<std::size_t>(numel_of(out_shape)));
  const Index row = out_shape[axis] * inner;
  Index offset = 0;
  for (const auto& p : parts) {
    const Index chunk = p.dim(axis) * inner;
    const auto src = p.data();
    for (Index o = 0; o < outer; ++o)
      std::copy_n(src.begin() + o * chunk, chunk, out.begin() + o * row + offset);
    offset += chunk;
  }
  return Tensor<T>::make_result("concat", out_shape, std::move(out), parts,
                                [axis, extents](const Tensor<T>& g, const std::vector<bool>& needs) {
                                  std::vector<Tensor<T>> grads(extents.size());
                                  Index start = 0;
                                  for (std::size_t i = 0; i < extents.size(); ++i) {
                                    if (needs[i]) grads[i] = slice(g, axis, start, extents[i]);
                                    start += extents[i];
                                  }
                                  return grads;
                                });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, Index axis, Index start, Index length) {
  axis = detail::normalize_axis(axis, a.rank());
  const Index full = a.dim(axis);
  KFORGE_CHECK(start >= 0 && length >= 0 && start + length <= full, ShapeError, "slice [", start, ", ",
               start + length, ") out of range ", full);
  Shape out_shape = a.shape();
  out_shape[axis] = length;
  Index outer = 1, inner = 1;
  for (Index d = 0; d < axis; ++d) outer *= out_shape[d];
  for (Index d = axis + 1; d < a.rank(); ++d) inner *= out_shape[d];
  std::vector<T> out(static_cast<std::size_t>(numel_of(out_shape)));
  const auto src = a.data();
  for (Index o = 0; o < outer; ++o)
    std::copy_n(src.begin() + (o * full + start) * inner, length * inner, out.begin() + o * length * inner);
  return Tensor<T>::make_result("slice", out_shape, std::move(out), {a},
                                [axis, start, full](const Tensor<T>& g, const std::vector<bool>&) {
                                  return std::vector<Tensor<T>>{pad_axis(g, axis, start, full)};
                                });
}

/// Embeds `a` into zeros of extent `full` along `axis`, starting at `before`.
template <typename T>
Tensor<T> pad_axis(const Tensor<T>& a, Index axis, Index before, Index full) {
  axis = detail::normalize_axis(axis, a.rank());
  const Index length = a.dim(axis);
  KFORGE_CHECK(before >= 0 && before + length <= full, ShapeError, "pad_axis out of range");
  Shape out_shape = a.shape();
  out_shape[axis] = full;
  Index outer = 1, inner = 1;
  for (Index d = 0; d < axis; ++d) outer *= out_shape[d];
  for (Index d = axis + 1; d < a.rank(); ++d) inner *= out_shape[d];
  std::vector<T> out(static_cast<std::size_t>(numel_of(out_shape)), T(0));
  const auto src = a.data();
  for (Index o = 0; o < outer; ++o)
    std::copy_n(src.begin() + o * length * inner, length * inner, out.begin() + (o * full + before) * inner);
  return Tensor<T>::make_result("pad_axis", out_shape, std::move(out), {a},
                                [axis, before, length](const Tensor<T>& g, const std::vector<bool>&) {
                                  return std::vector<Tensor<T>>{slice(g, axis, before, length)};
                                });
}

/// Rows of `a` (axis 0) picked by `ids`.
template <typename T>
Tensor<T> index_select(const Tensor<T>& a, const std::vector<Index>& ids) {
  KFORGE_CHECK(a.rank() >= 1, ShapeError, "index_select on scalar");
  const Index rows = a.dim(0);
  const Index inner = a.numel() / std::max<Index>(rows, 1);
  Shape out_shape = a.shape();
  out_shape[0] = static_cast<Index>(ids.size());
  std::vector<T> out(static_cast<std::size_t>(numel_of(out_shape)));
  const auto src = a.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    KFORGE_CHECK(ids[i] >= 0 && ids[i] < rows, ShapeError, "index ", ids[i], " out of range ", rows);
    std::copy_n(src.begin() + ids[i] * inner, inner, out.begin() + static_cast<Index>(i) * inner);
  }
  return Tensor<T>::make_result("index_select", out_shape, std::move(out), {a},
                                [ids, rows](const Tensor<T>& g, const std::vector<bool>&) {
                                  return std::vector<Tensor<T>>{index_add(g, ids, rows)};
                                });
}

/// Scatter-add of the rows of `a` into `rows` zero rows at positions `ids`.
template <typename T>
Tensor<T> index_add(const Tensor<T>& a, const std::vector<Index>& ids, Index rows) {
  KFORGE_CHECK(a.rank() >= 1 && a.dim(0) == static_cast<Index>(ids.size()), ShapeError, "index_add shape mismatch");
  const Index inner = a.numel() / std::max<Index>(a.dim(0), 1);
  Shape out_shape = a.shape();
  out_shape[0] = rows;
  std::vector<T> out(static_cast<std::size_t>(numel_of(out_shape)), T(0));
  const auto src = a.data();
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (Index k = 0; k < inner; ++k) out[ids[i] * inner + k] += src[static_cast<Index>(i) * inner + k];
  return Tensor<T>::make_result("index_add", out_shape, std::move(out), {a},
                                [ids](const Tensor<T>& g, const std::vector<bool>&) {
                                  return std::vector<Tensor<T>>{index_select(g, ids)};
                                });
}

template <typename T>
Tensor<T> axis_linear(const Tensor<T>& a, Index axis, std::shared_ptr<const AxisMap<T>> map) {
  axis = detail::normalize_axis(axis, a.rank());
  KFORGE_CHECK(a.dim(axis) == map->in_size, ShapeError, "axis_linear: axis ", axis, " has extent ", a.dim(axis),
               ", map expects ", map->in_size);
  Shape out_shape = a.shape();
  out_shape[axis] = map->out_size;
  Index outer = 1, inner = 1;
  for (Index d = 0; d < axis; ++d) outer *= out_shape[d];
  for (Index d = axis + 1; d < a.rank(); ++d) inner *= out_shape[d];
  std::vector<T> out(static_cast<std::size_t>(numel_of(out_shape)), T(0));
  const auto src = a.data();
  for (Index o = 0; o < outer; ++o) {
    for (Index r = 0; r < map->out_size; ++r) {
      T* dst = out.data() + (o * map->out_size + r) * inner;
      for (const auto& [c, w] : map->rows[r]) {
        const T* s = src.data() + (o * map->in_size + c) * inner;
        for (Index i = 0; i < inner; ++i) dst[i] += w * s[i];
      }
    }
  }
  return Tensor<T>::make_result("axis_linear", out_shape, std::move(out), {a},
                                [axis, map](const Tensor<T>& g, const std::vector<bool>&) {
                                  auto t = std::make_shared<const AxisMap<T>>(map->transposed());
                                  return std::vector<Tensor<T>>{axis_linear(g, axis, t)};
                                });
}

/// Channel-last [B, T, N, C] -> [B, T', N, K*C] with T' = T + 2*pad - K + 1;
/// entry (b, t, n, k*C + c) = a(b, t + k - pad, n, c), zero outside.
template <typename T>
Tensor<T> unfold_time(const Tensor<T>& a, Index kernel, Index pad) {
  KFORGE_CHECK(a.rank() == 4, ShapeError, "unfold_time expects [B,T,N,C], got ", shape_str(a.shape()));
  const Index B = a.dim(0), Tn = a.dim(1), N = a.dim(2), C = a.dim(3);
  const Index To = Tn + 2 * pad - kernel + 1;
  KFORGE_CHECK(kernel >= 1 && To >= 1, ShapeError, "temporal kernel of ", kernel, " frames longer than padded input of ",
               Tn + 2 * pad, " frames");
  std::vector<T> out(static_cast<std::size_t>(B * To * N * kernel * C), T(0));
  const auto src = a.data();
  for (Index b = 0; b < B; ++b)
    for (Index t = 0; t < To; ++t)
      for (Index k = 0; k < kernel; ++k) {
        const Index ts = t + k - pad;
        if (ts < 0 || ts >= Tn) continue;
        for (Index n = 0; n < N; ++n)
          std::copy_n(src.begin() + ((b * Tn + ts) * N + n) * C, C,
                      out.begin() + ((b * To + t) * N + n) * kernel * C + k * C);
      }
  return Tensor<T>::make_result("unfold_time", Shape{B, To, N, kernel * C}, std::move(out), {a},
                                [Tn, kernel, pad](const Tensor<T>& g, const std::vector<bool>&) {
                                  return std::vector<Tensor<T>>{fold_time(g, Tn, kernel, pad)};
                                });
}

/// Adjoint of unfold_time.
template <typename T>
Tensor<T> fold_time(const Tensor<T>& a, Index frames, Index kernel, Index pad) {
  KFORGE_CHECK(a.rank() == 4 && a.dim(3) % kernel == 0, ShapeError, "fold_time shape mismatch");
  const Index B = a.dim(0), To = a.dim(1), N = a.dim(2), C = a.dim(3) / kernel;
  KFORGE_CHECK(To == frames + 2 * pad - kernel + 1, ShapeError, "fold_time frame mismatch");
  std::vector<T> out(static_cast<std::size_t>(B * frames * N * C), T(0));
  const auto src = a.data();
  for (Index b = 0; b < B; ++b)
    for (Index t = 0; t < To; ++t)
      for (Index k = 0; k < kernel; ++k) {
        const Index ts = t + k - pad;
        if (ts < 0 || ts >= frames) continue;
        for (Index n = 0; n < N; ++n) {
          const T* s = src.data() + ((b * To + t) * N + n) * kernel * C + k * C;
          T* d = out.data() + ((b * frames + ts) * N + n) * C;
          for (Index c = 0; c < C; ++c) d[c] += s[c];
        }
      }
  return Tensor<T>::make_result("fold_time", Shape{B, frames, N, C}, std::move(out), {a},
                                [kernel, pad](const Tensor<T>& g, const std::vector<bool>&) {
                                  return std::vector<Tensor<T>>{unfold_time(g, kernel, pad)};
                                });
}

// ---------------------------------------------------------------------------
// Construction helpers.

template <typename T>
Tensor<T> randn(const Shape& shape, Rng& rng, T stddev = T(1)) {
  std::vector<T> v(static_cast<std::size_t>(numel_of(shape)));
  for (auto& x : v) x = static_cast<T>(rng.normal()) * stddev;
  return Tensor<T>(shape, std::move(v));
}

template <typename T>
Tensor<T> uniform(const Shape& shape, Rng& rng, T lo, T hi) {
  std::vector<T> v(static_cast<std::size_t>(numel_of(shape)));
  for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return Tensor<T>(shape, std::move(v));
}

/// Converts values between precisions (no history).
template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& a) {
  std::vector<To> v(a.data().begin(), a.data().end());
  return Tensor<To>(a.shape(), std::move(v));
}

// Operators.
template <typename T> Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <typename T> Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }
template <typename T> Tensor<T> operator/(const Tensor<T>& a, const Tensor<T>& b) { return div(a, b); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a) { return neg(a); }
template <typename T> Tensor<T> operator+(const Tensor<T>& a, T s) { return add_scalar(a, s); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a, T s) { return add_scalar(a, -s); }
template <typename T> Tensor<T> operator*(const Tensor<T>& a, T s) { return mul_scalar(a, s); }
template <typename T> Tensor<T> operator*(T s, const Tensor<T>& a) { return mul_scalar(a, s); }

}  // namespace kforge

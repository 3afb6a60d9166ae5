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
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kforge/error.hpp"

namespace kforge {

using Index = std::int64_t;
using Shape = std::vector<Index>;

inline Index numel_of(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

inline std::vector<Index> contiguous_strides(const Shape& shape) {
  std::vector<Index> strides(shape.size(), 1);
  for (Index i = static_cast<Index>(shape.size()) - 2; i >= 0; --i) strides[i] = strides[i + 1] * shape[i + 1];
  return strides;
}

template <typename T>
class Tensor;

namespace detail {

template <typename T>
struct Node;

template <typename T>
struct TensorImpl {
  Shape shape;
  std::shared_ptr<std::vector<T>> storage;
  bool requires_grad = false;
  std::shared_ptr<Node<T>> grad_fn;
  std::string name;
};

/// One recorded operation. `backward` maps the gradient of the node's output
/// to gradients of its inputs, and is itself written in terms of recorded
/// tensor ops, so running it with recording enabled yields a differentiable
/// gradient.
template <typename T>
struct Node {
  const char* op = "";
  std::vector<Tensor<T>> inputs;
  std::function<std::vector<Tensor<T>>(const Tensor<T>& grad, const std::vector<bool>& needs)> backward;
};

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

/// True while operations record themselves for differentiation.
inline bool grad_enabled() { return detail::grad_mode_flag(); }

class GradModeGuard {
 public:
  explicit GradModeGuard(bool enabled) : previous_(detail::grad_mode_flag()) { detail::grad_mode_flag() = enabled; }
  ~GradModeGuard() { detail::grad_mode_flag() = previous_; }
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool previous_;
};

class NoGradGuard : public GradModeGuard {
 public:
  NoGradGuard() : GradModeGuard(false) {}
};

/// Dense row-major tensor handle. Copies share the underlying value; values
/// are treated as immutable except through `mutable_data()`, which only the
/// optimizer and initializers use.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  Tensor(Shape shape, std::vector<T> values) : impl_(std::make_shared<detail::TensorImpl<T>>()) {
    KFORGE_CHECK(numel_of(shape) == static_cast<Index>(values.size()), ShapeError, "shape ", shape_str(shape),
                 " does not match ", values.size(), " values");
    for (auto d : shape) KFORGE_CHECK(d >= 0, ShapeError, "negative extent in shape ", shape_str(shape));
    impl_->shape = std::move(shape);
    impl_->storage = std::make_shared<std::vector<T>>(std::move(values));
  }

  static Tensor zeros(const Shape& shape) { return Tensor(shape, std::vector<T>(numel_of(shape), T(0))); }
  static Tensor ones(const Shape& shape) { return Tensor(shape, std::vector<T>(numel_of(shape), T(1))); }
  static Tensor full(const Shape& shape, T value) { return Tensor(shape, std::vector<T>(numel_of(shape), value)); }
  static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }

  bool defined() const { return static_cast<bool>(impl_); }
  const Shape& shape() const { return impl_->shape; }
  Index rank() const { return static_cast<Index>(impl_->shape.size()); }
  Index dim(Index i) const {
    if (i < 0) i += rank();
    return impl_->shape.at(static_cast<std::size_t>(i));
  }
  Index numel() const { return static_cast<Index>(impl_->storage->size()); }

  std::span<const T> data() const { return {impl_->storage->data(), impl_->storage->size()}; }
  std::span<T> mutable_data() { return {impl_->storage->data(), impl_->storage->size()}; }
  const std::vector<T>& values() const { return *impl_->storage; }

  T item() const {
    KFORGE_CHECK(numel() == 1, ShapeError, "item() on tensor of shape ", shape_str(shape()));
    return (*impl_->storage)[0];
  }

  T at(std::initializer_list<Index> idx) const {
    KFORGE_CHECK(static_cast<Index>(idx.size()) == rank(), ShapeError, "index rank mismatch");
    const auto strides = contiguous_strides(shape());
    Index off = 0;
    std::size_t d = 0;
    for (auto i : idx) {
      KFORGE_CHECK(i >= 0 && i < shape()[d], ShapeError, "index out of range");
      off += i * strides[d++];
    }
    return (*impl_->storage)[off];
  }

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  Tensor& set_requires_grad(bool value) {
    KFORGE_CHECK(!impl_->grad_fn, Error, "requires_grad can only be set on leaf tensors");
    impl_->requires_grad = value;
    return *this;
  }
  bool is_leaf() const { return !impl_->grad_fn; }
  const std::shared_ptr<detail::Node<T>>& grad_fn() const { return impl_->grad_fn; }

  const std::string& name() const { return impl_->name; }
  Tensor& set_name(std::string name) {
    impl_->name = std::move(name);
    return *this;
  }

  /// Shares values, drops the computation record.
  Tensor detach() const {
    Tensor t;
    t.impl_ = std::make_shared<detail::TensorImpl<T>>();
    t.impl_->shape = impl_->shape;
    t.impl_->storage = impl_->storage;
    return t;
  }

  /// Deep copy of the values without history.
  Tensor clone() const { return Tensor(shape(), *impl_->storage); }

  bool all_finite() const {
    return std::all_of(impl_->storage->begin(), impl_->storage->end(), [](T v) { return std::isfinite(v); });
  }

  const void* id() const { return impl_.get(); }
  detail::TensorImpl<T>* impl() const { return impl_.get(); }

  /// Builds an op result, attaching a computation record when recording is
  /// enabled and any input participates in differentiation.
  template <typename Backward>
  static Tensor make_result(const char* op, Shape shape, std::vector<T> values, std::vector<Tensor> inputs,
                            Backward&& backward) {
    Tensor out(std::move(shape), std::move(values));
    if (grad_enabled()) {
      const bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
      if (any) {
        auto node = std::make_shared<detail::Node<T>>();
        node->op = op;
        node->inputs = std::move(inputs);
        node->backward = std::forward<Backward>(backward);
        out.impl_->grad_fn = std::move(node);
        out.impl_->requires_grad = true;
      }
    }
    return out;
  }

  /// A tensor sharing `storage` with a new shape (used by reshape).
  static Tensor alias(const Tensor& src, Shape shape) {
    Tensor t;
    t.impl_ = std::make_shared<detail::TensorImpl<T>>();
    t.impl_->shape = std::move(shape);
    t.impl_->storage = src.impl_->storage;
    return t;
  }

  void attach(std::shared_ptr<detail::Node<T>> node) {
    impl_->grad_fn = std::move(node);
    impl_->requires_grad = true;
  }

 private:
  std::shared_ptr<detail::TensorImpl<T>> impl_;
};

}  // namespace kforge

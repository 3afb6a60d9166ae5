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

#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "kforge/tensor/ops.hpp"

namespace kforge {

struct GradOptions {
  /// Record the backward pass so the returned gradients are differentiable.
  bool create_graph = false;
  /// Return zeros instead of failing for inputs the output does not reach.
  bool allow_unused = false;
};

/// Gradients keyed by the leaf tensor they belong to.
template <typename T>
class GradientMap {
 public:
  void insert(const Tensor<T>& leaf, Tensor<T> grad) {
    index_[leaf.id()] = entries_.size();
    entries_.emplace_back(leaf, std::move(grad));
  }
  bool contains(const Tensor<T>& leaf) const { return index_.count(leaf.id()) > 0; }
  const Tensor<T>& at(const Tensor<T>& leaf) const {
    auto it = index_.find(leaf.id());
    KFORGE_CHECK(it != index_.end(), Error, "leaf '", leaf.name(), "' is not in the computation record");
    return entries_[it->second].second;
  }
  std::size_t size() const { return entries_.size(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::vector<std::pair<Tensor<T>, Tensor<T>>> entries_;
  std::unordered_map<const void*, std::size_t> index_;
};

namespace detail {

template <typename T>
struct BackwardPass {
  using Impl = TensorImpl<T>;

  std::vector<Impl*> order;  // reverse topological order (output first)
  std::unordered_map<Impl*, Tensor<T>> handles;
  std::unordered_map<Impl*, std::pair<Impl*, const char*>> parent;

  void sort(const Tensor<T>& output) {
    std::unordered_set<Impl*> visited;
    std::vector<std::pair<Impl*, std::size_t>> stack;
    std::vector<Impl*> post;
    handles[output.impl()] = output;
    stack.emplace_back(output.impl(), 0);
    visited.insert(output.impl());
    while (!stack.empty()) {
      auto& [impl, next] = stack.back();
      const auto& node = impl->grad_fn;
      if (node && next < node->inputs.size()) {
        const Tensor<T>& in = node->inputs[next++];
        Impl* child = in.impl();
        if (in.requires_grad() && visited.insert(child).second) {
          handles[child] = in;
          parent[child] = {impl, node->op};
          stack.emplace_back(child, 0);
        }
        continue;
      }
      post.push_back(impl);
      stack.pop_back();
    }
    order.assign(post.rbegin(), post.rend());
  }

  std::string path_to(Impl* impl) const {
    std::string path;
    Impl* cur = impl;
    while (true) {
      auto it = parent.find(cur);
      if (it == parent.end()) break;
      if (!path.empty()) path = " <- " + path;
      path = std::string(it->second.second) + path;
      cur = it->second.first;
    }
    return path.empty() ? std::string("output") : "output -> " + path;
  }
};

}  // namespace detail

/// Reverse-mode gradients of a scalar `output` with respect to `inputs`.
template <typename T>
std::vector<Tensor<T>> grad(const Tensor<T>& output, const std::vector<Tensor<T>>& inputs, GradOptions options = {}) {
  KFORGE_CHECK(output.defined() && output.numel() == 1, ShapeError, "backward requires a scalar output, got ",
               output.defined() ? shape_str(output.shape()) : std::string("undefined"));
  std::vector<Tensor<T>> result(inputs.size());
  if (!output.requires_grad()) {
    KFORGE_CHECK(options.allow_unused, Error, "output does not depend on any differentiable leaf");
    for (std::size_t i = 0; i < inputs.size(); ++i) result[i] = Tensor<T>::zeros(inputs[i].shape());
    return result;
  }

  detail::BackwardPass<T> pass;
  pass.sort(output);

  std::unordered_set<const void*> wanted;
  for (const auto& in : inputs) wanted.insert(in.id());

  GradModeGuard mode(options.create_graph);
  std::unordered_map<detail::TensorImpl<T>*, Tensor<T>> grads;
  grads[output.impl()] = Tensor<T>::ones(output.shape());

  for (auto* impl : pass.order) {
    auto it = grads.find(impl);
    if (it == grads.end()) continue;
    const auto& node = impl->grad_fn;
    if (!node) continue;
    Tensor<T> g = it->second;
    if (!wanted.count(impl)) grads.erase(it);

    std::vector<bool> needs(node->inputs.size());
    for (std::size_t i = 0; i < needs.size(); ++i) needs[i] = node->inputs[i].requires_grad();
    std::vector<Tensor<T>> input_grads = node->backward(g, needs);
    for (std::size_t i = 0; i < node->inputs.size(); ++i) {
      if (!needs[i] || !input_grads[i].defined()) continue;
      auto* child = node->inputs[i].impl();
      if (!input_grads[i].all_finite())
        throw NumericError("non-finite gradient at " + pass.path_to(child) + " (op '" + node->op + "')");
      auto slot = grads.find(child);
      if (slot == grads.end())
        grads.emplace(child, input_grads[i]);
      else
        slot->second = add(slot->second, input_grads[i]);
    }
  }

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto it = grads.find(inputs[i].impl());
    if (it != grads.end()) {
      result[i] = it->second;
    } else {
      KFORGE_CHECK(options.allow_unused, Error, "leaf '", inputs[i].name(), "' is not in the computation record");
      result[i] = Tensor<T>::zeros(inputs[i].shape());
    }
  }
  return result;
}

/// Gradients of `output` with respect to every differentiable leaf it reaches.
template <typename T>
GradientMap<T> backward(const Tensor<T>& output, bool create_graph = false) {
  KFORGE_CHECK(output.defined() && output.numel() == 1, ShapeError, "backward requires a scalar output");
  GradientMap<T> map;
  if (!output.requires_grad()) return map;
  detail::BackwardPass<T> pass;
  pass.sort(output);
  std::vector<Tensor<T>> leaves;
  for (auto* impl : pass.order)
    if (!impl->grad_fn) leaves.push_back(pass.handles.at(impl));
  auto grads = grad(output, leaves, GradOptions{create_graph, false});
  for (std::size_t i = 0; i < leaves.size(); ++i) map.insert(leaves[i], grads[i]);
  return map;
}

}  // namespace kforge

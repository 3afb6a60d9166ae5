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

#include <cstdint>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "kforge/tensor/tensor.hpp"

namespace kforge {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string path, Tensor<T> init, bool is_trainable = true)
      : name(std::move(path)), value(std::move(init)), trainable(is_trainable) {
    value.set_name(name);
    value.set_requires_grad(trainable);
  }
};

/// Ordered, non-owning collection of a model's parameters.
template <typename T>
class ParameterList {
 public:
  void add(Parameter<T>& p) {
    KFORGE_CHECK(names_.insert(p.name).second, Error, "duplicate parameter name '", p.name, "'");
    items_.push_back(&p);
  }
  void extend(const ParameterList& other) {
    for (auto* p : other.items_) add(*p);
  }

  std::size_t size() const { return items_.size(); }
  Parameter<T>& operator[](std::size_t i) const { return *items_[i]; }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  ParameterList trainable() const {
    ParameterList out;
    for (auto* p : items_)
      if (p->trainable) out.add(*p);
    return out;
  }

  std::vector<Tensor<T>> tensors() const {
    std::vector<Tensor<T>> out;
    out.reserve(items_.size());
    for (auto* p : items_) out.push_back(p->value);
    return out;
  }

  Parameter<T>* find(const std::string& name) const {
    for (auto* p : items_)
      if (p->name == name) return p;
    return nullptr;
  }

  Index count_values() const {
    Index n = 0;
    for (auto* p : items_) n += p->value.numel();
    return n;
  }

  /// FNV-1a over names and value bytes; used to detect parameter changes.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* data, std::size_t n) {
      const auto* bytes = static_cast<const unsigned char*>(data);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= bytes[i];
        h *= 1099511628211ull;
      }
    };
    for (auto* p : items_) {
      mix(p->name.data(), p->name.size());
      mix(p->value.data().data(), p->value.data().size() * sizeof(T));
    }
    return h;
  }

 private:
  std::vector<Parameter<T>*> items_;
  std::unordered_set<std::string> names_;
};

}  // namespace kforge

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

#include <cmath>
#include <cstdint>
#include <vector>

#include "kforge/tensor/parameter.hpp"

namespace kforge {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;

  AdamState() = default;
  AdamState(const ParameterList<T>& params, AdamConfig cfg) : config(cfg) {
    for (auto* p : params) {
      m.emplace_back(static_cast<std::size_t>(p->value.numel()), T(0));
      v.emplace_back(static_cast<std::size_t>(p->value.numel()), T(0));
    }
  }
};

/// One bias-corrected Adam update, applied in place to the parameter values.
template <typename T>
void adam_step(const ParameterList<T>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state) {
  const auto& c = state.config;
  KFORGE_CHECK(c.lr > 0 && c.beta1 >= 0 && c.beta1 < 1 && c.beta2 >= 0 && c.beta2 < 1 && c.eps > 0, ConfigError,
               "invalid Adam hyperparameters");
  KFORGE_CHECK(grads.size() == params.size() && state.m.size() == params.size(), ShapeError,
               "adam_step: ", params.size(), " parameters, ", grads.size(), " gradients, ", state.m.size(),
               " moment slots");
  for (std::size_t i = 0; i < params.size(); ++i) {
    KFORGE_CHECK(grads[i].shape() == params[i].value.shape(), ShapeError, "adam_step: gradient shape ",
                 shape_str(grads[i].shape()), " != parameter '", params[i].name, "' shape ",
                 shape_str(params[i].value.shape()));
    KFORGE_CHECK(state.m[i].size() == static_cast<std::size_t>(grads[i].numel()), ShapeError,
                 "adam_step: moment shape mismatch for '", params[i].name, "'");
    KFORGE_CHECK(grads[i].all_finite(), NumericError, "adam_step: non-finite gradient for '", params[i].name, "'");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(c.beta1), b2 = static_cast<T>(c.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].value.mutable_data();
    const auto g = grads[i].data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < values.size(); ++k) {
      m[k] = b1 * m[k] + (T(1) - b1) * g[k];
      v[k] = b2 * v[k] + (T(1) - b2) * g[k] * g[k];
      const double mhat = static_cast<double>(m[k]) / bc1;
      const double vhat = static_cast<double>(v[k]) / bc2;
      values[k] = static_cast<T>(static_cast<double>(values[k]) - c.lr * mhat / (std::sqrt(vhat) + c.eps));
    }
  }
}

}  // namespace kforge

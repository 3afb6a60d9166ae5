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

#include <json.hpp>

#include "kforge/nn/config.hpp"
#include "kforge/tensor/adam.hpp"

namespace kforge::train {

struct TrainConfig {
  double lambda = 10.0;
  Index n_critic = 5;
  Index batch_size = 32;
  /// Total generator steps.
  Index steps = 10000;
  std::uint64_t seed = 0;
  AdamConfig adam;
  /// Dataset manifest path (resolved by the caller).
  std::string dataset;
  Index checkpoint_every = 1000;
  Index log_every = 1;
  Index eval_every = 0;
  nn::ModelConfig model;

  nlohmann::json to_json() const {
    return {{"lambda", lambda},
            {"n_critic", n_critic},
            {"batch_size", batch_size},
            {"steps", steps},
            {"seed", seed},
            {"adam", {{"lr", adam.lr}, {"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps}}},
            {"dataset", dataset},
            {"checkpoint_every", checkpoint_every},
            {"log_every", log_every},
            {"eval_every", eval_every},
            {"model", model.to_json()}};
  }

  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    KFORGE_CHECK(j.is_object(), ConfigError, "training config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      try {
        if (key == "lambda") c.lambda = value.get<double>();
        else if (key == "n_critic") c.n_critic = value.get<Index>();
        else if (key == "batch_size") c.batch_size = value.get<Index>();
        else if (key == "steps") c.steps = value.get<Index>();
        else if (key == "seed") c.seed = value.get<std::uint64_t>();
        else if (key == "dataset") c.dataset = value.get<std::string>();
        else if (key == "checkpoint_every") c.checkpoint_every = value.get<Index>();
        else if (key == "log_every") c.log_every = value.get<Index>();
        else if (key == "eval_every") c.eval_every = value.get<Index>();
        else if (key == "model") c.model = nn::ModelConfig::from_json(value);
        else if (key == "adam") {
          KFORGE_CHECK(value.is_object(), ConfigError, "adam must be an object");
          for (const auto& [k, v] : value.items()) {
            if (k == "lr") c.adam.lr = v.get<double>();
            else if (k == "beta1") c.adam.beta1 = v.get<double>();
            else if (k == "beta2") c.adam.beta2 = v.get<double>();
            else if (k == "eps") c.adam.eps = v.get<double>();
            else throw ConfigError("unknown config key 'adam." + k + "'");
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

  void validate() const {
    KFORGE_CHECK(lambda > 0, ConfigError, "lambda must be positive, got ", lambda);
    KFORGE_CHECK(n_critic >= 1, ConfigError, "n_critic must be at least 1, got ", n_critic);
    KFORGE_CHECK(batch_size >= 2, ConfigError, "batch_size must be at least 2, got ", batch_size);
    KFORGE_CHECK(steps >= 0, ConfigError, "steps must be non-negative");
    KFORGE_CHECK(checkpoint_every >= 0 && log_every >= 1 && eval_every >= 0, ConfigError,
                 "invalid checkpoint/log/eval cadence");
    KFORGE_CHECK(adam.lr > 0 && adam.beta1 >= 0 && adam.beta1 < 1 && adam.beta2 >= 0 && adam.beta2 < 1 &&
                     adam.eps > 0,
                 ConfigError, "invalid Adam hyperparameters");
    model.validate();
  }
};

}  // namespace kforge::train

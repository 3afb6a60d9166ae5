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

#include <json.hpp>

#include "kforge/metrics/features.hpp"
#include "kforge/metrics/fid.hpp"
#include "kforge/metrics/mmd.hpp"

namespace kforge::metrics {

struct MetricsReport {
  double fid = 0.0;
  MmdValue mmd_a;
  MmdValue mmd_s;
  Index n_real = 0;
  Index n_fake = 0;
  std::string kernel_fingerprint;
  std::string feature_fingerprint;
  std::string dataset;
  std::string model_checkpoint;

  nlohmann::json to_json() const {
    return {{"fid", fid},
            {"mmd_a", mmd_a.value},
            {"mmd_s", mmd_s.value},
            {"mmd2_a_raw", mmd_a.raw},
            {"mmd2_s_raw", mmd_s.raw},
            {"mmd_a_clamped", mmd_a.clamped},
            {"mmd_s_clamped", mmd_s.clamped},
            {"n_real", n_real},
            {"n_fake", n_fake},
            {"kernel_fingerprint", kernel_fingerprint},
            {"feature_fingerprint", feature_fingerprint},
            {"dataset", dataset},
            {"model_checkpoint", model_checkpoint}};
  }
};

/// FID needs covariance estimates; MMD needs at least two samples a side.
inline constexpr Index kMinSamples = 2;

inline MetricsReport evaluate(const Tensor<float>& real, const Tensor<float>& fake, const FeatureExtractor& features,
                              const KernelConfig& kernel = {}) {
  KFORGE_CHECK(real.rank() == 4 && fake.rank() == 4, ShapeError, "expected sequence sets [S,C,T,N]");
  KFORGE_CHECK(real.dim(0) >= kMinSamples, ArgumentError, "evaluation needs at least ", kMinSamples,
               " real samples, got ", real.dim(0));
  KFORGE_CHECK(fake.dim(0) >= kMinSamples, ArgumentError, "evaluation needs at least ", kMinSamples,
               " generated samples, got ", fake.dim(0));
  MetricsReport r;
  r.n_real = real.dim(0);
  r.n_fake = fake.dim(0);
  r.mmd_a = mmd_actions(real, fake, kernel);
  r.mmd_s = mmd_sequences(real, fake, kernel);
  r.fid = fid(features.features(real), features.features(fake));
  r.kernel_fingerprint = kernel.fingerprint();
  r.feature_fingerprint = features.fingerprint();
  return r;
}

}  // namespace kforge::metrics

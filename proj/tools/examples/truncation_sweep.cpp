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


// Loads a trained generator and prints how sample variance shrinks as the
// truncation psi goes from 1 to 0.
//
//   truncation_sweep RUN_OR_CHECKPOINT_DIR [samples]

#include <cstdio>
#include <string>

#include "kforge/cli/app.hpp"

int main(int argc, char** argv) {
  using namespace kforge;
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s RUN_OR_CHECKPOINT_DIR [samples]\n", argv[0]);
    return 2;
  }
  try {
    const Index n = argc > 2 ? std::stoll(argv[2]) : 256;
    auto model = cli::load_generator(argv[1]);
    auto& g = *model.generator;
    NoGradGuard no_grad;
    const auto center = nn::compute_truncation_center(g, 0);
    const auto z = nn::sample_latents<float>(n, g.config().latent_dim, 0, {1});
    std::vector<Index> y;
    for (Index i = 0; i < n; ++i) y.push_back(i % g.config().num_classes);
    const auto w = g.map(z, y);
    for (double psi : {1.0, 0.8, 0.6, 0.4, 0.2, 0.0}) {
      const auto x = g.synthesize(nn::truncate(w, y, center, psi), 0);
      const Index per = x.numel() / n;
      double var = 0.0;
      for (Index f = 0; f < per; ++f) {
        double mu = 0.0, sq = 0.0;
        for (Index s = 0; s < n; ++s) {
          const double v = x.data()[static_cast<std::size_t>(s * per + f)];
          mu += v;
          sq += v * v;
        }
        mu /= static_cast<double>(n);
        var += sq / static_cast<double>(n) - mu * mu;
      }
      std::printf("psi %.1f  variance %.6g\n", psi, var / static_cast<double>(per));
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

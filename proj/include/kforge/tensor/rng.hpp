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
#include <initializer_list>
#include <numbers>
#include <random>
#include <vector>

namespace kforge {

/// Named stream families. Every stochastic call site draws from a generator
/// keyed by (run seed, stream family, call-site coordinates) so that results
/// do not depend on call order or thread count.
enum class Stream : std::uint64_t {
  kInit = 1,
  kLatent = 2,
  kNoise = 3,
  kBatch = 4,
  kEpsilon = 5,
  kSynth = 6,
  kSplit = 7,
  kEval = 8,
  kTest = 9,
};

/// Splittable generator. The engine is the standard Mersenne twister; the
/// uniform and normal transforms are implemented here so that values are
/// identical across standard library implementations.
class Rng {
 public:
  Rng(std::uint64_t seed, Stream stream, std::initializer_list<std::uint64_t> coords = {}) {
    std::vector<std::uint32_t> words;
    auto push = [&](std::uint64_t v) {
      words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
      words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(seed);
    push(static_cast<std::uint64_t>(stream));
    for (auto c : coords) push(c);
    std::seed_seq seq(words.begin(), words.end());
    engine_.seed(seq);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Lemire-style rejection keeps the draw unbiased.
    const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  /// Standard normal via Box-Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace kforge

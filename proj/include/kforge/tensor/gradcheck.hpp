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
#include <functional>
#include <string>
#include <vector>

#include "kforge/tensor/autograd.hpp"

namespace kforge {

struct GradCheckResult {
  double max_error = 0.0;
  std::string worst_leaf;
  Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares reverse-mode gradients of the scalar `fn()` with central
/// differences, perturbing the values of `leaves` in place. The error per
/// coordinate is |analytic - numeric| / max(1, |analytic|).
///
/// With `refinements > 0`, a coordinate whose error exceeds `refine_above` is
/// re-measured with the step divided by 10 up to that many times and keeps
/// its smallest error. A central difference that straddles a kink of a
/// piecewise-linear activation disagrees with the one-sided derivative at
/// every step that crosses the kink and agrees once the step no longer does.
template <typename T>
GradCheckResult grad_check_detailed(const std::function<Tensor<T>()>& fn, std::vector<Tensor<T>> leaves,
                                    double step = 1e-5, int refinements = 0, double refine_above = 1e-6) {
  Tensor<T> out = fn();
  KFORGE_CHECK(out.numel() == 1, ShapeError, "grad_check expects a scalar function");
  KFORGE_CHECK(out.all_finite(), NumericError, "grad_check: function value is not finite");
  const auto analytic = grad(out, leaves, GradOptions{false, true});

  // Recording stays enabled: `fn` may itself differentiate (gradient penalty).
  GradCheckResult result;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto values = leaves[li].mutable_data();
    const auto a = analytic[li].data();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const T saved = values[k];
      const double an = static_cast<double>(a[k]);
      auto central = [&](double h) {
        values[k] = static_cast<T>(saved + h);
        const double plus = static_cast<double>(fn().item());
        values[k] = static_cast<T>(saved - h);
        const double minus = static_cast<double>(fn().item());
        values[k] = saved;
        KFORGE_CHECK(std::isfinite(plus) && std::isfinite(minus), NumericError,
                     "grad_check: function value is not finite near the point");
        return (plus - minus) / (2.0 * h);
      };
      double numeric = central(step);
      double err = std::abs(an - numeric) / std::max(1.0, std::abs(an));
      double h = step;
      for (int r = 0; r < refinements && err > refine_above; ++r) {
        h /= 10.0;
        const double n = central(h);
        const double e = std::abs(an - n) / std::max(1.0, std::abs(an));
        if (e < err) {
          err = e;
          numeric = n;
        }
      }
      if (err > result.max_error || result.worst_index < 0) {
        result.max_error = err;
        result.worst_leaf = leaves[li].name();
        result.worst_index = static_cast<Index>(k);
        result.analytic = an;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

template <typename T>
double grad_check(const std::function<Tensor<T>()>& fn, std::vector<Tensor<T>> leaves, double step = 1e-5,
                  int refinements = 0) {
  return grad_check_detailed<T>(fn, std::move(leaves), step, refinements).max_error;
}

}  // namespace kforge

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

#include <Eigen/Dense>

#include "kforge/metrics/mmd.hpp"

namespace kforge::metrics {

inline constexpr double kSymmetryTol = 1e-8;
inline constexpr double kEigenFloor = -1e-8;
inline constexpr double kCovarianceRidge = 1e-6;

/// Principal square root of a symmetric positive semidefinite matrix.
/// Eigenvalues down to -1e-8 (relative to the largest magnitude) are clamped
/// to zero.
inline Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& a) {
  KFORGE_CHECK(a.rows() == a.cols(), ShapeError, "sqrtm_psd needs a square matrix, got ", a.rows(), "x", a.cols());
  if (a.size() == 0) return a;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  KFORGE_CHECK(asym <= kSymmetryTol * scale, NumericError, "sqrtm_psd: matrix asymmetric by ", asym);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a + a.transpose()));
  KFORGE_CHECK(es.info() == Eigen::Success, NumericError, "sqrtm_psd: eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  KFORGE_CHECK(ev.minCoeff() >= kEigenFloor * scale, NumericError, "sqrtm_psd: eigenvalue ", ev.minCoeff(),
               " is negative");
  ev = ev.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

struct GaussianMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Sample mean and unbiased covariance of the rows.
inline GaussianMoments moments(const SampleMatrix& x) {
  KFORGE_CHECK(x.rows() >= 2, ArgumentError, "moments need at least 2 samples, got ", x.rows());
  GaussianMoments m;
  m.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - m.mean.transpose();
  m.cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  return m;
}

/// ||mu_a - mu_b||² + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}), with S = cov + ridge I.
/// (S_a S_b)^{1/2} is evaluated through the symmetric form
/// (S_a^{1/2} S_b S_a^{1/2})^{1/2}, which has the same trace.
inline double frechet_distance(const GaussianMoments& a, const GaussianMoments& b, double ridge = kCovarianceRidge) {
  KFORGE_CHECK(a.mean.size() == b.mean.size() && a.cov.rows() == b.cov.rows(), ShapeError,
               "feature dimensions differ: ", a.mean.size(), " vs ", b.mean.size());
  const Index d = a.mean.size();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd sa = a.cov + ridge * id, sb = b.cov + ridge * id;
  const Eigen::MatrixXd ra = sqrtm_psd(sa);
  Eigen::MatrixXd inner = ra * sb * ra;
  inner = 0.5 * (inner + inner.transpose());
  const double covmean = sqrtm_psd(inner).trace();
  return (a.mean - b.mean).squaredNorm() + sa.trace() + sb.trace() - 2.0 * covmean;
}

inline double fid(const SampleMatrix& real, const SampleMatrix& fake, double ridge = kCovarianceRidge) {
  KFORGE_CHECK(real.cols() == fake.cols(), ShapeError, "feature dimensions differ: ", real.cols(), " vs ",
               fake.cols());
  return frechet_distance(moments(real), moments(fake), ridge);
}

}  // namespace kforge::metrics

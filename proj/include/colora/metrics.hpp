// Copyright 2026 The CoLoRA Authors. All Rights Reserved.
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

// Subspace distances and similarities, task conditioning, reconstruction
// error.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "colora/numkit.hpp"

namespace colora::metrics {

namespace detail {

// ||(I - Q1 Q1^T) Q2||_2 for orthonormal Q1, Q2.
inline double projected_residual_norm(const Matrix& q1, const Matrix& q2) {
  const Matrix residual = q2 - q1 * (q1.transpose() * q2);
  return Eigen::JacobiSVD<Matrix>(residual).singularValues()(0);
}

}  // namespace detail

/// Sine of the largest principal angle between span(x1) and span(x2).
/// Both orderings are evaluated and the larger is returned, so the result
/// is exactly symmetric in its arguments.
inline double subspace_dist(const Matrix& x1, const Matrix& x2) {
  if (x1.rows() != x2.rows() || x1.cols() != x2.cols())
    throw ShapeMismatch("subspace_dist: " + numkit::shape_str(x1) + " vs " + numkit::shape_str(x2));
  const Matrix q1 = numkit::qr_thin(x1).q;
  const Matrix q2 = numkit::qr_thin(x2).q;
  const double a = detail::projected_residual_norm(q1, q2);
  const double b = detail::projected_residual_norm(q2, q1);
  return std::clamp(std::max(a, b), 0.0, 1.0);
}

/// ||Q1^T Q2||_F / sqrt(r): root-mean-square cosine of the principal angles.
inline double subspace_similarity(const Matrix& u1, const Matrix& u2) {
  if (u1.rows() != u2.rows() || u1.cols() != u2.cols())
    throw ShapeMismatch("subspace_similarity: " + numkit::shape_str(u1) + " vs " + numkit::shape_str(u2));
  const Matrix q1 = numkit::qr_thin(u1).q;
  const Matrix q2 = numkit::qr_thin(u2).q;
  const double s = (q1.transpose() * q2).norm() / std::sqrt(static_cast<double>(u1.cols()));
  return std::clamp(s, 0.0, 1.0);
}

/// Smallest pairwise column/row similarity over a collection of tasks given
/// by their column and row bases.
inline double task_similarity_xi(std::span<const Matrix> col_bases, std::span<const Matrix> row_bases) {
  if (col_bases.size() != row_bases.size()) throw ShapeMismatch("task_similarity_xi: basis count mismatch");
  if (col_bases.size() < 2) throw InvalidArgument("task_similarity_xi: need at least two tasks");
  double xi = 1.0;
  for (std::size_t i = 0; i < col_bases.size(); ++i) {
    for (std::size_t j = i + 1; j < col_bases.size(); ++j) {
      xi = std::min(xi, subspace_similarity(col_bases[i], col_bases[j]));
      xi = std::min(xi, subspace_similarity(row_bases[i], row_bases[j]));
    }
  }
  return xi;
}

/// Task similarity from the target matrices themselves: column and row
/// bases are the leading r singular vectors of each target.
inline double task_similarity_xi(std::span<const Matrix> targets, Eigen::Index r) {
  std::vector<Matrix> cols;
  std::vector<Matrix> rows;
  cols.reserve(targets.size());
  rows.reserve(targets.size());
  for (const auto& m : targets) {
    auto svd = numkit::svd_truncated(m, r);
    cols.push_back(std::move(svd.u));
    rows.push_back(std::move(svd.v));
  }
  return task_similarity_xi(cols, rows);
}

struct ConditioningReport {
  double kappa = 1.0;  // max_i sigma_1(M_i) / min_i sigma_r(M_i)
  double gamma = 1.0;  // max_i sigma_1(M_i) / sigma_r(mean_i M_i)
};

inline ConditioningReport conditioning(std::span<const Matrix> targets, Eigen::Index r) {
  if (targets.empty()) throw InvalidArgument("conditioning: no targets");
  double max_top = 0.0;
  double min_rth = std::numeric_limits<double>::infinity();
  Matrix mean = Matrix::Zero(targets[0].rows(), targets[0].cols());
  for (const auto& m : targets) {
    if (m.rows() != mean.rows() || m.cols() != mean.cols()) throw ShapeMismatch("conditioning: target shapes differ");
    const Vector s = numkit::svd_truncated(m, r).sigma;
    max_top = std::max(max_top, s(0));
    min_rth = std::min(min_rth, s(r - 1));
    mean += m;
  }
  mean /= static_cast<double>(targets.size());
  const double mean_rth = numkit::svd_truncated(mean, r).sigma(r - 1);
  if (mean_rth < 1e-14) throw DegenerateAverage("conditioning: sigma_r of the task average vanishes");
  return {max_top / min_rth, max_top / mean_rth};
}

/// ||u * lambda_i * v^T - m_star||_2 by power iteration.
inline double reconstruction_error(const Matrix& u, const Matrix& lambda_i, const Matrix& v, const Matrix& m_star) {
  if (u.cols() != lambda_i.rows() || lambda_i.cols() != v.cols() || u.rows() != m_star.rows() ||
      v.rows() != m_star.cols())
    throw ShapeMismatch("reconstruction_error: non-conformable factors");
  return numkit::spectral_norm(u * lambda_i * v.transpose() - m_star);
}

/// Weighted mean of per-layer scores; used to fold layer-wise similarities
/// into a single number.
inline double weighted_mean(std::span<const double> values, std::span<const double> weights) {
  if (values.size() != weights.size() || values.empty())
    throw InvalidArgument("weighted_mean: values and weights must be non-empty and equally long");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (weights[i] < 0.0) throw InvalidArgument("weighted_mean: negative weight");
    num += weights[i] * values[i];
    den += weights[i];
  }
  if (den <= 0.0) throw InvalidArgument("weighted_mean: weights sum to zero");
  return num / den;
}

}  // namespace colora::metrics

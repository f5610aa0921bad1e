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


#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "colora/metrics.hpp"
#include "colora/taskgen.hpp"

namespace colora::metrics {
namespace {

Matrix e(int d, std::initializer_list<int> idx) {
  Matrix m = Matrix::Zero(d, static_cast<Eigen::Index>(idx.size()));
  int j = 0;
  for (int i : idx) m(i, j++) = 1.0;
  return m;
}

// principal-angle oracle: cosines are the singular values of Q1^T Q2
Vector cosines(const Matrix& a, const Matrix& b) {
  const Matrix qa = Eigen::HouseholderQR<Matrix>(a).householderQ() * Matrix::Identity(a.rows(), a.cols());
  const Matrix qb = Eigen::HouseholderQR<Matrix>(b).householderQ() * Matrix::Identity(b.rows(), b.cols());
  return Eigen::JacobiSVD<Matrix>(qa.transpose() * qb).singularValues();
}

TEST(SubspaceDist, HandExamples) {
  EXPECT_NEAR(subspace_dist(e(2, {0}), e(2, {1})), 1.0, 1e-15);
  Matrix diag(2, 1);
  diag << 1.0, 1.0;
  EXPECT_NEAR(subspace_dist(e(2, {0}), diag / std::sqrt(2.0)), 1.0 / std::sqrt(2.0), 1e-15);
  const Matrix x = numkit::rand_gaussian(6, 2, RngSeed{1});
  EXPECT_LE(subspace_dist(x, x), 1e-15);
}

TEST(SubspaceDist, MatchesPrincipalAngleOracle) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Matrix a = numkit::rand_gaussian(9, 3, RngSeed{s});
    const Matrix b = numkit::rand_gaussian(9, 3, RngSeed{s + 100});
    const double cmin = cosines(a, b).minCoeff();
    EXPECT_NEAR(subspace_dist(a, b), std::sqrt(std::max(0.0, 1.0 - cmin * cmin)), 1e-10);
  }
}

TEST(SubspaceDist, ErrorPaths) {
  EXPECT_THROW(subspace_dist(Matrix::Zero(4, 2), e(4, {0, 1})), RankDeficient);
  EXPECT_THROW(subspace_dist(e(4, {0}), e(4, {0, 1})), ShapeMismatch);
}

TEST(SubspaceDist, PropertiesOnRandomTriples) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const RngSeed seed{s};
    const Matrix a = numkit::rand_gaussian(7, 2, seed.fork(0));
    const Matrix b = numkit::rand_gaussian(7, 2, seed.fork(1));
    const Matrix c = numkit::rand_gaussian(7, 2, seed.fork(2));
    const Matrix inv = numkit::rand_gaussian(2, 2, seed.fork(3)) + 3.0 * Matrix::Identity(2, 2);
    const double ab = subspace_dist(a, b);
    EXPECT_EQ(ab, subspace_dist(b, a));
    EXPECT_LE(subspace_dist(a, c), ab + subspace_dist(b, c) + 1e-10);
    EXPECT_NEAR(subspace_dist(Matrix(a * inv), b), ab, 1e-10);
    const double sim = subspace_similarity(a, b);
    EXPECT_LE(ab * ab, 2.0 * (1.0 - sim * sim) + 1e-10);
    EXPECT_GE(sim, 0.0);
    EXPECT_LE(sim, 1.0);
  }
}

TEST(SubspaceSimilarity, HandExamples) {
  EXPECT_NEAR(subspace_similarity(e(3, {0, 1}), e(3, {0, 2})), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(subspace_similarity(e(4, {0, 1}), e(4, {2, 3})), 0.0, 1e-15);
  const Matrix x = numkit::rand_gaussian(6, 3, RngSeed{4});
  EXPECT_NEAR(subspace_similarity(x, x), 1.0, 1e-12);
}

TEST(SubspaceSimilarity, MatchesRmsCosineOracle) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Matrix a = numkit::rand_gaussian(8, 3, RngSeed{s});
    const Matrix b = numkit::rand_gaussian(8, 3, RngSeed{s + 50});
    EXPECT_NEAR(subspace_similarity(a, b), std::sqrt(cosines(a, b).squaredNorm() / 3.0), 1e-12);
  }
}

TEST(TaskSimilarityXi, HandExamples) {
  const std::vector<Matrix> cols{e(3, {0, 1}), e(3, {0, 2})};
  const std::vector<Matrix> rows{e(3, {0, 1}), e(3, {0, 1})};
  EXPECT_NEAR(task_similarity_xi(cols, rows), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(TaskSimilarityXi, ZeroBetaGivesOneAndMinProperty) {
  taskgen::TaskGenConfig cfg;
  cfg.d = 10;
  cfg.r = 2;
  cfg.k = 3;
  cfg.beta = 0.0;
  auto gt = taskgen::make_ground_truth(cfg);
  EXPECT_NEAR(task_similarity_xi(gt.targets, 2), 1.0, 1e-9);

  cfg.beta = 0.4;
  gt = taskgen::make_ground_truth(cfg);
  const double xi = task_similarity_xi(gt.targets, 2);
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) {
      EXPECT_LE(xi, subspace_similarity(gt.u_i[i], gt.u_i[j]) + 1e-12);
      EXPECT_LE(xi, subspace_similarity(gt.v_i[i], gt.v_i[j]) + 1e-12);
    }
}

TEST(Conditioning, HandExamples) {
  Matrix m = Matrix::Zero(3, 3);
  m.diagonal() << 2.0, 1.0, 0.0;
  const std::vector<Matrix> one{m};
  const auto rep = conditioning(one, 2);
  EXPECT_NEAR(rep.kappa, 2.0, 1e-12);
  EXPECT_NEAR(rep.gamma, 2.0, 1e-12);

  const std::vector<Matrix> flat{Matrix::Identity(3, 3), Matrix::Identity(3, 3)};
  EXPECT_NEAR(conditioning(flat, 3).kappa, 1.0, 1e-12);

  Matrix p = Matrix::Zero(2, 2);
  p(0, 0) = 1.0;
  const std::vector<Matrix> cancel{p, Matrix(-p)};
  EXPECT_THROW(conditioning(cancel, 1), DegenerateAverage);
}

TEST(ReconstructionError, Examples) {
  const Matrix u = numkit::rand_orthonormal(4, 2, RngSeed{1});
  const Matrix v = numkit::rand_orthonormal(4, 2, RngSeed{2});
  const Matrix lam = numkit::rand_gaussian(2, 2, RngSeed{3});
  const Matrix m = u * lam * v.transpose();
  EXPECT_LE(reconstruction_error(u, lam, v, m), 1e-12);
  const double s1 = Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
  EXPECT_NEAR(reconstruction_error(u, Matrix::Zero(2, 2), v, m), s1, 1e-9 * s1);

  const Matrix target = numkit::rand_gaussian(4, 4, RngSeed{9});
  const double oracle = Eigen::JacobiSVD<Matrix>(m - target).singularValues()(0);
  EXPECT_NEAR(reconstruction_error(u, lam, v, target), oracle, 1e-9);
  EXPECT_THROW(reconstruction_error(u, Matrix::Zero(3, 3), v, m), ShapeMismatch);
}

TEST(WeightedMean, ReducesLayerScores) {
  const std::vector<double> vals{0.5, 1.0};
  const std::vector<double> w{1.0, 3.0};
  EXPECT_NEAR(weighted_mean(vals, w), 0.875, 1e-15);
  const std::vector<double> neg{1.0, -1.0};
  EXPECT_THROW(weighted_mean(vals, neg), InvalidArgument);
}

}  // namespace
}  // namespace colora::metrics

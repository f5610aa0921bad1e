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
#include <cstring>

#include "colora/coaltmin.hpp"
#include "colora/state_io.hpp"

namespace colora::coaltmin {
namespace {

using taskgen::Batch;
using taskgen::Dataset;
using taskgen::GroundTruth;

struct Instance {
  GroundTruth gt;
  Dataset ds;
};

Instance make_instance(double beta, std::uint64_t seed, int big_n = 120, int small_n = 12, int small_t = 8) {
  taskgen::TaskGenConfig cfg;
  cfg.d = 10;
  cfg.r = 2;
  cfg.k = 4;
  cfg.beta = beta;
  cfg.seed = RngSeed{seed};
  Instance in{taskgen::make_ground_truth(cfg), {}};
  in.ds = taskgen::sample_dataset(in.gt, big_n, small_n, small_t, RngSeed{seed}.fork(99));
  return in;
}

bool same_bytes(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

// Stacked dense design: column p holds the predictions of basis matrix p.
template <typename Model>
Matrix stacked_design(const Batch& b, Eigen::Index rows, Eigen::Index cols, Model model) {
  Matrix a(static_cast<Eigen::Index>(b.size()), rows * cols);
  for (Eigen::Index p = 0; p < rows * cols; ++p) {
    Matrix basis = Matrix::Zero(rows, cols);
    basis.data()[p] = 1.0;
    const Matrix m = model(basis);
    for (std::size_t j = 0; j < b.size(); ++j) {
      double s = 0.0;
      for (Eigen::Index x = 0; x < m.size(); ++x) s += b.g[j].data()[x] * m.data()[x];
      a(static_cast<Eigen::Index>(j), p) = s;
    }
  }
  return a;
}

Vector labels(const Batch& b) { return Eigen::Map<const Vector>(b.y.data(), static_cast<Eigen::Index>(b.y.size())); }

TEST(SpectralEstimate, ZeroLabelsGiveZero) {
  auto in = make_instance(0.0, 1, 10, 4, 1);
  for (auto& c : in.ds.clients) std::fill(c.large.y.begin(), c.large.y.end(), 0.0);
  EXPECT_EQ(spectral_estimate(in.ds).norm(), 0.0);
  EXPECT_EQ(init_spectral(in.ds, 2).lambda.norm(), 0.0);
}

TEST(SpectralEstimate, MatchesDirectAverage) {
  const auto in = make_instance(0.2, 2, 15, 4, 1);
  Matrix sum = Matrix::Zero(10, 10);
  for (const auto& c : in.ds.clients)
    for (std::size_t j = 0; j < c.large.size(); ++j) sum += c.large.y[j] * c.large.g[j];
  EXPECT_LE((spectral_estimate(in.ds) - sum / 60.0).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LambdaStep, HandExample) {
  Batch b;
  b.g.push_back(Matrix::Identity(2, 2));
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 2.0;
  taskgen::label_batch(b, m);
  const Matrix e1 = Matrix::Identity(2, 1);
  EXPECT_NEAR(lambda_step(e1, e1, b, 0.0)(0, 0), 2.0, 1e-15);
}

TEST(LambdaStep, ExactRecoveryAndStackedOracle) {
  const auto in = make_instance(0.0, 3);
  for (int i = 0; i < 4; ++i) {
    const Batch b = taskgen::draw_batch(in.gt.targets[i], 8, RngSeed{static_cast<std::uint64_t>(i)});  // n = 2 r^2
    const Matrix lam = lambda_step(in.gt.u_star, in.gt.v_star, b, 0.0);
    EXPECT_LE((lam - in.gt.lambdas[i]).cwiseAbs().maxCoeff(), 1e-10);
    const Matrix a = stacked_design(b, 2, 2, [&](const Matrix& l) { return Matrix(in.gt.u_star * l * in.gt.v_star.transpose()); });
    const Vector oracle = a.colPivHouseholderQr().solve(labels(b));
    EXPECT_LE((numkit::vec(lam) - oracle).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(LambdaStep, ZeroLabelsGiveZeroCore) {
  const auto in = make_instance(0.0, 3);
  Batch b = taskgen::draw_batch(in.gt.targets[0], 6, RngSeed{1});
  std::fill(b.y.begin(), b.y.end(), 0.0);
  EXPECT_EQ(lambda_step(in.gt.u_star, in.gt.v_star, b, 1e-3).norm(), 0.0);
}

TEST(LambdaStep, UnderdeterminedSurfacesSingularSystem) {
  const auto in = make_instance(0.0, 3);
  const Batch b = taskgen::draw_batch(in.gt.targets[0], 3, RngSeed{1});  // n < r^2
  EXPECT_THROW(lambda_step(in.gt.u_star, in.gt.v_star, b, 0.0), SingularSystem);
  EXPECT_NO_THROW(lambda_step(in.gt.u_star, in.gt.v_star, b, 1e-6));
}

TEST(FactorNormalEquations, MatchStackedDesign) {
  const auto in = make_instance(0.3, 4, 30, 4, 1);
  const auto batches = large_batches(in.ds);
  const Matrix u = numkit::rand_orthonormal(10, 2, RngSeed{5});
  for (Side side : {Side::row, Side::column}) {
    Matrix gram = Matrix::Zero(20, 20);
    Vector rhs = Vector::Zero(20);
    for (int i = 0; i < 4; ++i) {
      const Matrix& lam = in.gt.lambdas[i];
      const Matrix a = stacked_design(*batches[i], 10, 2, [&](const Matrix& x) {
        return side == Side::row ? Matrix(u * lam * x.transpose()) : Matrix(x * lam * u.transpose());
      });
      gram += a.transpose() * a;
      rhs += a.transpose() * labels(*batches[i]);
    }
    const auto ne = factor_normal_equations(side, u, in.gt.lambdas, batches);
    EXPECT_LE((ne.gram - gram).cwiseAbs().maxCoeff(), 1e-9 * gram.cwiseAbs().maxCoeff()) << to_string(side);
    EXPECT_LE((ne.rhs - rhs).cwiseAbs().maxCoeff(), 1e-9 * rhs.cwiseAbs().maxCoeff()) << to_string(side);
  }
}

TEST(FactorStep, FirstOrderConditionAndOrthonormality) {
  const auto in = make_instance(0.2, 6);
  const auto batches = large_batches(in.ds);
  const Matrix u = numkit::rand_orthonormal(10, 2, RngSeed{7});
  for (Side side : {Side::row, Side::column}) {
    const auto ne = factor_normal_equations(side, u, in.gt.lambdas, batches);
    const Matrix raw = solve_shared_factor(side, u, in.gt.lambdas, batches, 0.0);
    EXPECT_LE((ne.gram * numkit::vec(raw) - ne.rhs).norm(), 1e-6 * ne.rhs.norm());
    const Matrix q = factor_step(side, u, in.gt.lambdas, batches, 0.0);
    EXPECT_LE((q.transpose() * q - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE(metrics::subspace_dist(q, raw), 1e-12);
  }
}

TEST(FactorStep, ExactFactorsAreRecovered) {
  const auto in = make_instance(0.0, 8);
  const auto batches = large_batches(in.ds);
  const Matrix v = factor_step(Side::row, in.gt.u_star, in.gt.lambdas, batches, 0.0);
  EXPECT_LE(metrics::subspace_dist(v, in.gt.v_star), 1e-10);
  const Matrix u = factor_step(Side::column, in.gt.v_star, in.gt.lambdas, batches, 0.0);
  EXPECT_LE(metrics::subspace_dist(u, in.gt.u_star), 1e-10);
}

TEST(FactorStep, ZeroLabelsAreRankDeficient) {
  auto in = make_instance(0.0, 8, 30, 4, 1);
  for (auto& c : in.ds.clients) std::fill(c.large.y.begin(), c.large.y.end(), 0.0);
  EXPECT_THROW(factor_step(Side::row, in.gt.u_star, in.gt.lambdas, large_batches(in.ds), 0.0), RankDeficient);
}

TEST(Run, ZeroIterationsReturnInitialization) {
  const auto in = make_instance(0.1, 9);
  SolverConfig cfg;
  cfg.iterations = 0;
  const auto st = run(in.ds, cfg);
  const auto init = init_spectral(in.ds, 2);
  EXPECT_TRUE(same_bytes(st.u, init.u));
  EXPECT_TRUE(same_bytes(st.v, init.v));
  for (const auto& l : st.lambdas) EXPECT_TRUE(same_bytes(l, init.lambda));
  EXPECT_EQ(st.t, 0);
}

TEST(Run, ConvergesOnSharedFactorsWithOrthonormalIterates) {
  const auto in = make_instance(0.0, 10);
  SolverConfig cfg;
  cfg.iterations = 8;
  const auto st = run(in.ds, cfg, &in.gt);
  ASSERT_EQ(st.history.size(), 9u);
  EXPECT_LE(metrics::subspace_dist(st.u, in.gt.u_star) + metrics::subspace_dist(st.v, in.gt.v_star), 1e-3);
  EXPECT_LE((st.u.transpose() * st.u - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((st.v.transpose() * st.v - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-10);
  // exact block minimizers: loss does not increase after the first iteration
  for (std::size_t t = 2; t < st.history.size(); ++t)
    EXPECT_LE(st.history[t].loss, st.history[t - 1].loss * (1.0 + 1e-9) + 1e-18) << "t=" << t;
}

TEST(Run, EveryIterateIsOrthonormal) {
  const auto in = make_instance(0.1, 11);
  for (int t = 1; t <= 4; ++t) {
    SolverConfig cfg;
    cfg.iterations = t;
    const auto st = run(in.ds, cfg);
    EXPECT_LE((st.u.transpose() * st.u - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((st.v.transpose() * st.v - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Run, SequentialVariantAlsoConverges) {
  const auto in = make_instance(0.0, 12);
  SolverConfig cfg;
  cfg.iterations = 8;
  cfg.sequential_uv = true;
  const auto st = run(in.ds, cfg, &in.gt);
  EXPECT_LE(*st.history.back().dist_u + *st.history.back().dist_v, 1e-3);
}

TEST(Run, ByteDeterministic) {
  const auto in = make_instance(0.2, 13);
  SolverConfig cfg;
  cfg.iterations = 5;
  const auto a = run(in.ds, cfg);
  const auto b = run(in.ds, cfg);
  EXPECT_TRUE(same_bytes(a.u, b.u));
  EXPECT_TRUE(same_bytes(a.v, b.v));
  for (int i = 0; i < 4; ++i) EXPECT_TRUE(same_bytes(a.lambdas[i], b.lambdas[i]));
}

TEST(Run, TransposedDataSwapsFactors) {
  const auto in = make_instance(0.15, 14);
  SolverConfig cfg;
  cfg.iterations = 5;
  const auto a = run(in.ds, cfg);
  const auto b = run(taskgen::transposed(in.ds), cfg);
  EXPECT_LE(metrics::subspace_dist(a.u, b.v), 1e-8);
  EXPECT_LE(metrics::subspace_dist(a.v, b.u), 1e-8);
  for (int i = 0; i < 4; ++i) {
    const Matrix ma = a.u * a.lambdas[i] * a.v.transpose();
    const Matrix mb = b.u * b.lambdas[i] * b.v.transpose();
    EXPECT_LE((ma - mb.transpose()).norm(), 1e-8 * ma.norm());
  }
}

TEST(Run, ClientPermutationPermutesCores) {
  const auto in = make_instance(0.15, 15);
  Dataset perm = in.ds;
  std::swap(perm.clients[0], perm.clients[3]);
  SolverConfig cfg;
  cfg.iterations = 4;
  const auto a = run(in.ds, cfg);
  const auto b = run(perm, cfg);
  EXPECT_LE(metrics::subspace_dist(a.u, b.u), 1e-9);
  EXPECT_LE(metrics::subspace_dist(a.v, b.v), 1e-9);
  const Matrix m0 = a.u * a.lambdas[0] * a.v.transpose();
  const Matrix m3 = b.u * b.lambdas[3] * b.v.transpose();
  EXPECT_LE((m0 - m3).norm(), 1e-8 * m0.norm());
}

TEST(Run, RefitLambdaUsesFinalFactors) {
  const auto in = make_instance(0.0, 16);
  SolverConfig cfg;
  cfg.iterations = 6;
  cfg.refit_lambda = true;
  const auto st = run(in.ds, cfg);
  for (int i = 0; i < 4; ++i)
    EXPECT_TRUE(same_bytes(st.lambdas[i], lambda_step(st.u, st.v, in.ds.clients[i].large, 0.0)));
}

TEST(Run, ErrorPaths) {
  const auto in = make_instance(0.0, 17, 40, 3, 2);
  SolverConfig cfg;
  cfg.iterations = 3;
  EXPECT_THROW(run(in.ds, cfg), InvalidArgument);  // T < iterations
  cfg.iterations = 1;
  try {
    run(in.ds, cfg);  // n = 3 < r^2
    FAIL() << "expected SingularSystem";
  } catch (const SingularSystem& e) {
    EXPECT_EQ(std::string(e.what()).rfind("iteration 0:", 0), 0u) << e.what();
  }
  auto ghost = in.gt;
  ghost.targets.pop_back();
  cfg.ridge = 1e-6;
  EXPECT_THROW(run(in.ds, cfg, &ghost), ShapeMismatch);
}

TEST(StateIo, JsonRoundTripIsBitExact) {
  const auto in = make_instance(0.1, 18);
  SolverConfig cfg;
  cfg.iterations = 3;
  const auto st = run(in.ds, cfg, &in.gt);
  const auto back = state_from_json(nlohmann::json::parse(to_json(st).dump()));
  EXPECT_TRUE(same_bytes(back.u, st.u));
  EXPECT_TRUE(same_bytes(back.v, st.v));
  for (int i = 0; i < 4; ++i) EXPECT_TRUE(same_bytes(back.lambdas[i], st.lambdas[i]));
  ASSERT_EQ(back.history.size(), st.history.size());
  for (std::size_t t = 0; t < st.history.size(); ++t) {
    EXPECT_EQ(back.history[t].loss, st.history[t].loss);
    EXPECT_EQ(back.history[t].dist_u, st.history[t].dist_u);
  }
}

TEST(StateIo, UntracedHistoryHasNullDistances) {
  const auto in = make_instance(0.1, 19);
  SolverConfig cfg;
  cfg.iterations = 2;
  cfg.record_history = true;
  const auto j = to_json(run(in.ds, cfg));
  EXPECT_TRUE(j["history"][1]["dist_u"].is_null());
  EXPECT_FALSE(state_from_json(j).history[1].dist_u.has_value());
  EXPECT_THROW(state_from_json(nlohmann::json::parse(R"({"dims":{}})")), FormatError);
}

TEST(StateIo, Base64KnownVectors) {
  EXPECT_EQ(b64::encode(""), "");
  EXPECT_EQ(b64::encode("f"), "Zg==");
  EXPECT_EQ(b64::encode("fo"), "Zm8=");
  EXPECT_EQ(b64::encode("foo"), "Zm9v");
  EXPECT_EQ(b64::encode("foobar"), "Zm9vYmFy");
  for (const std::string s : {"", "f", "fo", "foo", "foob", "fooba", "foobar"}) EXPECT_EQ(b64::decode(b64::encode(s)), s);
  EXPECT_THROW(b64::decode("Zm9"), FormatError);
  EXPECT_THROW(b64::decode("Zm!v"), FormatError);
}

}  // namespace
}  // namespace colora::coaltmin

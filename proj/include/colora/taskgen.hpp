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

// Synthetic heterogeneous matrix-sensing tasks.
//
// Every task i has target M_i = U_i * Lambda_i * V_i^T where U_i, V_i are
// perturbations of shared reference bases U*, V* with all principal angles
// equal, so dist(U*, U_i) = beta exactly. Measurements are i.i.d. standard
// Gaussian d x d matrices with noiseless labels y = <G, M_i>.

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>
#include <span>

#include "colora/numkit.hpp"

namespace colora::taskgen {

/// beta = sqrt(r) * sqrt(1 - xi^2).
inline double beta_from_xi(double xi, int r) {
  return std::sqrt(static_cast<double>(r)) * std::sqrt(std::max(0.0, 1.0 - xi * xi));
}

inline double xi_from_beta(double beta, int r) {
  return std::sqrt(std::max(0.0, 1.0 - beta * beta / static_cast<double>(r)));
}

struct TaskGenConfig {
  int d = 20;
  int r = 3;
  int k = 8;
  std::optional<double> beta;
  std::optional<double> xi;
  double kappa_target = 2.0;
  double sigma_min = 1.0;
  RngSeed seed{};

  /// Validates the config and returns the perturbation radius.
  [[nodiscard]] double resolved_beta() const {
    if (d < 1 || r < 1 || k < 1) throw InvalidArgument("TaskGenConfig: d, r, k must be positive");
    if (2 * r > d) throw InvalidArgument("TaskGenConfig: need 2r <= d");
    if (beta.has_value() == xi.has_value()) throw InvalidArgument("TaskGenConfig: supply exactly one of beta, xi");
    if (!(kappa_target >= 1.0)) throw InvalidArgument("TaskGenConfig: kappa_target must be >= 1");
    if (!(sigma_min > 0.0)) throw InvalidArgument("TaskGenConfig: sigma_min must be > 0");
    if (xi) {
      if (!(*xi > 0.0 && *xi <= 1.0)) throw InvalidArgument("TaskGenConfig: xi must lie in (0, 1]");
      return beta_from_xi(*xi, r);
    }
    return *beta;
  }
};

struct GroundTruth {
  Matrix u_star;
  Matrix v_star;
  std::vector<Matrix> u_i;
  std::vector<Matrix> v_i;
  std::vector<Matrix> lambdas;
  std::vector<Matrix> targets;
  double beta = 0.0;

  [[nodiscard]] int d() const { return static_cast<int>(u_star.rows()); }
  [[nodiscard]] int r() const { return static_cast<int>(u_star.cols()); }
  [[nodiscard]] int k() const { return static_cast<int>(targets.size()); }
};

/// A batch of (G, y) measurement pairs.
struct Batch {
  std::vector<Matrix> g;
  std::vector<double> y;

  [[nodiscard]] std::size_t size() const { return y.size(); }
};

struct ClientData {
  Batch large;
  std::vector<Batch> small;
};

struct DatasetMeta {
  std::uint32_t d = 0;
  std::uint32_t r = 0;
  std::uint32_t k = 0;
  std::uint32_t big_n = 0;    // N, large-batch size
  std::uint32_t small_n = 0;  // n, small-batch size
  std::uint32_t small_t = 0;  // T, small batches per client
  RngSeed seed{};

  friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<ClientData> clients;
};

/// U' = u_ref cos(theta) + W sin(theta), sin(theta) = beta, with W a seeded
/// orthonormal basis of an r-dim subspace orthogonal to span(u_ref).
inline Matrix perturb_basis(const Matrix& u_ref, double beta, RngSeed seed) {
  if (!(beta >= 0.0 && beta < 1.0)) throw BadBeta("perturb_basis: beta must lie in [0, 1)");
  const auto d = u_ref.rows();
  const auto r = u_ref.cols();
  if (2 * r > d) throw InvalidArgument("perturb_basis: need 2r <= d");
  if (beta == 0.0) return u_ref;

  Matrix g = numkit::rand_gaussian(d, r, seed);
  // two projection passes keep W orthogonal to u_ref to working precision
  for (int pass = 0; pass < 2; ++pass) g -= u_ref * (u_ref.transpose() * g);
  Matrix w = numkit::qr_thin(g).q;
  w -= u_ref * (u_ref.transpose() * w);
  w = numkit::qr_thin(w).q;

  const double s = beta;
  const double c = std::sqrt(1.0 - beta * beta);
  return u_ref * c + w * s;
}

namespace detail {
enum Stream : std::uint64_t { kUStar = 1, kVStar = 2, kClient = 3 };
enum ClientStream : std::uint64_t { kU = 0, kV = 1, kLeft = 2, kRight = 3 };
}  // namespace detail

/// Core with singular values log-spaced from sigma_min * kappa down to
/// sigma_min, rotated on both sides by seeded orthogonal matrices.
inline Matrix make_core(int r, double kappa, double sigma_min, RngSeed seed) {
  // a single singular value cannot carry a ratio; r == 1 yields sigma_min
  Vector s(r);
  for (int j = 0; j < r; ++j) {
    const double frac = r == 1 ? 1.0 : static_cast<double>(j) / (r - 1);
    s(j) = sigma_min * std::pow(kappa, 1.0 - frac);
  }
  const Matrix q1 = numkit::rand_orthonormal(r, r, seed.fork(detail::kLeft));
  const Matrix q2 = numkit::rand_orthonormal(r, r, seed.fork(detail::kRight));
  return q1 * s.asDiagonal() * q2.transpose();
}

inline GroundTruth make_ground_truth(const TaskGenConfig& cfg) {
  const double beta = cfg.resolved_beta();
  GroundTruth gt;
  gt.beta = beta;
  gt.u_star = numkit::rand_orthonormal(cfg.d, cfg.r, cfg.seed.fork(detail::kUStar));
  gt.v_star = numkit::rand_orthonormal(cfg.d, cfg.r, cfg.seed.fork(detail::kVStar));
  for (int i = 0; i < cfg.k; ++i) {
    const RngSeed cs = cfg.seed.fork(detail::kClient).fork(static_cast<std::uint64_t>(i));
    gt.u_i.push_back(perturb_basis(gt.u_star, beta, cs.fork(detail::kU)));
    gt.v_i.push_back(perturb_basis(gt.v_star, beta, cs.fork(detail::kV)));
    gt.lambdas.push_back(make_core(cfg.r, cfg.kappa_target, cfg.sigma_min, cs));
    gt.targets.push_back(gt.u_i.back() * gt.lambdas.back() * gt.v_i.back().transpose());
  }
  return gt;
}

/// Fills y with <G, m> for every G already in the batch.
inline void label_batch(Batch& batch, const Matrix& m) {
  batch.y.resize(batch.g.size());
  for (std::size_t j = 0; j < batch.g.size(); ++j) batch.y[j] = numkit::inner(batch.g[j], m);
}

/// n Gaussian d x d measurements drawn sequentially from one seeded stream.
inline Batch draw_batch(const Matrix& m, std::size_t n, RngSeed seed) {
  const auto d = m.rows();
  Batch b;
  b.g.reserve(n);
  auto eng = seed.engine();
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t j = 0; j < n; ++j) {
    Matrix g(d, m.cols());
    for (Eigen::Index a = 0; a < g.size(); ++a) g.data()[a] = normal(eng);
    b.g.push_back(std::move(g));
  }
  label_batch(b, m);
  return b;
}

/// Samples per-client large (N) and small (T x n) batches. Each batch has
/// its own forked stream, so clients can be generated in any order.
inline Dataset sample_dataset(std::span<const Matrix> targets, int big_n, int small_n, int small_t, RngSeed seed) {
  if (big_n < 1 || small_n < 1 || small_t < 1) throw InvalidArgument("sample_dataset: N, n, T must be >= 1");
  if (targets.empty()) throw InvalidArgument("sample_dataset: no targets");
  Dataset ds;
  ds.meta = {static_cast<std::uint32_t>(targets[0].rows()),
             0,
             static_cast<std::uint32_t>(targets.size()),
             static_cast<std::uint32_t>(big_n),
             static_cast<std::uint32_t>(small_n),
             static_cast<std::uint32_t>(small_t),
             seed};
  ds.clients.resize(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const RngSeed cs = seed.fork(i);
    auto& c = ds.clients[i];
    c.large = draw_batch(targets[i], static_cast<std::size_t>(big_n), cs.fork(0));
    for (int t = 0; t < small_t; ++t)
      c.small.push_back(draw_batch(targets[i], static_cast<std::size_t>(small_n), cs.fork(1 + static_cast<std::uint64_t>(t))));
  }
  return ds;
}

inline Dataset sample_dataset(const GroundTruth& gt, int big_n, int small_n, int small_t, RngSeed seed) {
  Dataset ds = sample_dataset(gt.targets, big_n, small_n, small_t, seed);
  ds.meta.r = static_cast<std::uint32_t>(gt.r());
  return ds;
}

/// Copy of ds with every G transposed (labels unchanged). Measuring
/// M^T with G^T gives the same labels as measuring M with G.
inline Dataset transposed(const Dataset& ds) {
  Dataset out = ds;
  for (auto& c : out.clients) {
    for (auto& g : c.large.g) g = Matrix(g.transpose());
    for (auto& b : c.small)
      for (auto& g : b.g) g = Matrix(g.transpose());
  }
  return out;
}

}  // namespace colora::taskgen

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

// Collaborative alternating minimization for heterogeneous matrix sensing.
//
// Model: client i observes y = <G, U * Lambda_i * V^T>. U and V are shared
// and updated by least squares over every client's large batch; each core
// Lambda_i is refit per iteration on a fresh small batch of client i.
//
// One iteration t:
//   Lambda_i <- argmin over small batch t of client i   (U_t, V_t fixed)
//   V_{t+1}  <- QR(argmin_V sum_i l_i(U_t, V, Lambda_i))
//   U_{t+1}  <- QR(argmin_U sum_i l_i(U, V_t, Lambda_i))
// The U update reads V_t, not V_{t+1}; SolverConfig::sequential_uv switches
// to the Gauss-Seidel variant.
//
// Least-squares blocks are solved through accumulated normal equations
// (Gram + right-hand side), never a stacked design matrix.

#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "colora/metrics.hpp"
#include "colora/numkit.hpp"
#include "colora/taskgen.hpp"

namespace colora::coaltmin {

using taskgen::Batch;
using taskgen::Dataset;
using taskgen::GroundTruth;

struct SolverConfig {
  int iterations = 10;
  int rank = 0;  // 0: take from Dataset meta
  double ridge = 0.0;
  bool single_client_fast_path = false;
  bool record_history = false;
  bool sequential_uv = false;
  bool refit_lambda = false;
};

struct HistoryRecord {
  int t = 0;
  std::optional<double> dist_u;
  std::optional<double> dist_v;
  std::optional<double> max_recon;
  double loss = 0.0;
};

struct SolverState {
  Matrix u;
  Matrix v;
  std::vector<Matrix> lambdas;
  int t = 0;
  std::vector<HistoryRecord> history;
};

struct SpectralInit {
  Matrix u;
  Matrix lambda;  // diag(sigma)
  Matrix v;
};

/// M_hat = (1/kN) sum_i sum_j y_ij G_ij over every large batch (client-major),
/// factored by a rank-r truncated SVD.
inline Matrix spectral_estimate(const Dataset& ds) {
  if (ds.clients.empty() || ds.clients[0].large.size() == 0)
    throw InvalidArgument("spectral_estimate: empty large batches");
  const auto d = ds.clients[0].large.g[0].rows();
  Matrix acc = Matrix::Zero(d, d);
  std::size_t count = 0;
  for (const auto& c : ds.clients) {
    // per-client partial sums keep the summation tree fixed per batch
    Matrix part = Matrix::Zero(d, d);
    for (std::size_t j = 0; j < c.large.size(); ++j) part += c.large.y[j] * c.large.g[j];
    acc += part;
    count += c.large.size();
  }
  return acc / static_cast<double>(count);
}

inline SpectralInit init_spectral(const Dataset& ds, int r) {
  auto svd = numkit::svd_truncated(spectral_estimate(ds), r);
  return {std::move(svd.u), Matrix(svd.sigma.asDiagonal()), std::move(svd.v)};
}

/// Sum of squared residuals of one batch under the model u * lambda * v^T.
inline double batch_loss(const Matrix& u, const Matrix& lambda, const Matrix& v, const Batch& batch) {
  const Matrix m = u * lambda * v.transpose();
  double loss = 0.0;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const double res = batch.y[j] - numkit::inner(batch.g[j], m);
    loss += res * res;
  }
  return loss;
}

/// Sum over clients of the large-batch loss.
inline double total_large_loss(const Matrix& u, const std::vector<Matrix>& lambdas, const Matrix& v,
                               const Dataset& ds) {
  double loss = 0.0;
  for (std::size_t i = 0; i < ds.clients.size(); ++i) loss += batch_loss(u, lambdas[i], v, ds.clients[i].large);
  return loss;
}

struct NormalEquations {
  Matrix gram;
  Vector rhs;
};

/// Normal equations of min_Lambda sum_j (y_j - <G_j, u Lambda v^T>)^2.
/// Design row j is vec(u^T G_j v), length r^2.
inline NormalEquations core_normal_equations(const Matrix& u, const Matrix& v, const Batch& batch) {
  const auto r = u.cols();
  NormalEquations ne{Matrix::Zero(r * r, r * r), Vector::Zero(r * r)};
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const Matrix proj = u.transpose() * batch.g[j] * v;
    const Vector a = numkit::vec(proj);
    ne.gram.noalias() += a * a.transpose();
    ne.rhs += batch.y[j] * a;
  }
  return ne;
}

/// Exact least-squares core update. With ridge == 0 a singular system
/// (e.g. n < r^2) is surfaced as SingularSystem.
inline Matrix lambda_step(const Matrix& u, const Matrix& v, const Batch& batch, double ridge) {
  if (batch.size() == 0) throw InvalidArgument("lambda_step: empty batch");
  const auto r = u.cols();
  const auto ne = core_normal_equations(u, v, batch);
  return numkit::unvec(numkit::solve_ridge(ne.gram, ne.rhs, ridge), r, r);
}

enum class Side { column, row };

inline const char* to_string(Side s) { return s == Side::column ? "column" : "row"; }

/// Normal equations for a shared factor.
///
/// Row side: <G, U L V^T> = <G^T U L, V>, so the design row is vec(G^T U L)
/// and the unknown is V. Column side: <G, U L V^T> = <G V L^T, U>, with
/// fixed V and the unknown U.
inline NormalEquations factor_normal_equations(Side side, const Matrix& fixed_factor,
                                               const std::vector<Matrix>& lambdas,
                                               const std::vector<const Batch*>& batches) {
  if (lambdas.size() != batches.size()) throw ShapeMismatch("factor_step: one core per client batch required");
  const auto d = fixed_factor.rows();
  const auto r = fixed_factor.cols();
  const auto m = d * r;
  NormalEquations ne{Matrix::Zero(m, m), Vector::Zero(m)};
  for (std::size_t i = 0; i < batches.size(); ++i) {
    const Matrix fl = side == Side::row ? Matrix(fixed_factor * lambdas[i])
                                        : Matrix(fixed_factor * lambdas[i].transpose());
    // per-client partial sums, reduced in client order
    Matrix gram_i = Matrix::Zero(m, m);
    Vector rhs_i = Vector::Zero(m);
    const Batch& b = *batches[i];
    for (std::size_t j = 0; j < b.size(); ++j) {
      const Matrix design = side == Side::row ? Matrix(b.g[j].transpose() * fl) : Matrix(b.g[j] * fl);
      const Vector a = numkit::vec(design);
      gram_i.noalias() += a * a.transpose();
      rhs_i += b.y[j] * a;
    }
    ne.gram += gram_i;
    ne.rhs += rhs_i;
  }
  return ne;
}

/// Unnormalized least-squares solution for the free shared factor.
inline Matrix solve_shared_factor(Side side, const Matrix& fixed_factor, const std::vector<Matrix>& lambdas,
                                  const std::vector<const Batch*>& batches, double ridge) {
  const auto ne = factor_normal_equations(side, fixed_factor, lambdas, batches);
  const Vector x = numkit::solve_ridge_or_fallback(ne.gram, ne.rhs, ridge,
                                                   std::string("factor_step(") + to_string(side) + ")");
  return numkit::unvec(x, fixed_factor.rows(), fixed_factor.cols());
}

/// Shared-factor update followed by QR; returns the orthonormal factor.
inline Matrix factor_step(Side side, const Matrix& fixed_factor, const std::vector<Matrix>& lambdas,
                          const std::vector<const Batch*>& batches, double ridge) {
  return numkit::qr_thin(solve_shared_factor(side, fixed_factor, lambdas, batches, ridge)).q;
}

inline std::vector<const Batch*> large_batches(const Dataset& ds) {
  std::vector<const Batch*> out;
  out.reserve(ds.clients.size());
  for (const auto& c : ds.clients) out.push_back(&c.large);
  return out;
}

namespace detail {

template <typename E>
[[noreturn]] void rethrow_at(const E& e, int t) {
  std::ostringstream os;
  os << "iteration " << t << ": " << e.what();
  throw E(os.str());
}

inline HistoryRecord trace(int t, const Matrix& u, const Matrix& v, const std::vector<Matrix>& lambdas,
                           double loss, const GroundTruth* gt) {
  HistoryRecord rec;
  rec.t = t;
  rec.loss = loss;
  if (gt != nullptr) {
    rec.dist_u = metrics::subspace_dist(u, gt->u_star);
    rec.dist_v = metrics::subspace_dist(v, gt->v_star);
    double worst = 0.0;
    for (std::size_t i = 0; i < lambdas.size(); ++i)
      worst = std::max(worst, metrics::reconstruction_error(u, lambdas[i], v, gt->targets[i]));
    rec.max_recon = worst;
  }
  return rec;
}

}  // namespace detail

/// Runs the solver. The returned cores are the last ones fit inside the
/// loop (from U_{T-1}, V_{T-1}) unless refit_lambda is set, in which case
/// they are refit against U_T, V_T on the large batches.
inline SolverState run(const Dataset& ds, const SolverConfig& cfg, const GroundTruth* trace_gt = nullptr) {
  const int r = cfg.rank > 0 ? cfg.rank : static_cast<int>(ds.meta.r);
  if (r < 1) throw InvalidArgument("coaltmin::run: rank unknown (set SolverConfig::rank)");
  if (cfg.iterations < 0) throw InvalidArgument("coaltmin::run: negative iteration count");
  const auto k = ds.clients.size();
  if (k == 0) throw InvalidArgument("coaltmin::run: no clients");
  if (!cfg.single_client_fast_path) {
    for (const auto& c : ds.clients)
      if (c.small.size() < static_cast<std::size_t>(cfg.iterations))
        throw InvalidArgument("coaltmin::run: fewer small batches than iterations");
  }
  if (trace_gt != nullptr && trace_gt->targets.size() != k)
    throw ShapeMismatch("coaltmin::run: ground truth client count differs from dataset");

  auto init = init_spectral(ds, r);
  SolverState st;
  st.u = std::move(init.u);
  st.v = std::move(init.v);
  st.lambdas.assign(k, init.lambda);
  const auto batches = large_batches(ds);

  const bool tracing = cfg.record_history || trace_gt != nullptr;
  if (tracing) st.history.push_back(detail::trace(0, st.u, st.v, st.lambdas, total_large_loss(st.u, st.lambdas, st.v, ds), trace_gt));

  for (int t = 0; t < cfg.iterations; ++t) {
    try {
      for (std::size_t i = 0; i < k; ++i) {
        const Batch& b = cfg.single_client_fast_path ? ds.clients[i].large : ds.clients[i].small[t];
        st.lambdas[i] = lambda_step(st.u, st.v, b, cfg.ridge);
      }
      const double loss = tracing ? total_large_loss(st.u, st.lambdas, st.v, ds) : 0.0;
      Matrix v_next = factor_step(Side::row, st.u, st.lambdas, batches, cfg.ridge);
      Matrix u_next = factor_step(Side::column, cfg.sequential_uv ? v_next : st.v, st.lambdas, batches, cfg.ridge);
      st.u = std::move(u_next);
      st.v = std::move(v_next);
      st.t = t + 1;
      if (tracing) st.history.push_back(detail::trace(t + 1, st.u, st.v, st.lambdas, loss, trace_gt));
    } catch (const SingularSystem& e) {
      detail::rethrow_at(e, t);
    } catch (const RankDeficient& e) {
      detail::rethrow_at(e, t);
    } catch (const NonFinite& e) {
      detail::rethrow_at(e, t);
    }
  }

  if (cfg.refit_lambda && cfg.iterations > 0) {
    for (std::size_t i = 0; i < k; ++i) st.lambdas[i] = lambda_step(st.u, st.v, ds.clients[i].large, cfg.ridge);
  }
  return st;
}

}  // namespace colora::coaltmin

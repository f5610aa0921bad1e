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

// Randomized lower bounds on restricted-isometry constants of a measurement
// ensemble.
//
// Each estimator draws `trials` structured test matrices from forked seeds
// (trial t always uses seed.fork(t), so more trials only extend the set)
// and reports the largest normalized deviation it sees, together with the
// maximizing trial index.

#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "colora/numkit.hpp"

namespace colora::ripcheck {

struct IsometryReport {
  std::string estimator;
  double delta_hat = 0.0;
  int trials = 0;
  std::size_t sample_size = 0;
  RngSeed seed{};
  int worst_trial = -1;
  int d = 0;
  int r = 0;
  int k = 1;
  std::size_t n_or_big_n = 0;  // per-client sample count
};

inline constexpr const char* kReportCsvHeader = "estimator,d,r,k,n_or_N,trials,delta_hat,seed";

inline void write_csv_row(std::ostream& os, const IsometryReport& rep) {
  const auto old = os.precision(17);
  os << rep.estimator << ',' << rep.d << ',' << rep.r << ',' << rep.k << ',' << rep.n_or_big_n << ','
     << rep.trials << ',' << rep.delta_hat << ',' << rep.seed.value << '\n';
  os.precision(old);
}

// ---- per-instance quadratic forms --------------------------------------

/// |(1/N) sum_j <G_j, X>^2 - ||X||_F^2| / ||X||_F^2.
inline double rip_deviation(std::span<const Matrix> ensemble, const Matrix& x) {
  if (ensemble.empty()) throw InvalidArgument("rip_deviation: empty ensemble");
  const double norm2 = x.squaredNorm();
  if (norm2 == 0.0) return 0.0;
  double acc = 0.0;
  for (const auto& g : ensemble) {
    const double p = numkit::inner(g, x);
    acc += p * p;
  }
  return std::abs(acc / static_cast<double>(ensemble.size()) - norm2) / norm2;
}

/// |(1/kN) sum_ij <G_ij, U L_i V^T>^2 - (1/k) sum_i ||U L_i V^T||_F^2|
///   / max_i ||U L_i V^T||_F^2.
inline double grip_deviation(std::span<const std::vector<Matrix>> ensemble, const Matrix& u,
                             std::span<const Matrix> lambdas, const Matrix& v) {
  if (ensemble.size() != lambdas.size()) throw ShapeMismatch("grip_deviation: one core per client required");
  double quad = 0.0;
  double pop = 0.0;
  double peak = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    const Matrix x = u * lambdas[i] * v.transpose();
    const double n2 = x.squaredNorm();
    pop += n2;
    peak = std::max(peak, n2);
    for (const auto& g : ensemble[i]) {
      const double p = (u.transpose() * g * v).cwiseProduct(lambdas[i]).sum();
      quad += p * p;
    }
    count += ensemble[i].size();
  }
  if (peak == 0.0) return 0.0;
  if (count == 0) throw InvalidArgument("grip_deviation: empty ensemble");
  const double k = static_cast<double>(ensemble.size());
  return std::abs(quad / static_cast<double>(count) - pop / k) / peak;
}

/// (U,V)-restricted deviation |(1/n) sum_j <G_j, U L V^T>^2 - ||L||_F^2| / ||L||_F^2
/// for orthonormal u, v.
inline double uv_rip_deviation(std::span<const Matrix> ensemble, const Matrix& u, const Matrix& v,
                               const Matrix& lambda) {
  if (ensemble.empty()) throw InvalidArgument("uv_rip_deviation: empty ensemble");
  const double norm2 = lambda.squaredNorm();
  if (norm2 == 0.0) return 0.0;
  double acc = 0.0;
  for (const auto& g : ensemble) {
    const double p = (u.transpose() * g * v).cwiseProduct(lambda).sum();
    acc += p * p;
  }
  return std::abs(acc / static_cast<double>(ensemble.size()) - norm2) / norm2;
}

/// (1/kn) sum_ij <G_ij, X_i>^2 / max_i ||X_i||_F^2.
inline double subisometry_ratio(std::span<const std::vector<Matrix>> ensemble, std::span<const Matrix> xs) {
  if (ensemble.size() != xs.size()) throw ShapeMismatch("subisometry_ratio: one test matrix per client required");
  double acc = 0.0;
  double peak = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    peak = std::max(peak, xs[i].squaredNorm());
    for (const auto& g : ensemble[i]) {
      const double p = numkit::inner(g, xs[i]);
      acc += p * p;
    }
    count += ensemble[i].size();
  }
  if (peak == 0.0 || count == 0) throw InvalidArgument("subisometry_ratio: degenerate input");
  return acc / static_cast<double>(count) / peak;
}

// ---- test-point draws --------------------------------------------------

/// A * B^T with Gaussian d x r factors, scaled to unit Frobenius norm.
inline Matrix draw_low_rank_unit(int d, int r, RngSeed seed) {
  const Matrix a = numkit::rand_gaussian(d, r, seed.fork(0));
  const Matrix b = numkit::rand_gaussian(d, r, seed.fork(1));
  Matrix x = a * b.transpose();
  return x / x.norm();
}

struct GripDraw {
  Matrix u;
  Matrix v;
  std::vector<Matrix> lambdas;
};

/// Stiefel U, V and Gaussian cores scaled so max_i ||Lambda_i||_F = 1.
inline GripDraw draw_grip_point(int d, int r, int k, RngSeed seed) {
  GripDraw p{numkit::rand_orthonormal(d, r, seed.fork(0)), numkit::rand_orthonormal(d, r, seed.fork(1)), {}};
  double peak = 0.0;
  for (int i = 0; i < k; ++i) {
    p.lambdas.push_back(numkit::rand_gaussian(r, r, seed.fork(2 + static_cast<std::uint64_t>(i))));
    peak = std::max(peak, p.lambdas.back().norm());
  }
  for (auto& l : p.lambdas) l /= peak;
  return p;
}

inline Matrix draw_unit_core(int r, RngSeed seed) {
  Matrix l = numkit::rand_gaussian(r, r, seed);
  return l / l.norm();
}

// ---- estimators --------------------------------------------------------

namespace detail {

inline int dim_of(std::span<const Matrix> ens) {
  if (ens.empty()) throw InvalidArgument("ripcheck: empty ensemble");
  if (ens[0].rows() != ens[0].cols()) throw ShapeMismatch("ripcheck: measurements must be square");
  return static_cast<int>(ens[0].rows());
}

inline void check_trials(int trials) {
  if (trials < 1) throw InvalidArgument("ripcheck: trials must be >= 1");
}

inline std::size_t total(std::span<const std::vector<Matrix>> ens) {
  std::size_t n = 0;
  for (const auto& e : ens) n += e.size();
  return n;
}

}  // namespace detail

inline IsometryReport estimate_rip(std::span<const Matrix> ensemble, int r, int trials, RngSeed seed) {
  detail::check_trials(trials);
  const int d = detail::dim_of(ensemble);
  IsometryReport rep{"rip", 0.0, trials, ensemble.size(), seed, -1, d, r, 1, ensemble.size()};
  for (int t = 0; t < trials; ++t) {
    const double dev = rip_deviation(ensemble, draw_low_rank_unit(d, r, seed.fork(static_cast<std::uint64_t>(t))));
    if (dev > rep.delta_hat || rep.worst_trial < 0) {
      rep.delta_hat = dev;
      rep.worst_trial = t;
    }
  }
  return rep;
}

inline IsometryReport estimate_grip(std::span<const std::vector<Matrix>> ensemble, int r, int trials, RngSeed seed) {
  detail::check_trials(trials);
  if (ensemble.empty()) throw InvalidArgument("estimate_grip: no clients");
  const int d = detail::dim_of(ensemble[0]);
  const int k = static_cast<int>(ensemble.size());
  IsometryReport rep{"grip", 0.0, trials, detail::total(ensemble), seed, -1, d, r, k, ensemble[0].size()};
  for (int t = 0; t < trials; ++t) {
    const auto p = draw_grip_point(d, r, k, seed.fork(static_cast<std::uint64_t>(t)));
    const double dev = grip_deviation(ensemble, p.u, p.lambdas, p.v);
    if (dev > rep.delta_hat || rep.worst_trial < 0) {
      rep.delta_hat = dev;
      rep.worst_trial = t;
    }
  }
  return rep;
}

inline IsometryReport estimate_uv_rip(const Matrix& u, const Matrix& v, std::span<const Matrix> ensemble, int trials,
                                      RngSeed seed) {
  detail::check_trials(trials);
  const int d = detail::dim_of(ensemble);
  const int r = static_cast<int>(u.cols());
  IsometryReport rep{"uv_rip", 0.0, trials, ensemble.size(), seed, -1, d, r, 1, ensemble.size()};
  for (int t = 0; t < trials; ++t) {
    const double dev = uv_rip_deviation(ensemble, u, v, draw_unit_core(r, seed.fork(static_cast<std::uint64_t>(t))));
    if (dev > rep.delta_hat || rep.worst_trial < 0) {
      rep.delta_hat = dev;
      rep.worst_trial = t;
    }
  }
  return rep;
}

/// Report whose delta_hat field carries the sub-isometric coefficient A_hat.
inline IsometryReport subisometry_report(std::span<const std::vector<Matrix>> ensemble, int r, int trials,
                                         RngSeed seed) {
  detail::check_trials(trials);
  if (ensemble.empty()) throw InvalidArgument("estimate_subisometry: no clients");
  const int d = detail::dim_of(ensemble[0]);
  const int k = static_cast<int>(ensemble.size());
  IsometryReport rep{"subisometry", 0.0, trials, detail::total(ensemble), seed, -1, d, r, k, ensemble[0].size()};
  std::vector<Matrix> xs(ensemble.size());
  for (int t = 0; t < trials; ++t) {
    const RngSeed ts = seed.fork(static_cast<std::uint64_t>(t));
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = draw_low_rank_unit(d, r, ts.fork(i));
    const double ratio = subisometry_ratio(ensemble, xs);
    if (ratio > rep.delta_hat || rep.worst_trial < 0) {
      rep.delta_hat = ratio;
      rep.worst_trial = t;
    }
  }
  return rep;
}

inline double estimate_subisometry(std::span<const std::vector<Matrix>> ensemble, int r, int trials, RngSeed seed) {
  return subisometry_report(ensemble, r, trials, seed).delta_hat;
}

/// n i.i.d. standard Gaussian d x d matrices from one seeded stream.
inline std::vector<Matrix> gaussian_ensemble(int d, std::size_t n, RngSeed seed) {
  std::vector<Matrix> out;
  out.reserve(n);
  for (std::size_t j = 0; j < n; ++j) out.push_back(numkit::rand_gaussian(d, d, seed.fork(j)));
  return out;
}

inline std::vector<std::vector<Matrix>> gaussian_ensembles(int d, int k, std::size_t n, RngSeed seed) {
  std::vector<std::vector<Matrix>> out;
  for (int i = 0; i < k; ++i) out.push_back(gaussian_ensemble(d, n, seed.fork(static_cast<std::uint64_t>(i))));
  return out;
}

}  // namespace colora::ripcheck

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

// Dense linear-algebra primitives shared by every other module.
//
// All routines are pure functions of their inputs. Factor signs are fixed
// (nonnegative R diagonal, positive largest-magnitude entry per singular
// vector) so results are reproducible byte for byte.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "colora/errors.hpp"

namespace colora {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Seed for a deterministic random stream. Forking derives an independent
/// child seed, so per-client or per-trial streams never overlap.
struct RngSeed {
  std::uint64_t value = 0;

  [[nodiscard]] RngSeed fork(std::uint64_t stream) const {
    return RngSeed{mix(value ^ mix(stream + 0x9E3779B97F4A7C15ULL))};
  }
  [[nodiscard]] std::mt19937_64 engine() const { return std::mt19937_64(value); }

  friend bool operator==(const RngSeed&, const RngSeed&) = default;

 private:
  // splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
};

namespace numkit {

inline std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NonFinite(std::string(what) + ": non-finite entry");
}

struct QrResult {
  Matrix q;         // d x r, orthonormal columns
  Matrix r_factor;  // r x r, upper triangular, nonnegative diagonal
};

/// Thin Householder QR with a nonnegative R diagonal.
/// Throws RankDeficient when sigma_min(m) < 1e-12 * sigma_max(m).
inline QrResult qr_thin(const Matrix& m) {
  const auto d = m.rows();
  const auto r = m.cols();
  if (r == 0 || d < r) throw ShapeMismatch("qr_thin: need rows >= cols >= 1, got " + shape_str(m));
  require_finite(m, "qr_thin");

  Eigen::HouseholderQR<Matrix> qr(m);
  Matrix q = qr.householderQ() * Matrix::Identity(d, r);
  Matrix rf = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();

  const Vector sv = Eigen::JacobiSVD<Matrix>(rf).singularValues();
  const double smax = sv(0);
  const double smin = sv(r - 1);
  if (!(smax > 0.0) || smin < 1e-12 * smax) {
    std::ostringstream os;
    os << "qr_thin: rank deficient input (sigma_min=" << smin << ", sigma_max=" << smax << ")";
    throw RankDeficient(os.str());
  }
  for (Eigen::Index j = 0; j < r; ++j) {
    if (rf(j, j) < 0.0) {
      rf.row(j) *= -1.0;
      q.col(j) *= -1.0;
    }
  }
  return {std::move(q), std::move(rf)};
}

struct SvdResult {
  Matrix u;      // d1 x r
  Vector sigma;  // r, descending, nonnegative
  Matrix v;      // d2 x r
};

/// Rank-r truncated SVD. Each u column is signed so its largest-magnitude
/// entry (first on ties) is positive; v follows.
inline SvdResult svd_truncated(const Matrix& m, Eigen::Index rank) {
  if (rank < 1 || rank > std::min(m.rows(), m.cols()))
    throw InvalidArgument("svd_truncated: rank out of range for " + shape_str(m));
  require_finite(m, "svd_truncated");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(m), Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdResult out{svd.matrixU().leftCols(rank), svd.singularValues().head(rank),
                svd.matrixV().leftCols(rank)};
  for (Eigen::Index j = 0; j < rank; ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < out.u.rows(); ++i)
      if (std::abs(out.u(i, j)) > std::abs(out.u(best, j))) best = i;
    if (out.u(best, j) < 0.0) {
      out.u.col(j) *= -1.0;
      out.v.col(j) *= -1.0;
    }
  }
  return out;
}

/// All singular values, descending.
inline Vector singular_values(const Matrix& m) {
  require_finite(m, "singular_values");
  return Eigen::BDCSVD<Eigen::MatrixXd>(Eigen::MatrixXd(m)).singularValues();
}

/// Solves (gram + ridge*I) x = rhs for symmetric PSD gram.
/// With ridge == 0 a condition number above 1e12 raises SingularSystem.
inline Vector solve_ridge(const Matrix& gram, const Vector& rhs, double ridge) {
  const auto m = gram.rows();
  if (gram.cols() != m || rhs.size() != m)
    throw ShapeMismatch("solve_ridge: gram " + shape_str(gram) + " vs rhs " + std::to_string(rhs.size()));
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw InvalidArgument("solve_ridge: ridge must be finite and >= 0");
  require_finite(gram, "solve_ridge");
  if (!rhs.allFinite()) throw NonFinite("solve_ridge: non-finite rhs");

  const double scale = std::max(1.0, gram.cwiseAbs().maxCoeff());
  if ((gram - gram.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw InvalidArgument("solve_ridge: gram is not symmetric");

  Matrix system = gram;
  system.diagonal().array() += ridge;

  if (ridge == 0.0) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(system, Eigen::EigenvaluesOnly);
    const double lmin = eig.eigenvalues()(0);
    const double lmax = eig.eigenvalues()(m - 1);
    if (!(lmax > 0.0) || !(lmin > 0.0) || lmax / lmin > 1e12) {
      std::ostringstream os;
      os << "solve_ridge: singular system (lambda_min=" << lmin << ", lambda_max=" << lmax << ")";
      throw SingularSystem(os.str());
    }
  }
  Eigen::LDLT<Matrix> ldlt(system);
  if (ldlt.info() != Eigen::Success) throw SingularSystem("solve_ridge: factorization failed");
  Vector x = ldlt.solve(rhs);
  // one step of iterative refinement
  const Vector res = rhs - system * x;
  x += ldlt.solve(res);
  if (!x.allFinite()) throw SingularSystem("solve_ridge: non-finite solution");
  return x;
}

/// Ridge used when a ridge-free normal-equation solve is singular.
inline double fallback_ridge(const Matrix& gram) {
  const double tr = gram.trace();
  const double r = 1e-10 * tr / static_cast<double>(gram.rows());
  return r > 0.0 ? r : 1e-300;
}

/// solve_ridge, retrying once with fallback_ridge(gram) on SingularSystem.
inline Vector solve_ridge_or_fallback(const Matrix& gram, const Vector& rhs, double ridge,
                                      const std::string& context) {
  try {
    return solve_ridge(gram, rhs, ridge);
  } catch (const SingularSystem& e) {
    if (ridge != 0.0) throw;
    const double fb = fallback_ridge(gram);
    std::ostringstream os;
    os << context << ": " << e.what() << "; retrying with ridge " << fb;
    warn(os.str());
    return solve_ridge(gram, rhs, fb);
  }
}

inline Matrix rand_gaussian(Eigen::Index rows, Eigen::Index cols, RngSeed seed) {
  auto eng = seed.engine();
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  double* p = out.data();
  for (Eigen::Index i = 0; i < rows * cols; ++i) p[i] = normal(eng);
  return out;
}

inline Matrix rand_orthonormal(Eigen::Index d, Eigen::Index r, RngSeed seed) {
  if (d < r) throw InvalidArgument("rand_orthonormal: need d >= r");
  return qr_thin(rand_gaussian(d, r, seed)).q;
}

/// Frobenius inner product <a, b> = sum_ab a_ab b_ab, row-major order.
inline double inner(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeMismatch("inner: " + shape_str(a) + " vs " + shape_str(b));
  const double* pa = a.data();
  const double* pb = b.data();
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) s += pa[i] * pb[i];
  return s;
}

/// Largest singular value by power iteration on m^T m, all-ones start,
/// at most 1000 iterations, stopping at 1e-10 relative change.
inline double spectral_norm(const Matrix& m) {
  require_finite(m, "spectral_norm");
  if (m.size() == 0) return 0.0;
  Vector x = Vector::Ones(m.cols()).normalized();
  double est = 0.0;
  for (int it = 0; it < 1000; ++it) {
    const Vector y = m * x;
    const Vector z = m.transpose() * y;
    const double zn = z.norm();
    if (zn == 0.0) return 0.0;  // start vector in the null space
    const double next = std::sqrt(y.squaredNorm());
    x = z / zn;
    if (it > 0 && std::abs(next - est) <= 1e-10 * next) {
      est = next;
      break;
    }
    est = next;
  }
  return (m * x).norm();
}

/// Row-major flattening of an r x c matrix.
inline Vector vec(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

inline Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) throw ShapeMismatch("unvec: length mismatch");
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

}  // namespace numkit
}  // namespace colora

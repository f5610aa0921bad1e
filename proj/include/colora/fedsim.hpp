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

// Round-based simulation of federated low-rank adapter training on the
// linear sensing model.
//
// Each client i predicts y = <G, B * Lambda_i * A> (no pretrained offset).
// Rounds alternate by parity: even rounds train (B, Lambda_i) with A frozen,
// odd rounds train (A, Lambda_i) with B frozen. After local training the
// trained shared factor is averaged across clients (colora_alt,
// rolora_linear) or kept private (local_only). The network is an in-memory
// synchronous bus; aggregation is a barrier reduced in client order.

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "colora/numkit.hpp"
#include "colora/taskgen.hpp"

namespace colora::fedsim {

using taskgen::Batch;

struct AdapterTriple {
  Matrix b;       // d x r
  Matrix a;       // r x d
  Matrix lambda;  // r x r

  [[nodiscard]] Matrix composite() const { return b * lambda * a; }
  friend bool operator==(const AdapterTriple& x, const AdapterTriple& y) {
    return x.b == y.b && x.a == y.a && x.lambda == y.lambda;
  }
};

enum class Frozen { a, b };
enum class Protocol { colora_alt, local_only, rolora_linear };
enum class Parity { b_round, a_round };

inline const char* to_string(Protocol p) {
  switch (p) {
    case Protocol::colora_alt: return "colora_alt";
    case Protocol::local_only: return "local_only";
    case Protocol::rolora_linear: return "rolora_linear";
  }
  return "?";
}

inline Protocol protocol_from_string(const std::string& s) {
  if (s == "colora_alt") return Protocol::colora_alt;
  if (s == "local_only") return Protocol::local_only;
  if (s == "rolora_linear") return Protocol::rolora_linear;
  throw InvalidArgument("unknown protocol '" + s + "'");
}

inline const char* to_string(Parity p) { return p == Parity::b_round ? "B" : "A"; }

struct FedConfig {
  int rounds = 40;
  int local_steps = 10;
  double learning_rate = 0.05;
  Protocol protocol = Protocol::colora_alt;
  double init_scale = 1.0;
  RngSeed seed{};
  // run local training one gradient step at a time, round-robin across
  // clients; must not change any result
  bool interleave_clients = false;
};

struct RoundRecord {
  int round = 0;
  Parity parity = Parity::b_round;
  std::vector<double> train_mse;
  std::vector<double> holdout_mse;
  std::uint64_t bytes_communicated = 0;
};

struct FedResult {
  std::vector<RoundRecord> records;
  std::vector<AdapterTriple> adapters;
};

/// Mean squared error of a batch under the triple's composite.
inline double mse(const AdapterTriple& t, const Batch& batch) {
  if (batch.size() == 0) return 0.0;
  const Matrix w = t.composite();
  double acc = 0.0;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const double res = numkit::inner(batch.g[j], w) - batch.y[j];
    acc += res * res;
  }
  return acc / static_cast<double>(batch.size());
}

struct Gradients {
  Matrix b;
  Matrix a;
  Matrix lambda;
};

/// Analytic gradients of the batch MSE. With R = (2/n) sum_j (pred_j - y_j) G_j:
///   dB = R A^T Lambda^T,  dLambda = B^T R A^T,  dA = Lambda^T B^T R.
inline Gradients gradients(const AdapterTriple& t, const Batch& batch) {
  const auto d = t.b.rows();
  const Matrix w = t.composite();
  Matrix resid_sum = Matrix::Zero(d, t.a.cols());
  for (std::size_t j = 0; j < batch.size(); ++j)
    resid_sum += (numkit::inner(batch.g[j], w) - batch.y[j]) * batch.g[j];
  const Matrix rg = resid_sum * (2.0 / static_cast<double>(batch.size()));
  return {rg * t.a.transpose() * t.lambda.transpose(), t.lambda.transpose() * t.b.transpose() * rg,
          t.b.transpose() * rg * t.a.transpose()};
}

/// Full-batch gradient descent on (B, Lambda) with A frozen or (A, Lambda)
/// with B frozen. train_core = false keeps Lambda fixed as well.
inline AdapterTriple local_train(const Batch& data, AdapterTriple triple, Frozen frozen, int steps, double lr,
                                 bool train_core = true) {
  if (steps < 1) throw InvalidArgument("local_train: steps must be >= 1");
  if (data.size() == 0) throw InvalidArgument("local_train: empty client data");
  if (lr == 0.0) return triple;
  for (int s = 0; s < steps; ++s) {
    const Gradients g = gradients(triple, data);
    if (frozen == Frozen::a)
      triple.b -= lr * g.b;
    else
      triple.a -= lr * g.a;
    if (train_core) triple.lambda -= lr * g.lambda;
    if (!triple.b.allFinite() || !triple.a.allFinite() || !triple.lambda.allFinite())
      throw Diverged("local_train: non-finite iterate at step " + std::to_string(s));
  }
  const double loss = mse(triple, data);
  if (!std::isfinite(loss)) throw Diverged("local_train: non-finite loss");
  return triple;
}

/// Entrywise mean, summed in ascending client order.
inline Matrix aggregate(std::span<const Matrix> payloads) {
  if (payloads.empty()) throw InvalidArgument("aggregate: no payloads");
  Matrix acc = Matrix::Zero(payloads[0].rows(), payloads[0].cols());
  for (const auto& p : payloads) {
    if (p.rows() != acc.rows() || p.cols() != acc.cols())
      throw ShapeMismatch("aggregate: payload " + numkit::shape_str(p) + " vs " + numkit::shape_str(acc));
    acc += p;
  }
  return acc / static_cast<double>(payloads.size());
}

/// Scalars each client keeps private across rounds.
inline std::size_t personalized_scalars(Protocol p, int d, int r) {
  switch (p) {
    case Protocol::colora_alt: return static_cast<std::size_t>(r) * r;
    case Protocol::local_only: return 2 * static_cast<std::size_t>(d) * r;
    case Protocol::rolora_linear: return 0;
  }
  return 0;
}

/// Shared initialization: B, A Gaussian scaled by init_scale / sqrt(d), Lambda = I.
inline AdapterTriple initial_adapter(int d, int r, double init_scale, RngSeed seed) {
  const double s = init_scale / std::sqrt(static_cast<double>(d));
  return {numkit::rand_gaussian(d, r, seed.fork(0)) * s, numkit::rand_gaussian(r, d, seed.fork(1)) * s,
          Matrix::Identity(r, r)};
}

/// Runs the protocol on each client's large batch; holdout large batches
/// are only evaluated.
inline FedResult run_protocol(const taskgen::Dataset& ds, const taskgen::Dataset& holdout, const FedConfig& cfg) {
  const auto k = ds.clients.size();
  if (k == 0) throw InvalidArgument("run_protocol: no clients");
  if (holdout.clients.size() != k) throw ShapeMismatch("run_protocol: holdout client count differs");
  if (cfg.rounds < 0 || cfg.local_steps < 1 || !(cfg.learning_rate > 0.0))
    throw InvalidArgument("run_protocol: need rounds >= 0, local_steps >= 1, learning_rate > 0");
  const int d = static_cast<int>(ds.meta.d);
  const int r = static_cast<int>(ds.meta.r);
  if (d < 1 || r < 1) throw InvalidArgument("run_protocol: dataset meta lacks d or r");

  FedResult res;
  res.adapters.assign(k, initial_adapter(d, r, cfg.init_scale, cfg.seed));
  const bool aggregates = cfg.protocol != Protocol::local_only;
  const bool train_core = cfg.protocol == Protocol::colora_alt;

  for (int round = 0; round < cfg.rounds; ++round) {
    const Parity parity = round % 2 == 0 ? Parity::b_round : Parity::a_round;
    const Frozen frozen = parity == Parity::b_round ? Frozen::a : Frozen::b;
    try {
      if (cfg.interleave_clients) {
        for (int s = 0; s < cfg.local_steps; ++s)
          for (std::size_t i = 0; i < k; ++i)
            res.adapters[i] = local_train(ds.clients[i].large, res.adapters[i], frozen, 1, cfg.learning_rate, train_core);
      } else {
        for (std::size_t i = 0; i < k; ++i)
          res.adapters[i] =
              local_train(ds.clients[i].large, res.adapters[i], frozen, cfg.local_steps, cfg.learning_rate, train_core);
      }
    } catch (const Diverged& e) {
      throw Diverged("round " + std::to_string(round) + ": " + e.what());
    }

    RoundRecord rec;
    rec.round = round;
    rec.parity = parity;
    if (aggregates) {
      std::vector<Matrix> payloads;
      payloads.reserve(k);
      for (const auto& t : res.adapters) payloads.push_back(parity == Parity::b_round ? t.b : t.a);
      const Matrix mean = aggregate(payloads);
      for (auto& t : res.adapters) (parity == Parity::b_round ? t.b : t.a) = mean;
      rec.bytes_communicated = static_cast<std::uint64_t>(k) * d * r * sizeof(double);
    }
    for (std::size_t i = 0; i < k; ++i) {
      rec.train_mse.push_back(mse(res.adapters[i], ds.clients[i].large));
      rec.holdout_mse.push_back(mse(res.adapters[i], holdout.clients[i].large));
    }
    res.records.push_back(std::move(rec));
  }
  return res;
}

inline double mean_final_holdout(const FedResult& r) {
  if (r.records.empty()) return std::nan("");
  const auto& h = r.records.back().holdout_mse;
  double s = 0.0;
  for (double x : h) s += x;
  return s / static_cast<double>(h.size());
}

inline constexpr const char* kRoundCsvHeader = "round,parity,client,train_mse,holdout_mse,bytes";

inline void write_round_csv(std::ostream& os, std::span<const RoundRecord> records, bool header = true) {
  const auto old = os.precision(17);
  if (header) os << kRoundCsvHeader << '\n';
  for (const auto& rec : records)
    for (std::size_t i = 0; i < rec.train_mse.size(); ++i)
      os << rec.round << ',' << to_string(rec.parity) << ',' << i << ',' << rec.train_mse[i] << ','
         << rec.holdout_mse[i] << ',' << rec.bytes_communicated << '\n';
  os.precision(old);
}

}  // namespace colora::fedsim

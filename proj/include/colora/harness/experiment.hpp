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

// Grid experiment runner.
//
// A spec's axes expand into cells (cross product in key order, seeds
// innermost). Cells run on a worker pool; each writes its own CSV under
// <output_dir>/cells/ with an atomic rename, and the scenario CSV is
// assembled afterwards in cell order, so output bytes never depend on the
// pool size. Wall-clock times go only to manifest.json.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "colora/coaltmin.hpp"
#include "colora/fedsim.hpp"
#include "colora/harness/config.hpp"
#include "colora/harness/csv.hpp"
#include "colora/harness/svg.hpp"
#include "colora/metrics.hpp"
#include "colora/ripcheck.hpp"
#include "colora/taskgen.hpp"
#include "colora/version.hpp"

namespace colora::harness {

using Params = std::map<std::string, std::string>;

struct Cell {
  int index = 0;
  Params params;
};

struct CellStatus {
  int index = 0;
  Params params;
  bool ok = false;
  std::string error;
  double wall_seconds = 0.0;
  std::size_t rows = 0;
};

struct ExperimentSummary {
  std::vector<std::string> artifacts;
  std::vector<CellStatus> cells;

  [[nodiscard]] bool all_ok() const {
    for (const auto& c : cells)
      if (!c.ok) return false;
    return true;
  }
};

inline std::vector<std::string> csv_columns(Scenario s) {
  switch (s) {
    case Scenario::convergence:
      return {"cell", "seed", "d", "r", "k", "beta", "N", "n", "T", "t", "dist_u", "dist_v", "max_recon", "loss"};
    case Scenario::similarity_sweep:
      return {"cell", "seed", "d", "r", "k", "beta", "xi_realized", "N", "n", "T",
              "final_dist_u", "final_dist_v", "final_max_recon"};
    case Scenario::sample_sweep:
      return {"cell", "seed", "d", "r", "k", "beta", "N", "kN", "n", "T", "final_dist_u", "final_dist_v"};
    case Scenario::init_quality:
      return {"cell", "seed", "d", "r", "k", "beta", "N", "kN", "init_dist_u", "init_dist_v"};
    case Scenario::grip_sweep:
      return {"cell", "seed", "d", "r", "k", "N", "kN", "trials", "delta_hat"};
    case Scenario::fed_compare:
      return {"cell", "seed", "d", "r", "k", "beta", "protocol", "round", "parity",
              "client", "train_mse", "holdout_mse", "bytes"};
  }
  return {};
}

inline std::string provenance_comment(Scenario s) {
  return std::string("colora ") + kVersion + " scenario=" + to_string(s) +
         " units: distances, errors and delta_hat dimensionless; mse and loss in squared label units; bytes in bytes";
}

/// Cross product of all non-seed axes in key order, seeds innermost.
inline std::vector<Cell> enumerate_cells(const ExperimentSpec& spec) {
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const auto& [k, v] : spec.grid)
    if (k != "seed") axes.emplace_back(k, v);
  axes.emplace_back("seed", spec.grid.at("seed"));

  std::vector<Cell> cells;
  std::vector<std::size_t> idx(axes.size(), 0);
  while (true) {
    Cell c;
    c.index = static_cast<int>(cells.size());
    for (std::size_t a = 0; a < axes.size(); ++a) c.params[axes[a].first] = axes[a].second[idx[a]];
    cells.push_back(std::move(c));
    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++idx[a] < axes[a].second.size()) break;
      idx[a] = 0;
      if (a == 0) return cells;
    }
    if (axes.empty()) return cells;
  }
}

namespace detail {

inline double num(const Params& p, const std::string& key) { return std::stod(p.at(key)); }
inline double num(const Params& p, const std::string& key, double fallback) {
  const auto it = p.find(key);
  return it == p.end() ? fallback : std::stod(it->second);
}
inline int integer(const Params& p, const std::string& key) { return static_cast<int>(std::stoll(p.at(key))); }
inline std::uint64_t seed_of(const Params& p) { return std::stoull(p.at("seed")); }
inline bool flag(const Params& p, const std::string& key) {
  const auto it = p.find(key);
  return it != p.end() && (it->second == "true" || it->second == "1");
}

inline taskgen::TaskGenConfig task_config(const Params& p) {
  taskgen::TaskGenConfig cfg;
  cfg.d = integer(p, "d");
  cfg.r = integer(p, "r");
  cfg.k = integer(p, "k");
  if (p.count("beta")) cfg.beta = num(p, "beta");
  if (p.count("xi")) cfg.xi = num(p, "xi");
  cfg.kappa_target = num(p, "kappa", 2.0);
  cfg.sigma_min = num(p, "sigma_min", 1.0);
  cfg.seed = RngSeed{seed_of(p)};
  return cfg;
}

enum : std::uint64_t { kDataStream = 0xDA7A, kHoldoutStream = 0x401D, kFedStream = 0xFED, kGripData = 0x6E1,
                       kGripTrials = 0x7E57 };

using Rows = std::vector<std::vector<std::string>>;

inline Rows run_coaltmin_cell(Scenario sc, const Cell& cell) {
  const Params& p = cell.params;
  const auto tc = task_config(p);
  const double beta = tc.resolved_beta();
  const auto gt = taskgen::make_ground_truth(tc);
  const int big_n = integer(p, "N");
  const int small_n = integer(p, "n");
  const int iters = integer(p, "T");
  const auto ds = taskgen::sample_dataset(gt, big_n, small_n, iters, RngSeed{seed_of(p)}.fork(kDataStream));
  coaltmin::SolverConfig cfg;
  cfg.iterations = iters;
  cfg.rank = tc.r;
  cfg.sequential_uv = flag(p, "sequential_uv");
  cfg.ridge = num(p, "ridge", 0.0);
  cfg.single_client_fast_path = false;
  const auto st = coaltmin::run(ds, cfg, &gt);

  const std::vector<std::string> head{fmt(cell.index), p.at("seed"), fmt(tc.d), fmt(tc.r), fmt(tc.k), fmt(beta)};
  Rows rows;
  if (sc == Scenario::convergence) {
    for (const auto& h : st.history) {
      auto row = head;
      for (const auto& v : {fmt(big_n), fmt(small_n), fmt(iters), fmt(h.t), fmt(*h.dist_u), fmt(*h.dist_v),
                            fmt(*h.max_recon), fmt(h.loss)})
        row.push_back(v);
      rows.push_back(std::move(row));
    }
    return rows;
  }
  const auto& last = st.history.back();
  auto row = head;
  if (sc == Scenario::similarity_sweep) {
    const double xi = tc.k >= 2 ? metrics::task_similarity_xi(gt.targets, tc.r) : 1.0;
    for (const auto& v : {fmt(xi), fmt(big_n), fmt(small_n), fmt(iters), fmt(*last.dist_u), fmt(*last.dist_v),
                          fmt(*last.max_recon)})
      row.push_back(v);
  } else {
    for (const auto& v : {fmt(big_n), fmt(static_cast<long long>(tc.k) * big_n), fmt(small_n), fmt(iters),
                          fmt(*last.dist_u), fmt(*last.dist_v)})
      row.push_back(v);
  }
  rows.push_back(std::move(row));
  return rows;
}

inline Rows run_init_cell(const Cell& cell) {
  const Params& p = cell.params;
  const auto tc = task_config(p);
  const double beta = tc.resolved_beta();
  const auto gt = taskgen::make_ground_truth(tc);
  const int big_n = integer(p, "N");
  const auto ds = taskgen::sample_dataset(gt, big_n, 1, 1, RngSeed{seed_of(p)}.fork(kDataStream));
  const auto init = coaltmin::init_spectral(ds, tc.r);
  return {{fmt(cell.index), p.at("seed"), fmt(tc.d), fmt(tc.r), fmt(tc.k), fmt(beta), fmt(big_n),
           fmt(static_cast<long long>(tc.k) * big_n), fmt(metrics::subspace_dist(init.u, gt.u_star)),
           fmt(metrics::subspace_dist(init.v, gt.v_star))}};
}

inline Rows run_grip_cell(const Cell& cell) {
  const Params& p = cell.params;
  const int d = integer(p, "d");
  const int r = integer(p, "r");
  const int k = integer(p, "k");
  const int big_n = integer(p, "N");
  const int trials = integer(p, "trials");
  const RngSeed seed{seed_of(p)};
  const auto ens = ripcheck::gaussian_ensembles(d, k, static_cast<std::size_t>(big_n), seed.fork(kGripData));
  const auto rep = ripcheck::estimate_grip(ens, r, trials, seed.fork(kGripTrials));
  return {{fmt(cell.index), p.at("seed"), fmt(d), fmt(r), fmt(k), fmt(big_n), fmt(static_cast<long long>(k) * big_n),
           fmt(trials), fmt(rep.delta_hat)}};
}

inline Rows run_fed_cell(const Cell& cell) {
  const Params& p = cell.params;
  const auto tc = task_config(p);
  const double beta = tc.resolved_beta();
  const auto gt = taskgen::make_ground_truth(tc);
  const RngSeed seed{seed_of(p)};
  const auto train = taskgen::sample_dataset(gt, integer(p, "N"), 1, 1, seed.fork(kDataStream));
  const auto hold = taskgen::sample_dataset(gt, integer(p, "holdout"), 1, 1, seed.fork(kHoldoutStream));
  fedsim::FedConfig fc;
  fc.rounds = integer(p, "rounds");
  fc.local_steps = integer(p, "local_steps");
  fc.learning_rate = num(p, "lr");
  fc.protocol = fedsim::protocol_from_string(p.at("protocol"));
  fc.init_scale = num(p, "init_scale", 1.0);
  fc.seed = seed.fork(kFedStream);
  const auto res = fedsim::run_protocol(train, hold, fc);
  Rows rows;
  for (const auto& rec : res.records)
    for (std::size_t i = 0; i < rec.train_mse.size(); ++i)
      rows.push_back({fmt(cell.index), p.at("seed"), fmt(tc.d), fmt(tc.r), fmt(tc.k), fmt(beta), p.at("protocol"),
                      fmt(rec.round), fedsim::to_string(rec.parity), fmt(static_cast<long long>(i)),
                      fmt(rec.train_mse[i]), fmt(rec.holdout_mse[i]), fmt(static_cast<unsigned long long>(rec.bytes_communicated))});
  return rows;
}

inline Rows run_cell(Scenario sc, const Cell& cell) {
  switch (sc) {
    case Scenario::convergence:
    case Scenario::similarity_sweep:
    case Scenario::sample_sweep: return run_coaltmin_cell(sc, cell);
    case Scenario::init_quality: return run_init_cell(cell);
    case Scenario::grip_sweep: return run_grip_cell(cell);
    case Scenario::fed_compare: return run_fed_cell(cell);
  }
  return {};
}

inline std::string cell_file_name(Scenario sc, int index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_cell%04d.csv", to_string(sc), index);
  return buf;
}

}  // namespace detail

/// Worker-pool size from COLORA_WORKERS, defaulting to the logical core count.
inline unsigned workers_from_env() {
  if (const char* env = std::getenv("COLORA_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

/// Runs every cell of a validated spec. A failing cell is recorded in the
/// summary and manifest; other cells and the assembled CSV are unaffected.
inline ExperimentSummary run_experiment(const ExperimentSpec& spec, unsigned workers = workers_from_env()) {
  namespace fs = std::filesystem;
  validate(spec);
  const fs::path out(spec.output_dir);
  fs::create_directories(out / "cells");

  const auto cells = enumerate_cells(spec);
  const auto columns = csv_columns(spec.scenario);
  std::vector<detail::Rows> results(cells.size());
  ExperimentSummary summary;
  summary.cells.resize(cells.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      auto& status = summary.cells[i];
      status.index = cells[i].index;
      status.params = cells[i].params;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        results[i] = detail::run_cell(spec.scenario, cells[i]);
        CsvTable t{{provenance_comment(spec.scenario)}, columns, results[i]};
        write_file_atomic(out / "cells" / detail::cell_file_name(spec.scenario, cells[i].index), to_csv_string(t));
        status.ok = true;
        status.rows = results[i].size();
      } catch (const std::exception& e) {
        results[i].clear();
        status.ok = false;
        status.error = e.what();
      }
      status.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(cells.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n_threads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  CsvTable combined{{provenance_comment(spec.scenario)}, columns, {}};
  for (const auto& rows : results) combined.rows.insert(combined.rows.end(), rows.begin(), rows.end());
  const fs::path csv_path = out / (std::string(to_string(spec.scenario)) + ".csv");
  write_file_atomic(csv_path, to_csv_string(combined));
  require_columns(read_csv(csv_path.string()), columns);
  summary.artifacts.push_back(csv_path.string());

  if (spec.plot) {
    for (auto& svg : render_plots(csv_path.string(), spec.scenario)) summary.artifacts.push_back(svg);
  }

  nlohmann::json manifest;
  manifest["scenario"] = to_string(spec.scenario);
  manifest["version"] = git_describe();
  manifest["library_version"] = kVersion;
  manifest["workers"] = n_threads;
  manifest["spec"] = {{"output_dir", spec.output_dir}, {"plot", spec.plot}, {"grid", spec.grid}};
  manifest["cells"] = nlohmann::json::array();
  for (const auto& c : summary.cells)
    manifest["cells"].push_back({{"index", c.index}, {"params", c.params}, {"ok", c.ok}, {"error", c.error},
                                 {"rows", c.rows}, {"wall_seconds", c.wall_seconds}});
  manifest["artifacts"] = summary.artifacts;
  const fs::path manifest_path = out / "manifest.json";
  write_file_atomic(manifest_path, manifest.dump(2) + "\n");
  summary.artifacts.push_back(manifest_path.string());
  return summary;
}

}  // namespace colora::harness

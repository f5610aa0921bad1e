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

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>

#include "colora/coaltmin.hpp"
#include "colora/dataset_io.hpp"
#include "colora/harness/experiment.hpp"
#include "colora/ripcheck.hpp"
#include "colora/state_io.hpp"
#include "colora/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitValidation = 2;
constexpr int kExitPartial = 3;

int cmd_run(const std::string& spec_path) {
  using namespace colora::harness;
  ExperimentSpec spec;
  try {
    spec = load_spec(spec_path);
  } catch (const colora::ValidationError& e) {
    std::cerr << "spec validation failed: " << e.what() << '\n';
    return kExitValidation;
  }
  const auto summary = run_experiment(spec);
  for (const auto& a : summary.artifacts) std::cout << a << '\n';
  if (summary.all_ok()) return kExitOk;

  std::cerr << "failed cells:\n" << std::left << std::setw(8) << "cell" << "error\n";
  for (const auto& c : summary.cells)
    if (!c.ok) std::cerr << std::setw(8) << c.index << c.error << '\n';
  return kExitPartial;
}

int cmd_plot(const std::string& csv, const std::string& scenario) {
  using namespace colora::harness;
  for (const auto& p : render_plots(csv, scenario_from_string(scenario))) std::cout << p << '\n';
  return kExitOk;
}

struct RipArgs {
  std::string estimator = "rip";
  int d = 8;
  int r = 2;
  int k = 1;
  int n = 1024;
  int trials = 256;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_ripcheck(const RipArgs& a) {
  using namespace colora;
  const RngSeed data_seed = RngSeed{a.seed}.fork(0xDA7A);
  const RngSeed trial_seed = RngSeed{a.seed}.fork(0x7E57);
  ripcheck::IsometryReport rep;
  if (a.estimator == "rip") {
    rep = ripcheck::estimate_rip(ripcheck::gaussian_ensemble(a.d, a.n, data_seed), a.r, a.trials, trial_seed);
  } else if (a.estimator == "grip") {
    rep = ripcheck::estimate_grip(ripcheck::gaussian_ensembles(a.d, a.k, a.n, data_seed), a.r, a.trials, trial_seed);
  } else if (a.estimator == "uv_rip") {
    const Matrix u = numkit::rand_orthonormal(a.d, a.r, RngSeed{a.seed}.fork(1));
    const Matrix v = numkit::rand_orthonormal(a.d, a.r, RngSeed{a.seed}.fork(2));
    rep = ripcheck::estimate_uv_rip(u, v, ripcheck::gaussian_ensemble(a.d, a.n, data_seed), a.trials, trial_seed);
  } else if (a.estimator == "subisometry") {
    rep = ripcheck::subisometry_report(ripcheck::gaussian_ensembles(a.d, a.k, a.n, data_seed), a.r, a.trials,
                                       trial_seed);
  } else {
    std::cerr << "unknown estimator '" << a.estimator << "'\n";
    return kExitValidation;
  }
  rep.seed.value = a.seed;
  if (!a.out.empty()) {
    const bool fresh = !std::filesystem::exists(a.out);
    std::ofstream os(a.out, std::ios::app);
    if (fresh) os << ripcheck::kReportCsvHeader << '\n';
    ripcheck::write_csv_row(os, rep);
  }
  std::cout << ripcheck::kReportCsvHeader << '\n';
  ripcheck::write_csv_row(std::cout, rep);
  return kExitOk;
}

struct GenArgs {
  int d = 20, r = 3, k = 8, big_n = 200, small_n = 60, small_t = 12;
  double beta = -1.0, xi = -1.0, kappa = 2.0, sigma_min = 1.0;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_generate(const GenArgs& a) {
  using namespace colora;
  taskgen::TaskGenConfig cfg;
  cfg.d = a.d;
  cfg.r = a.r;
  cfg.k = a.k;
  if (a.beta >= 0.0) cfg.beta = a.beta;
  if (a.xi >= 0.0) cfg.xi = a.xi;
  if (!cfg.beta && !cfg.xi) cfg.beta = 0.0;
  cfg.kappa_target = a.kappa;
  cfg.sigma_min = a.sigma_min;
  cfg.seed = RngSeed{a.seed};
  const auto gt = taskgen::make_ground_truth(cfg);
  const auto ds = taskgen::sample_dataset(gt, a.big_n, a.small_n, a.small_t, RngSeed{a.seed}.fork(0xDA7A));
  taskgen::save_dataset(a.out, ds);
  std::cout << a.out << '\n';
  return kExitOk;
}

struct SolveArgs {
  std::string data;
  std::string out;
  int iterations = 12;
  int rank = 0;
  bool sequential_uv = false;
  bool fast_path = false;
  bool refit = false;
};

int cmd_solve(const SolveArgs& a) {
  using namespace colora;
  const auto ds = taskgen::load_dataset(a.data);
  coaltmin::SolverConfig cfg;
  cfg.iterations = a.iterations;
  cfg.rank = a.rank;
  cfg.sequential_uv = a.sequential_uv;
  cfg.single_client_fast_path = a.fast_path;
  cfg.refit_lambda = a.refit;
  cfg.record_history = true;
  const auto st = coaltmin::run(ds, cfg);
  const std::string text = coaltmin::to_json(st).dump(2);
  if (a.out.empty()) {
    std::cout << text << '\n';
  } else {
    std::ofstream(a.out) << text << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"colora: collaborative low-rank sensing experiments"};
  app.require_subcommand(1);

  std::string spec_path;
  auto* run = app.add_subcommand("run", "Run an experiment spec");
  run->add_option("--spec", spec_path, "Spec file (key = value lines)")->required()->check(CLI::ExistingFile);

  std::string csv_path, scenario;
  auto* plot = app.add_subcommand("plot", "Render SVG plots for a scenario CSV");
  plot->add_option("--csv", csv_path)->required()->check(CLI::ExistingFile);
  plot->add_option("--scenario", scenario)->required();

  RipArgs rip;
  auto* ripc = app.add_subcommand("ripcheck", "Estimate an isometry constant of a Gaussian ensemble");
  ripc->add_option("--estimator", rip.estimator, "rip | grip | uv_rip | subisometry")
      ->check(CLI::IsMember({"rip", "grip", "uv_rip", "subisometry"}));
  ripc->add_option("--d", rip.d)->check(CLI::PositiveNumber);
  ripc->add_option("--r", rip.r)->check(CLI::PositiveNumber);
  ripc->add_option("--k", rip.k)->check(CLI::PositiveNumber);
  ripc->add_option("--n", rip.n, "Samples per client")->check(CLI::PositiveNumber);
  ripc->add_option("--trials", rip.trials)->check(CLI::PositiveNumber);
  ripc->add_option("--seed", rip.seed);
  ripc->add_option("--csv", rip.out, "Append the report row to this CSV");

  GenArgs gen;
  auto* genc = app.add_subcommand("generate", "Sample a synthetic dataset to a binary file");
  genc->add_option("--d", gen.d);
  genc->add_option("--r", gen.r);
  genc->add_option("--k", gen.k);
  auto* beta_opt = genc->add_option("--beta", gen.beta);
  genc->add_option("--xi", gen.xi)->excludes(beta_opt);
  genc->add_option("--kappa", gen.kappa);
  genc->add_option("--sigma-min", gen.sigma_min);
  genc->add_option("--N", gen.big_n);
  genc->add_option("--n", gen.small_n);
  genc->add_option("--T", gen.small_t);
  genc->add_option("--seed", gen.seed);
  genc->add_option("--out", gen.out)->required();

  SolveArgs solve;
  auto* solvec = app.add_subcommand("solve", "Run the alternating solver on a dataset file, print state JSON");
  solvec->add_option("--data", solve.data)->required()->check(CLI::ExistingFile);
  solvec->add_option("--out", solve.out);
  solvec->add_option("--iterations", solve.iterations);
  solvec->add_option("--rank", solve.rank);
  solvec->add_flag("--sequential-uv", solve.sequential_uv);
  solvec->add_flag("--fast-path", solve.fast_path);
  solvec->add_flag("--refit-lambda", solve.refit);

  auto* version = app.add_subcommand("version", "Print version");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(spec_path);
    if (*plot) return cmd_plot(csv_path, scenario);
    if (*ripc) return cmd_ripcheck(rip);
    if (*genc) return cmd_generate(gen);
    if (*solvec) return cmd_solve(solve);
    if (*version) {
      std::cout << "colora " << colora::kVersion << " (" << colora::git_describe() << ")\n";
      return kExitOk;
    }
  } catch (const colora::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitOk;
}

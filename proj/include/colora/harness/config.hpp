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

// Experiment spec files.
//
// Grammar (one entry per line):
//
//   line    := blank | comment | entry
//   comment := '#' any*
//   entry   := key ws* '=' ws* value
//
// Repeating a key appends to that key's list, so `beta = 0` followed by
// `beta = 0.1` defines a two-point beta axis. Keys `scenario`, `output_dir`
// and `plot` take exactly one value.

#pragma once

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "colora/errors.hpp"

namespace colora::harness {

enum class Scenario { convergence, similarity_sweep, sample_sweep, grip_sweep, fed_compare, init_quality };

inline const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::convergence: return "convergence";
    case Scenario::similarity_sweep: return "similarity_sweep";
    case Scenario::sample_sweep: return "sample_sweep";
    case Scenario::grip_sweep: return "grip_sweep";
    case Scenario::fed_compare: return "fed_compare";
    case Scenario::init_quality: return "init_quality";
  }
  return "?";
}

inline Scenario scenario_from_string(const std::string& s) {
  for (auto sc : {Scenario::convergence, Scenario::similarity_sweep, Scenario::sample_sweep, Scenario::grip_sweep,
                  Scenario::fed_compare, Scenario::init_quality})
    if (s == to_string(sc)) return sc;
  throw ValidationError("unknown scenario '" + s + "'");
}

using Grid = std::map<std::string, std::vector<std::string>>;

struct ExperimentSpec {
  Scenario scenario = Scenario::convergence;
  Grid grid;  // axis name -> values, seeds under "seed"
  std::string output_dir;
  bool plot = false;
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Axes each scenario needs, plus the optional ones it understands.
struct AxisRules {
  std::vector<std::string> required;
  std::vector<std::string> optional;
};

inline AxisRules axis_rules(Scenario s) {
  switch (s) {
    case Scenario::convergence:
    case Scenario::similarity_sweep:
    case Scenario::sample_sweep:
      return {{"d", "r", "k", "N", "n", "T", "seed"}, {"beta", "xi", "kappa", "sigma_min", "sequential_uv", "ridge"}};
    case Scenario::init_quality:
      return {{"d", "r", "k", "N", "seed"}, {"beta", "xi", "kappa", "sigma_min"}};
    case Scenario::grip_sweep:
      return {{"d", "r", "k", "N", "trials", "seed"}, {}};
    case Scenario::fed_compare:
      return {{"d", "r", "k", "N", "holdout", "rounds", "local_steps", "lr", "protocol", "seed"},
              {"beta", "xi", "kappa", "sigma_min", "init_scale"}};
  }
  return {};
}

inline bool needs_task_similarity(Scenario s) { return s != Scenario::grip_sweep; }

/// Checks the spec before any computation: known keys, non-empty axes,
/// scenario-required axes present, exactly one of beta/xi where relevant,
/// numeric axes parse.
inline void validate(const ExperimentSpec& spec) {
  if (spec.output_dir.empty()) throw ValidationError("output_dir is required");
  if (spec.grid.empty()) throw ValidationError("empty grid");
  const auto rules = axis_rules(spec.scenario);
  std::set<std::string> known(rules.required.begin(), rules.required.end());
  known.insert(rules.optional.begin(), rules.optional.end());
  for (const auto& [key, values] : spec.grid) {
    if (!known.count(key))
      throw ValidationError("key '" + key + "' is not used by scenario " + to_string(spec.scenario));
    if (values.empty()) throw ValidationError("axis '" + key + "' is empty");
    for (const auto& v : values) {
      if (key == "protocol" || key == "sequential_uv") continue;
      double x = 0.0;
      const auto* end = v.data() + v.size();
      const auto res = std::from_chars(v.data(), end, x);
      if (res.ec != std::errc() || res.ptr != end) throw ValidationError("axis '" + key + "': '" + v + "' is not a number");
    }
  }
  for (const auto& req : rules.required)
    if (!spec.grid.count(req)) throw ValidationError("scenario " + std::string(to_string(spec.scenario)) + " requires axis '" + req + "'");
  if (needs_task_similarity(spec.scenario)) {
    const bool has_beta = spec.grid.count("beta") > 0;
    const bool has_xi = spec.grid.count("xi") > 0;
    if (has_beta == has_xi) throw ValidationError("supply exactly one of the beta / xi axes");
  }
}

inline ExperimentSpec parse_spec(std::istream& is) {
  ExperimentSpec spec;
  bool have_scenario = false;
  std::string line;
  int lineno = 0;
  std::map<std::string, int> singles;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ValidationError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty() || value.empty()) throw ValidationError("line " + std::to_string(lineno) + ": empty key or value");
    if (key == "scenario" || key == "output_dir" || key == "plot") {
      if (++singles[key] > 1) throw ValidationError("key '" + key + "' may appear only once");
      if (key == "scenario") {
        spec.scenario = scenario_from_string(value);
        have_scenario = true;
      } else if (key == "output_dir") {
        spec.output_dir = value;
      } else {
        if (value != "true" && value != "false") throw ValidationError("plot must be true or false");
        spec.plot = value == "true";
      }
      continue;
    }
    spec.grid[key].push_back(value);
  }
  if (!have_scenario) throw ValidationError("scenario is required");
  validate(spec);
  return spec;
}

inline ExperimentSpec parse_spec_string(const std::string& text) {
  std::istringstream is(text);
  return parse_spec(is);
}

inline ExperimentSpec load_spec(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open spec file " + path);
  return parse_spec(is);
}

}  // namespace colora::harness

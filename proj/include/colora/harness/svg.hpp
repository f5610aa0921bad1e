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

// Static SVG line plots of scenario CSVs. Output depends only on the CSV
// bytes: fixed 800x500 canvas, fixed palette, fixed number formatting.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "colora/harness/config.hpp"
#include "colora/harness/csv.hpp"

namespace colora::harness {

struct PlotSpec {
  std::string x;
  std::vector<std::string> ys;
  std::vector<std::string> series;  // columns whose values identify a line
  bool log_y = true;
};

inline PlotSpec plot_spec(Scenario s) {
  switch (s) {
    case Scenario::convergence: return {"t", {"dist_u", "dist_v", "max_recon"}, {"cell", "seed"}, true};
    case Scenario::similarity_sweep: return {"beta", {"final_dist_u", "final_dist_v"}, {"seed"}, true};
    case Scenario::sample_sweep: return {"kN", {"final_dist_u", "final_dist_v"}, {"seed"}, true};
    case Scenario::grip_sweep: return {"kN", {"delta_hat"}, {"seed"}, true};
    case Scenario::fed_compare: return {"round", {"holdout_mse", "train_mse"}, {"protocol", "beta", "seed"}, true};
    case Scenario::init_quality: return {"kN", {"init_dist_u", "init_dist_v"}, {"seed"}, false};
  }
  return {};
}

namespace svg_detail {

inline constexpr int kWidth = 800;
inline constexpr int kHeight = 500;
inline constexpr double kLeft = 80.0;
inline constexpr double kRight = 20.0;
inline constexpr double kTop = 40.0;
inline constexpr double kBottom = 50.0;
inline constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                           "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", x);
  return buf;
}

inline std::string label(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", x);
  return buf;
}

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

}  // namespace svg_detail

/// Renders one y column of a table. Rows with identical (series, x) are
/// averaged, which folds per-client rows into one line.
inline std::string render_svg(const CsvTable& table, const PlotSpec& spec, const std::string& y_col,
                              const std::string& title) {
  using namespace svg_detail;
  std::vector<std::string> needed{spec.x, y_col};
  needed.insert(needed.end(), spec.series.begin(), spec.series.end());
  require_columns(table, needed);
  const int xi = table.column(spec.x);
  const int yi = table.column(y_col);

  // series name -> x -> (sum, count); std::map keeps output order fixed
  std::map<std::string, std::map<double, std::pair<double, int>>> acc;
  for (const auto& row : table.rows) {
    std::string key;
    for (const auto& c : spec.series) key += (key.empty() ? "" : " ") + c + "=" + row[table.column(c)];
    const double x = std::stod(row[xi]);
    const double y = std::stod(row[yi]);
    if (!std::isfinite(x) || !std::isfinite(y)) continue;
    auto& cell = acc[key][x];
    cell.first += y;
    cell.second += 1;
  }
  std::vector<Series> series;
  for (const auto& [name, pts] : acc) {
    Series s{name, {}};
    for (const auto& [x, sc] : pts) s.points.emplace_back(x, sc.first / sc.second);
    series.push_back(std::move(s));
  }

  const bool log_y = spec.log_y;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  double min_pos = INFINITY;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
      if (y > 0.0) min_pos = std::min(min_pos, y);
    }
  if (series.empty()) {
    xmin = 0.0;
    xmax = 1.0;
    ymin = log_y ? 1.0 : 0.0;
    ymax = log_y ? 10.0 : 1.0;
    min_pos = 1.0;
  }
  if (xmin == xmax) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  // log-y: zero or negative values sit on the floor of the positive range
  double floor_y = 0.0;
  if (log_y) {
    if (!std::isfinite(min_pos)) min_pos = 1.0;
    floor_y = min_pos;
    ymin = std::floor(std::log10(min_pos));
    ymax = std::ceil(std::log10(std::max(ymax, min_pos)));
    if (ymin == ymax) ymax += 1.0;
  } else if (ymin == ymax) {
    ymin -= 0.5;
    ymax += 0.5;
  }

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) {
    const double v = log_y ? std::log10(std::max(y, floor_y)) : y;
    return kTop + (1.0 - (v - ymin) / (ymax - ymin)) * ph;
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
     << title << "</text>\n";
  os << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
     << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int i = 0; i <= 4; ++i) {
    const double x = xmin + (xmax - xmin) * i / 4.0;
    os << "<text x=\"" << num(px(x)) << "\" y=\"" << num(kTop + ph + 18) << "\" text-anchor=\"middle\" "
       << "font-family=\"sans-serif\" font-size=\"11\">" << label(x) << "</text>\n";
  }
  if (log_y) {
    for (double e = ymin; e <= ymax + 1e-9; e += 1.0) {
      const double y = kTop + (1.0 - (e - ymin) / (ymax - ymin)) * ph;
      os << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(y) << "\" x2=\"" << num(kLeft + pw) << "\" y2=\"" << num(y)
         << "\" stroke=\"#dddddd\"/>\n";
      os << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\" "
         << "font-family=\"sans-serif\" font-size=\"11\">1e" << static_cast<int>(e) << "</text>\n";
    }
  } else {
    for (int i = 0; i <= 4; ++i) {
      const double v = ymin + (ymax - ymin) * i / 4.0;
      os << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(py(v) + 4) << "\" text-anchor=\"end\" "
         << "font-family=\"sans-serif\" font-size=\"11\">" << label(v) << "</text>\n";
    }
  }
  os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << kHeight - 10
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << spec.x << "</text>\n";
  os << "<text x=\"16\" y=\"" << num(kTop + ph / 2) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
     << "font-size=\"13\" transform=\"rotate(-90 16 " << num(kTop + ph / 2) << ")\">" << y_col << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    const auto& pts = series[i].points;
    if (pts.size() == 1) {
      os << "<circle cx=\"" << num(px(pts[0].first)) << "\" cy=\"" << num(py(pts[0].second)) << "\" r=\"4\" fill=\""
         << color << "\"><title>" << series[i].name << "</title></circle>\n";
      continue;
    }
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t j = 0; j < pts.size(); ++j)
      os << (j ? " " : "") << num(px(pts[j].first)) << ',' << num(py(pts[j].second));
    os << "\"><title>" << series[i].name << "</title></polyline>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// Renders every y column of the scenario's plot spec next to the CSV.
/// Returns the written SVG paths.
inline std::vector<std::string> render_plots(const std::string& csv_path, Scenario scenario) {
  const CsvTable table = read_csv(csv_path);
  const PlotSpec spec = plot_spec(scenario);
  std::vector<std::string> needed{spec.x};
  needed.insert(needed.end(), spec.ys.begin(), spec.ys.end());
  needed.insert(needed.end(), spec.series.begin(), spec.series.end());
  require_columns(table, needed);

  std::vector<std::string> out;
  const std::filesystem::path p(csv_path);
  for (const auto& y : spec.ys) {
    auto svg_path = p.parent_path() / (p.stem().string() + "_" + y + ".svg");
    write_file_atomic(svg_path, render_svg(table, spec, y, std::string(to_string(scenario)) + ": " + y));
    out.push_back(svg_path.string());
  }
  return out;
}

}  // namespace colora::harness

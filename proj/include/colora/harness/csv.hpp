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

// Minimal CSV tables. Leading lines starting with '#' are comments (the
// provenance line); the first non-comment line is the header. Values never
// contain commas or quotes.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "colora/errors.hpp"

namespace colora::harness {

struct CsvTable {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

/// Shortest round-trippable decimal form of x.
inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::string fmt(long long x) { return std::to_string(x); }
inline std::string fmt(int x) { return std::to_string(x); }
inline std::string fmt(unsigned long long x) { return std::to_string(x); }
inline std::string fmt(unsigned long x) { return std::to_string(x); }
inline std::string fmt(unsigned x) { return std::to_string(x); }

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline std::string to_csv_string(const CsvTable& t) {
  std::ostringstream os;
  for (const auto& c : t.comments) os << "# " << c << '\n';
  for (std::size_t i = 0; i < t.header.size(); ++i) os << (i ? "," : "") << t.header[i];
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << '\n';
  }
  return os.str();
}

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream is(text);
  std::string line;
  bool have_header = false;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      if (line.rfind('#', 0) == 0) {
        t.comments.push_back(line.size() > 2 ? line.substr(2) : "");
        continue;
      }
      t.header = split(line);
      have_header = true;
      continue;
    }
    if (line.empty()) continue;
    auto row = split(line);
    if (row.size() != t.header.size())
      throw SchemaMismatch("csv: row has " + std::to_string(row.size()) + " fields, header has " +
                           std::to_string(t.header.size()));
    t.rows.push_back(std::move(row));
  }
  if (!have_header) throw SchemaMismatch("csv: missing header row");
  return t;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw SchemaMismatch("csv: cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_csv(ss.str());
}

/// Throws SchemaMismatch naming every missing column.
inline void require_columns(const CsvTable& t, const std::vector<std::string>& cols) {
  std::string missing;
  for (const auto& c : cols)
    if (t.column(c) < 0) missing += (missing.empty() ? "" : ", ") + c;
  if (!missing.empty()) throw SchemaMismatch("csv: missing columns: " + missing);
}

/// Writes to path + ".tmp" and renames into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write " + tmp.string());
    os << content;
    if (!os) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace colora::harness

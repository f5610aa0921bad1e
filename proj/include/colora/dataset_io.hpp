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

// Binary dataset format, all fields little-endian:
//
//   magic   "CLRA" (4 bytes)
//   version u32 (= 1)
//   d r k N n T  u32 each
//   seed    u64
//   payload f64, client-major; per client the large batch first, then small
//           batches 0..T-1; per sample the d*d entries of G in row-major
//           order followed by the label y.

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "colora/taskgen.hpp"

namespace colora::taskgen {

inline constexpr std::array<char, 4> kDatasetMagic{'C', 'L', 'R', 'A'};
inline constexpr std::uint32_t kDatasetVersion = 1;

namespace io_detail {

template <typename U>
void put_le(std::ostream& os, U v) {
  std::array<char, sizeof(U)> buf{};
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(buf.data(), buf.size());
}

template <typename U>
U get_le(std::istream& is) {
  std::array<unsigned char, sizeof(U)> buf{};
  is.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!is) throw FormatError("dataset: truncated stream");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

inline void put_f64(std::ostream& os, double x) { put_le(os, std::bit_cast<std::uint64_t>(x)); }
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_le<std::uint64_t>(is)); }

inline void write_batch(std::ostream& os, const Batch& b) {
  for (std::size_t j = 0; j < b.size(); ++j) {
    const Matrix& g = b.g[j];
    for (Eigen::Index a = 0; a < g.size(); ++a) put_f64(os, g.data()[a]);
    put_f64(os, b.y[j]);
  }
}

inline Batch read_batch(std::istream& is, std::uint32_t d, std::uint32_t count) {
  Batch b;
  b.g.reserve(count);
  b.y.reserve(count);
  for (std::uint32_t j = 0; j < count; ++j) {
    Matrix g(d, d);
    for (Eigen::Index a = 0; a < g.size(); ++a) g.data()[a] = get_f64(is);
    b.g.push_back(std::move(g));
    b.y.push_back(get_f64(is));
  }
  return b;
}

}  // namespace io_detail

inline void write_dataset(std::ostream& os, const Dataset& ds) {
  const auto& m = ds.meta;
  if (ds.clients.size() != m.k) throw ShapeMismatch("write_dataset: client count differs from meta.k");
  os.write(kDatasetMagic.data(), kDatasetMagic.size());
  io_detail::put_le(os, kDatasetVersion);
  for (std::uint32_t v : {m.d, m.r, m.k, m.big_n, m.small_n, m.small_t}) io_detail::put_le(os, v);
  io_detail::put_le(os, m.seed.value);
  for (const auto& c : ds.clients) {
    if (c.large.size() != m.big_n || c.small.size() != m.small_t)
      throw ShapeMismatch("write_dataset: batch sizes differ from meta");
    io_detail::write_batch(os, c.large);
    for (const auto& b : c.small) {
      if (b.size() != m.small_n) throw ShapeMismatch("write_dataset: small batch size differs from meta");
      io_detail::write_batch(os, b);
    }
  }
  if (!os) throw FormatError("write_dataset: stream error");
}

inline Dataset read_dataset(std::istream& is) {
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kDatasetMagic) throw FormatError("read_dataset: bad magic");
  const auto version = io_detail::get_le<std::uint32_t>(is);
  if (version != kDatasetVersion) throw FormatError("read_dataset: unsupported version " + std::to_string(version));
  Dataset ds;
  auto& m = ds.meta;
  m.d = io_detail::get_le<std::uint32_t>(is);
  m.r = io_detail::get_le<std::uint32_t>(is);
  m.k = io_detail::get_le<std::uint32_t>(is);
  m.big_n = io_detail::get_le<std::uint32_t>(is);
  m.small_n = io_detail::get_le<std::uint32_t>(is);
  m.small_t = io_detail::get_le<std::uint32_t>(is);
  m.seed.value = io_detail::get_le<std::uint64_t>(is);
  ds.clients.resize(m.k);
  for (auto& c : ds.clients) {
    c.large = io_detail::read_batch(is, m.d, m.big_n);
    for (std::uint32_t t = 0; t < m.small_t; ++t) c.small.push_back(io_detail::read_batch(is, m.d, m.small_n));
  }
  return ds;
}

inline void save_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("save_dataset: cannot open " + path);
  write_dataset(os, ds);
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("load_dataset: cannot open " + path);
  return read_dataset(is);
}

}  // namespace colora::taskgen

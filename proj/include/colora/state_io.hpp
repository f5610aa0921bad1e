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

// SolverState <-> JSON. Factor payloads are base64 strings of row-major
// little-endian f64 values.
//
//   {"dims": {"d": .., "r": .., "k": ..}, "iterations": t,
//    "u": "<b64>", "v": "<b64>", "lambdas": ["<b64>", ...],
//    "history": [{"t", "dist_u", "dist_v", "max_recon", "loss"}, ...]}
//
// History distances are null when the run was not traced against ground
// truth.

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <string>
#include <string_view>

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <json.hpp>

#include "colora/coaltmin.hpp"

namespace colora::coaltmin {

namespace b64 {

using Encoder = boost::archive::iterators::base64_from_binary<
    boost::archive::iterators::transform_width<std::string::const_iterator, 6, 8>>;
using Decoder = boost::archive::iterators::transform_width<
    boost::archive::iterators::binary_from_base64<std::string::const_iterator>, 8, 6>;

inline std::string encode(const std::string& bytes) {
  std::string out(Encoder(bytes.begin()), Encoder(bytes.end()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

inline std::string decode(std::string_view text) {
  if (text.size() % 4 != 0) throw FormatError("base64: length not a multiple of 4");
  std::size_t pad = 0;
  while (pad < 2 && pad < text.size() && text[text.size() - 1 - pad] == '=') ++pad;
  // padding decodes as 'A' (zero bits); the surplus bytes are dropped below
  std::string body(text);
  std::replace(body.end() - static_cast<std::ptrdiff_t>(pad), body.end(), '=', 'A');
  try {
    std::string out(Decoder(body.cbegin()), Decoder(body.cend()));
    out.resize(out.size() - pad);
    return out;
  } catch (const boost::archive::iterators::dataflow_exception&) {
    throw FormatError("base64: invalid character");
  }
}

}  // namespace b64

inline std::string encode_matrix(const Matrix& m) {
  std::string bytes;
  bytes.reserve(static_cast<std::size_t>(m.size()) * 8);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(m.data()[i]);
    for (int b = 0; b < 8; ++b) bytes += static_cast<char>((bits >> (8 * b)) & 0xFF);
  }
  return b64::encode(bytes);
}

inline Matrix decode_matrix(std::string_view text, Eigen::Index rows, Eigen::Index cols) {
  const std::string bytes = b64::decode(text);
  if (bytes.size() != static_cast<std::size_t>(rows * cols) * 8) throw FormatError("decode_matrix: payload size mismatch");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[static_cast<std::size_t>(i) * 8 + b])) << (8 * b);
    m.data()[i] = std::bit_cast<double>(bits);
  }
  return m;
}

inline nlohmann::json to_json(const SolverState& st) {
  using nlohmann::json;
  json j;
  j["dims"] = {{"d", st.u.rows()}, {"r", st.u.cols()}, {"k", st.lambdas.size()}};
  j["iterations"] = st.t;
  j["u"] = encode_matrix(st.u);
  j["v"] = encode_matrix(st.v);
  j["lambdas"] = json::array();
  for (const auto& l : st.lambdas) j["lambdas"].push_back(encode_matrix(l));
  j["history"] = json::array();
  auto opt = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
  for (const auto& h : st.history)
    j["history"].push_back(
        {{"t", h.t}, {"dist_u", opt(h.dist_u)}, {"dist_v", opt(h.dist_v)}, {"max_recon", opt(h.max_recon)}, {"loss", h.loss}});
  return j;
}

inline SolverState state_from_json(const nlohmann::json& j) {
  try {
    SolverState st;
    const auto d = j.at("dims").at("d").get<Eigen::Index>();
    const auto r = j.at("dims").at("r").get<Eigen::Index>();
    const auto k = j.at("dims").at("k").get<std::size_t>();
    st.t = j.at("iterations").get<int>();
    st.u = decode_matrix(j.at("u").get<std::string>(), d, r);
    st.v = decode_matrix(j.at("v").get<std::string>(), d, r);
    const auto& ls = j.at("lambdas");
    if (ls.size() != k) throw FormatError("state_from_json: lambda count differs from dims.k");
    for (const auto& l : ls) st.lambdas.push_back(decode_matrix(l.get<std::string>(), r, r));
    auto opt = [](const nlohmann::json& x) { return x.is_null() ? std::nullopt : std::optional<double>(x.get<double>()); };
    for (const auto& h : j.at("history")) {
      HistoryRecord rec;
      rec.t = h.at("t").get<int>();
      rec.dist_u = opt(h.at("dist_u"));
      rec.dist_v = opt(h.at("dist_v"));
      rec.max_recon = opt(h.at("max_recon"));
      rec.loss = h.at("loss").get<double>();
      st.history.push_back(rec);
    }
    return st;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("state_from_json: ") + e.what());
  }
}

}  // namespace colora::coaltmin

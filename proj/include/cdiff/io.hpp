// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cdiff/domain_io.hpp"
#include "cdiff/error.hpp"
#include "cdiff/types.hpp"

namespace cdiff {

inline constexpr const char* version = "0.1.0";

/// Shortest text that round-trips (17 significant digits).
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Header x0,...,x{d-1}, one sample per row.
inline void write_samples_csv(std::ostream& os, const Samples& x) {
  for (Eigen::Index i = 0; i < x.rows(); ++i) os << (i ? "," : "") << 'x' << i;
  os << '\n';
  for (Eigen::Index s = 0; s < x.cols(); ++s) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) os << (i ? "," : "") << format_double(x(i, s));
    os << '\n';
  }
}

inline Samples read_samples_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorKind::empty_input, "sample file has no header");
  Eigen::Index d = 0;
  {
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) {
      if (cell != "x" + std::to_string(d)) throw Error(ErrorKind::io_error, "unexpected CSV header '" + line + "'");
      ++d;
    }
  }
  if (d == 0) throw Error(ErrorKind::io_error, "CSV header names no coordinates");
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    Eigen::Index count = 0;
    while (std::getline(row, cell, ',')) {
      char* end = nullptr;
      const double value = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size()) {
        throw Error(ErrorKind::io_error, "bad number '" + cell + "' in CSV row " + std::to_string(rows + 1));
      }
      values.push_back(value);
      ++count;
    }
    if (count != d) throw Error(ErrorKind::dimension_mismatch, "CSV row " + std::to_string(rows + 1) + " has wrong width");
    ++rows;
  }
  Samples x(d, static_cast<Eigen::Index>(rows));
  for (std::size_t s = 0; s < rows; ++s) {
    for (Eigen::Index i = 0; i < d; ++i) x(i, static_cast<Eigen::Index>(s)) = values[s * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)];
  }
  return x;
}

inline void write_samples_csv(const std::string& path, const Samples& x) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::io_error, "cannot write " + path);
  write_samples_csv(os, x);
  if (!os) throw Error(ErrorKind::io_error, "write failed for " + path);
}

inline Samples read_samples_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::io_error, "cannot read " + path);
  return read_samples_csv(is);
}

/// Array of points, each an array of coordinates.
inline Json samples_to_json(const Samples& x) {
  Json out = Json::array();
  for (Eigen::Index s = 0; s < x.cols(); ++s) out.push_back(vec_to_json(x.col(s)));
  return out;
}

inline Samples samples_from_json(const Json& j) {
  if (!j.is_array()) throw Error(ErrorKind::io_error, "expected an array of points");
  if (j.empty()) return Samples(0, 0);
  const auto d = static_cast<Eigen::Index>(j[0].size());
  Samples x(d, static_cast<Eigen::Index>(j.size()));
  for (std::size_t s = 0; s < j.size(); ++s) {
    const Vec v = vec_from_json(j[s]);
    if (v.size() != d) throw Error(ErrorKind::dimension_mismatch, "points differ in dimension");
    x.col(static_cast<Eigen::Index>(s)) = v;
  }
  return x;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::io_error, "cannot read " + path);
  try {
    return Json::parse(is);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::config_error, path + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const Json& j) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::io_error, "cannot write " + path);
  os << j.dump(2) << '\n';
}

/// Sidecar describing how an artifact was made. No timestamps, so reruns
/// produce identical files.
inline Json make_manifest(const std::string& command, const Json& config, std::uint64_t seed, std::size_t workers,
                          const std::vector<std::string>& outputs) {
  return {{"command", command},     {"config_hash", hash_hex(json_hash(config))},
          {"seed", seed},           {"workers", workers},
          {"version", version},     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                                  std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                                  std::to_string(EIGEN_MINOR_VERSION)},
          {"outputs", outputs},     {"config", config}};
}

}  // namespace cdiff

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "popart/core.hpp"

namespace popart::bench {

/// Whitespace-separated matrix text with a leading `rows cols` line.
inline Matrix read_matrix(std::istream& in, const std::string& origin = "matrix") {
  long long rows = -1, cols = -1;
  if (!(in >> rows >> cols) || rows < 1 || cols < 1)
    throw Error(Errc::io, origin + ": expected a 'rows cols' header");
  Matrix out(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      if (!(in >> out(r, c))) throw Error(Errc::io, origin + ": expected " + std::to_string(rows * cols) + " entries");
  std::string extra;
  if (in >> extra) throw Error(Errc::io, origin + ": trailing data after " + std::to_string(rows * cols) + " entries");
  return out;
}

inline Matrix read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open matrix file '" + path + "'");
  return read_matrix(in, path);
}

/// Shortest decimal text that round-trips the double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline void write_matrix(std::ostream& out, const Matrix& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << format_double(m(r, c));
    out << '\n';
  }
}

inline void write_matrix_file(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot write '" + path + "'");
  write_matrix(out, m);
}

struct ResultRow {
  std::string preset;
  std::string algorithm;
  std::uint64_t seed;
  std::size_t n;
  std::string metric;  // l1_error, cum_regret, support_recovered, h_star_sq, c_min, runtime_ms
  double value;
};

inline constexpr const char* kCsvHeader = "preset,algorithm,seed,n,metric,value";

inline std::string csv_line(const ResultRow& r) {
  return r.preset + ',' + r.algorithm + ',' + std::to_string(r.seed) + ',' + std::to_string(r.n) + ',' + r.metric +
         ',' + format_double(r.value);
}

inline void write_rows(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << kCsvHeader << '\n';
  for (const auto& r : rows) out << csv_line(r) << '\n';
}

inline void write_rows_file(const std::string& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write '" + path + "'");
  write_rows(out, rows);
  if (!out) throw Error(Errc::io, "write failed for '" + path + "'");
}

/// Parses a CSV written by write_rows (no quoting; fields never contain commas).
inline std::vector<ResultRow> read_rows(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw Error(Errc::io, "results CSV: bad header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    ResultRow r;
    std::string seed, n, value;
    if (!std::getline(ss, r.preset, ',') || !std::getline(ss, r.algorithm, ',') || !std::getline(ss, seed, ',') ||
        !std::getline(ss, n, ',') || !std::getline(ss, r.metric, ',') || !std::getline(ss, value))
      throw Error(Errc::io, "results CSV: malformed row '" + line + "'");
    r.seed = std::stoull(seed);
    r.n = std::stoull(n);
    r.value = value == "nan" ? std::nan("") : std::stod(value);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace popart::bench

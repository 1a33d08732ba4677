// SPDX-FileCopyrightText: © 2026 blocktensor developers
//
// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCKTENSOR_IO_HPP
#define BLOCKTENSOR_IO_HPP

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "blocktensor/errors.hpp"
#include "blocktensor/matrix.hpp"

namespace blocktensor {

enum class FileFormat { text, binary };

/// Layout-free matrix content as stored in fixture files: blockings plus a
/// list of (block_row, block_col, values). The distribution is supplied by
/// the reader.
struct MatrixData {
  Blocking rows;
  Blocking cols;
  std::vector<std::tuple<std::int64_t, std::int64_t, DenseBlock>> blocks;
};

namespace detail {

// Shortest round-tripping decimal form, independent of locale.
inline std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw error("format_double failed");
  return std::string(buf, p);
}

inline void write_i64_le(std::ostream& os, std::int64_t v) {
  unsigned char b[8];
  auto u = static_cast<std::uint64_t>(v);
  for (int t = 0; t < 8; ++t) b[t] = static_cast<unsigned char>((u >> (8 * t)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline bool read_i64_le(std::istream& is, std::int64_t& v) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
  std::uint64_t u = 0;
  for (int t = 7; t >= 0; --t) u = (u << 8) | b[t];
  v = static_cast<std::int64_t>(u);
  return true;
}

inline void write_f64_le(std::ostream& os, double v) {
  std::uint64_t u;
  static_assert(sizeof(u) == sizeof(v));
  __builtin_memcpy(&u, &v, 8);
  unsigned char b[8];
  for (int t = 0; t < 8; ++t) b[t] = static_cast<unsigned char>((u >> (8 * t)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline bool read_f64_le(std::istream& is, double& v) {
  std::int64_t i;
  if (!read_i64_le(is, i)) return false;
  auto u = static_cast<std::uint64_t>(i);
  __builtin_memcpy(&v, &u, 8);
  return true;
}

inline std::vector<std::tuple<std::int64_t, std::int64_t, const DenseBlock*>> sorted_blocks(
    const DistMatrix& m) {
  std::vector<std::tuple<std::int64_t, std::int64_t, const DenseBlock*>> all;
  m.for_each_global([&](int, std::int64_t i, std::int64_t j, const DenseBlock& b) {
    all.emplace_back(i, j, &b);
  });
  std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) {
    return std::pair(std::get<0>(x), std::get<1>(x)) < std::pair(std::get<0>(y), std::get<1>(y));
  });
  return all;
}

}  // namespace detail

// Text format: a header line "rows cols nblkrows nblkcols", one line of
// block sizes per dimension, then per stored block a line "i j" followed by
// a line of rows*cols values in row-major order.
inline void write_matrix_text(std::ostream& os, const DistMatrix& m) {
  os << m.rows().total_elements() << ' ' << m.cols().total_elements() << ' '
     << m.n_block_rows() << ' ' << m.n_block_cols() << '\n';
  for (std::int64_t b = 0; b < m.n_block_rows(); ++b)
    os << m.rows().size(b) << (b + 1 < m.n_block_rows() ? ' ' : '\n');
  if (m.n_block_rows() == 0) os << '\n';
  for (std::int64_t b = 0; b < m.n_block_cols(); ++b)
    os << m.cols().size(b) << (b + 1 < m.n_block_cols() ? ' ' : '\n');
  if (m.n_block_cols() == 0) os << '\n';
  for (const auto& [i, j, blk] : detail::sorted_blocks(m)) {
    os << i << ' ' << j << '\n';
    for (std::size_t t = 0; t < blk->values.size(); ++t)
      os << detail::format_double(blk->values[t]) << (t + 1 < blk->values.size() ? ' ' : '\n');
  }
}

inline MatrixData read_matrix_data_text(std::istream& is) {
  std::int64_t rows, cols, nbr, nbc;
  if (!(is >> rows >> cols >> nbr >> nbc)) throw error("matrix file: bad header");
  std::vector<int> rsizes(static_cast<std::size_t>(nbr)), csizes(static_cast<std::size_t>(nbc));
  for (auto& s : rsizes)
    if (!(is >> s)) throw error("matrix file: bad row blocking");
  for (auto& s : csizes)
    if (!(is >> s)) throw error("matrix file: bad column blocking");
  MatrixData data{Blocking(rsizes), Blocking(csizes), {}};
  if (data.rows.total() != rows || data.cols.total() != cols)
    throw error("matrix file: blocking does not sum to the header dimensions");
  std::int64_t i, j;
  while (is >> i >> j) {
    if (i < 0 || i >= nbr || j < 0 || j >= nbc)
      throw error("matrix file: block index out of range");
    DenseBlock b(data.rows.size(i), data.cols.size(j));
    for (auto& v : b.values)
      if (!(is >> v)) throw error("matrix file: truncated block values");
    data.blocks.emplace_back(i, j, std::move(b));
  }
  return data;
}

// Binary format: identical field order, all integers as little-endian
// int64, values as little-endian 8-byte doubles.
inline void write_matrix_binary(std::ostream& os, const DistMatrix& m) {
  detail::write_i64_le(os, m.rows().total_elements());
  detail::write_i64_le(os, m.cols().total_elements());
  detail::write_i64_le(os, m.n_block_rows());
  detail::write_i64_le(os, m.n_block_cols());
  for (std::int64_t b = 0; b < m.n_block_rows(); ++b) detail::write_i64_le(os, m.rows().size(b));
  for (std::int64_t b = 0; b < m.n_block_cols(); ++b) detail::write_i64_le(os, m.cols().size(b));
  for (const auto& [i, j, blk] : detail::sorted_blocks(m)) {
    detail::write_i64_le(os, i);
    detail::write_i64_le(os, j);
    for (double v : blk->values) detail::write_f64_le(os, v);
  }
}

inline MatrixData read_matrix_data_binary(std::istream& is) {
  std::int64_t rows, cols, nbr, nbc;
  if (!detail::read_i64_le(is, rows) || !detail::read_i64_le(is, cols) ||
      !detail::read_i64_le(is, nbr) || !detail::read_i64_le(is, nbc))
    throw error("matrix file: bad binary header");
  std::vector<int> rsizes(static_cast<std::size_t>(nbr)), csizes(static_cast<std::size_t>(nbc));
  std::int64_t s;
  for (auto& x : rsizes) {
    if (!detail::read_i64_le(is, s)) throw error("matrix file: bad row blocking");
    x = static_cast<int>(s);
  }
  for (auto& x : csizes) {
    if (!detail::read_i64_le(is, s)) throw error("matrix file: bad column blocking");
    x = static_cast<int>(s);
  }
  MatrixData data{Blocking(rsizes), Blocking(csizes), {}};
  if (data.rows.total() != rows || data.cols.total() != cols)
    throw error("matrix file: blocking does not sum to the header dimensions");
  std::int64_t i;
  while (detail::read_i64_le(is, i)) {
    std::int64_t j;
    if (!detail::read_i64_le(is, j)) throw error("matrix file: truncated block header");
    if (i < 0 || i >= nbr || j < 0 || j >= nbc)
      throw error("matrix file: block index out of range");
    DenseBlock b(data.rows.size(i), data.cols.size(j));
    for (auto& v : b.values)
      if (!detail::read_f64_le(is, v)) throw error("matrix file: truncated block values");
    data.blocks.emplace_back(i, j, std::move(b));
  }
  return data;
}

/// Materializes file content on a grid with round-robin distributions.
inline DistMatrix to_dist_matrix(MatrixData&& data, const ProcessGrid& grid) {
  DistMatrix m = new_matrix_round_robin(data.rows, data.cols, grid);
  for (auto& [i, j, blk] : data.blocks) m.put_block(i, j, std::move(blk));
  return m;
}

inline void write_matrix_file(const std::string& path, const DistMatrix& m, FileFormat format) {
  std::ofstream os(path, format == FileFormat::binary ? std::ios::binary : std::ios::out);
  if (!os) throw error("cannot open " + path + " for writing");
  format == FileFormat::binary ? write_matrix_binary(os, m) : write_matrix_text(os, m);
  if (!os) throw error("write to " + path + " failed");
}

inline MatrixData read_matrix_file(const std::string& path, FileFormat format) {
  std::ifstream is(path, format == FileFormat::binary ? std::ios::binary : std::ios::in);
  if (!is) throw error("cannot open " + path);
  return format == FileFormat::binary ? read_matrix_data_binary(is) : read_matrix_data_text(is);
}

}  // namespace blocktensor

#endif  // BLOCKTENSOR_IO_HPP

// SPDX-FileCopyrightText: © 2026 blocktensor developers
//
// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCKTENSOR_BLOCK_HPP
#define BLOCKTENSOR_BLOCK_HPP

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "blocktensor/errors.hpp"

namespace blocktensor {

/// A small dense row-major tile of doubles; the unit of storage and compute.
struct DenseBlock {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;  // rows*cols, row-major

  DenseBlock() = default;
  DenseBlock(int m, int n) : rows(m), cols(n), values(static_cast<std::size_t>(m) * n, 0.0) {
    if (m < 1 || n < 1) throw invalid_argument("DenseBlock: dimensions must be positive");
  }
  DenseBlock(int m, int n, std::vector<double> v) : rows(m), cols(n), values(std::move(v)) {
    if (m < 1 || n < 1) throw invalid_argument("DenseBlock: dimensions must be positive");
    if (values.size() != static_cast<std::size_t>(m) * n)
      throw invalid_argument("DenseBlock: value count does not match dimensions");
  }

  double& at(int i, int j) { return values[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * cols + j]; }
  std::int64_t size() const noexcept { return static_cast<std::int64_t>(rows) * cols; }

  friend bool operator==(const DenseBlock& a, const DenseBlock& b) {
    return a.rows == b.rows && a.cols == b.cols && a.values == b.values;
  }
};

/// c <- c + a*b. The accumulation over k is innermost per output element, so
/// repeated runs are bit-identical.
inline void block_gemm_acc(DenseBlock& c, const DenseBlock& a, const DenseBlock& b) {
  if (a.rows != c.rows || a.cols != b.rows || b.cols != c.cols)
    throw invalid_argument("block_gemm_acc: dimension mismatch (" + std::to_string(a.rows) +
                           "x" + std::to_string(a.cols) + " * " + std::to_string(b.rows) + "x" +
                           std::to_string(b.cols) + " -> " + std::to_string(c.rows) + "x" +
                           std::to_string(c.cols) + ")");
  const int m = c.rows, n = c.cols, k = a.cols;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = c.values[static_cast<std::size_t>(i) * n + j];
      for (int p = 0; p < k; ++p)
        acc += a.values[static_cast<std::size_t>(i) * k + p] *
               b.values[static_cast<std::size_t>(p) * n + j];
      c.values[static_cast<std::size_t>(i) * n + j] = acc;
    }
}

inline DenseBlock transpose_block(const DenseBlock& a) {
  DenseBlock t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

/// Block sizes along one matrix dimension plus their prefix sums.
class Blocking {
 public:
  Blocking() = default;
  explicit Blocking(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    offsets_.resize(sizes_.size() + 1);
    offsets_[0] = 0;
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
      if (sizes_[i] < 1) throw invalid_argument("Blocking: block sizes must be positive");
      offsets_[i + 1] = offsets_[i] + sizes_[i];
    }
  }

  static Blocking uniform(std::int64_t n_blocks, int block_size) {
    return Blocking(std::vector<int>(static_cast<std::size_t>(n_blocks), block_size));
  }

  std::int64_t n_blocks() const noexcept { return static_cast<std::int64_t>(sizes_.size()); }
  int size(std::int64_t b) const { return sizes_.at(static_cast<std::size_t>(b)); }
  std::int64_t offset(std::int64_t b) const { return offsets_.at(static_cast<std::size_t>(b)); }
  std::int64_t total() const noexcept { return offsets_.empty() ? 0 : offsets_.back(); }
  const std::vector<int>& sizes() const noexcept { return sizes_; }

  friend bool operator==(const Blocking& a, const Blocking& b) { return a.sizes_ == b.sizes_; }

 private:
  std::vector<int> sizes_;
  std::vector<std::int64_t> offsets_;
};

/// One pending small multiplication: contributes a_block * b_block into the
/// output block at (target_row_block, target_col_block).
struct BatchItem {
  const DenseBlock* a_block = nullptr;
  const DenseBlock* b_block = nullptr;
  std::int64_t target_row_block = 0;
  std::int64_t target_col_block = 0;
  std::int64_t k_block = 0;
};

/// Orders batch items by (target row-block, target col-block, k-block), so
/// all items sharing a target row-block form one contiguous run and can be
/// processed per-row-block without write conflicts.
inline void order_batches(std::vector<BatchItem>& items) {
  std::stable_sort(items.begin(), items.end(), [](const BatchItem& x, const BatchItem& y) {
    if (x.target_row_block != y.target_row_block) return x.target_row_block < y.target_row_block;
    if (x.target_col_block != y.target_col_block) return x.target_col_block < y.target_col_block;
    return x.k_block < y.k_block;
  });
}

}  // namespace blocktensor

#endif  // BLOCKTENSOR_BLOCK_HPP

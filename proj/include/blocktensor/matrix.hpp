// SPDX-FileCopyrightText: © 2026 blocktensor developers
//
// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCKTENSOR_MATRIX_HPP
#define BLOCKTENSOR_MATRIX_HPP

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "blocktensor/block.hpp"
#include "blocktensor/comm.hpp"
#include "blocktensor/errors.hpp"
#include "blocktensor/grid.hpp"

namespace blocktensor {

/// Blocking plus distribution along one matrix dimension. Backed either by
/// explicit arrays or by user-supplied functions; the functional form keeps
/// the per-rank index footprint constant no matter how many blocks the
/// dimension has, which is what makes tall-and-skinny matrices storable.
class Axis {
 public:
  Axis() = default;

  Axis(const Blocking& blocking, std::vector<int> dist, int extent)
      : n_blocks_(blocking.n_blocks()),
        extent_(extent),
        sizes_(blocking.sizes()),
        dist_(std::move(dist)) {
    if (static_cast<std::int64_t>(dist_.size()) != n_blocks_)
      throw invalid_argument("Axis: distribution length " + std::to_string(dist_.size()) +
                             " does not match block count " + std::to_string(n_blocks_));
    for (int c : dist_)
      if (c < 0 || c >= extent_)
        throw invalid_argument("Axis: distribution coordinate " + std::to_string(c) +
                               " out of grid range [0," + std::to_string(extent_) + ")");
  }

  static Axis round_robin(const Blocking& blocking, int extent) {
    std::vector<int> dist(static_cast<std::size_t>(blocking.n_blocks()));
    for (std::size_t i = 0; i < dist.size(); ++i) dist[i] = static_cast<int>(i % extent);
    return Axis(blocking, std::move(dist), extent);
  }

  static Axis functional(std::int64_t n_blocks, std::function<int(std::int64_t)> size_fn,
                         std::function<int(std::int64_t)> dist_fn, int extent) {
    Axis a;
    a.n_blocks_ = n_blocks;
    a.extent_ = extent;
    a.size_fn_ = std::move(size_fn);
    a.dist_fn_ = std::move(dist_fn);
    return a;
  }

  std::int64_t n_blocks() const noexcept { return n_blocks_; }
  int extent() const noexcept { return extent_; }
  bool is_explicit() const noexcept { return !sizes_.empty() || n_blocks_ == 0; }

  int size(std::int64_t b) const {
    check_block(b);
    return is_explicit() ? sizes_[static_cast<std::size_t>(b)] : size_fn_(b);
  }

  int dist(std::int64_t b) const {
    check_block(b);
    const int c = is_explicit() ? dist_[static_cast<std::size_t>(b)] : dist_fn_(b);
    if (c < 0 || c >= extent_)
      throw invalid_argument("Axis: distribution coordinate " + std::to_string(c) +
                             " out of grid range [0," + std::to_string(extent_) + ")");
    return c;
  }

  /// Element offset of block b. O(1) for explicit axes, O(b) for functional
  /// ones; hot paths only ever need sizes of locally stored blocks.
  std::int64_t offset(std::int64_t b) const {
    if (is_explicit()) {
      std::int64_t off = 0;
      for (std::int64_t t = 0; t < b; ++t) off += sizes_[static_cast<std::size_t>(t)];
      return off;
    }
    std::int64_t off = 0;
    for (std::int64_t t = 0; t < b; ++t) off += size_fn_(t);
    return off;
  }

  std::int64_t total_elements() const {
    std::int64_t total = 0;
    for (std::int64_t b = 0; b < n_blocks_; ++b)
      total += is_explicit() ? sizes_[static_cast<std::size_t>(b)] : size_fn_(b);
    return total;
  }

  /// Resident index entries this axis contributes on every rank.
  std::int64_t index_entries() const noexcept {
    return static_cast<std::int64_t>(sizes_.size() + dist_.size());
  }

  bool same_blocking(const Axis& o) const {
    if (n_blocks_ != o.n_blocks_) return false;
    for (std::int64_t b = 0; b < n_blocks_; ++b)
      if (size(b) != o.size(b)) return false;
    return true;
  }

  bool same_distribution(const Axis& o) const {
    if (n_blocks_ != o.n_blocks_ || extent_ != o.extent_) return false;
    for (std::int64_t b = 0; b < n_blocks_; ++b)
      if (dist(b) != o.dist(b)) return false;
    return true;
  }

 private:
  void check_block(std::int64_t b) const {
    if (b < 0 || b >= n_blocks_)
      throw invalid_argument("Axis: block index " + std::to_string(b) + " out of range [0," +
                             std::to_string(n_blocks_) + ")");
  }

  std::int64_t n_blocks_ = 0;
  int extent_ = 1;
  std::vector<int> sizes_;
  std::vector<int> dist_;
  std::function<int(std::int64_t)> size_fn_;
  std::function<int(std::int64_t)> dist_fn_;
};

/// One rank's share of a distributed matrix: compressed sparse rows over the
/// non-empty local block-rows. Row and column ids are global block indices;
/// columns are strictly increasing within a row. Keeping the row index sparse
/// as well bounds the index footprint by the number of stored blocks rather
/// than the number of block-rows.
class LocalStore {
 public:
  LocalStore() : row_ptr_{0} {}

  std::int64_t n_stored_blocks() const noexcept {
    return static_cast<std::int64_t>(col_ids_.size());
  }

  std::int64_t stored_elements() const {
    std::int64_t s = 0;
    for (const auto& b : blocks_) s += b.size();
    return s;
  }

  std::int64_t index_entries() const noexcept {
    return static_cast<std::int64_t>(row_ids_.size() + row_ptr_.size() + col_ids_.size());
  }

  const DenseBlock* find(std::int64_t i, std::int64_t j) const {
    const auto [ri, found_row] = find_row(i);
    if (!found_row) return nullptr;
    const auto [e, found] = find_col(ri, j);
    return found ? &blocks_[static_cast<std::size_t>(e)] : nullptr;
  }

  DenseBlock* find(std::int64_t i, std::int64_t j) {
    return const_cast<DenseBlock*>(static_cast<const LocalStore*>(this)->find(i, j));
  }

  /// Inserts the block, accumulating into or replacing any existing entry.
  void insert(std::int64_t i, std::int64_t j, DenseBlock block, bool accumulate) {
    auto [ri, found_row] = find_row(i);
    if (!found_row) {
      row_ids_.insert(row_ids_.begin() + ri, i);
      row_ptr_.insert(row_ptr_.begin() + ri + 1, row_ptr_[static_cast<std::size_t>(ri)]);
    }
    auto [e, found] = find_col(ri, j);
    if (found) {
      DenseBlock& dst = blocks_[static_cast<std::size_t>(e)];
      if (accumulate) {
        if (dst.rows != block.rows || dst.cols != block.cols)
          throw invalid_argument("LocalStore: accumulate with mismatched block dims");
        for (std::size_t t = 0; t < dst.values.size(); ++t) dst.values[t] += block.values[t];
      } else {
        dst = std::move(block);
      }
      return;
    }
    col_ids_.insert(col_ids_.begin() + e, j);
    blocks_.insert(blocks_.begin() + e, std::move(block));
    for (std::size_t t = static_cast<std::size_t>(ri) + 1; t < row_ptr_.size(); ++t)
      ++row_ptr_[t];
  }

  DenseBlock& get_or_create(std::int64_t i, std::int64_t j, int m, int n) {
    DenseBlock* b = find(i, j);
    if (b) return *b;
    insert(i, j, DenseBlock(m, n), false);
    return *find(i, j);
  }

  /// Visits (block_row, block_col, block) in (row, col) order.
  template <class Fn>
  void for_each(Fn&& fn) const {
    for (std::size_t ri = 0; ri < row_ids_.size(); ++ri)
      for (auto e = row_ptr_[ri]; e < row_ptr_[ri + 1]; ++e)
        fn(row_ids_[ri], col_ids_[static_cast<std::size_t>(e)],
           blocks_[static_cast<std::size_t>(e)]);
  }

  template <class Fn>
  void for_each_mutable(Fn&& fn) {
    for (std::size_t ri = 0; ri < row_ids_.size(); ++ri)
      for (auto e = row_ptr_[ri]; e < row_ptr_[ri + 1]; ++e)
        fn(row_ids_[ri], col_ids_[static_cast<std::size_t>(e)],
           blocks_[static_cast<std::size_t>(e)]);
  }

  /// Visits blocks of row i whose column id lies in [col_begin, col_end).
  template <class Fn>
  void for_each_in_row_range(std::int64_t i, std::int64_t col_begin, std::int64_t col_end,
                             Fn&& fn) const {
    const auto [ri, found] = find_row(i);
    if (!found) return;
    const auto lo = col_ids_.begin() + row_ptr_[static_cast<std::size_t>(ri)];
    const auto hi = col_ids_.begin() + row_ptr_[static_cast<std::size_t>(ri) + 1];
    for (auto it = std::lower_bound(lo, hi, col_begin); it != hi && *it < col_end; ++it) {
      const auto e = static_cast<std::size_t>(it - col_ids_.begin());
      fn(i, *it, blocks_[e]);
    }
  }

  const std::vector<std::int64_t>& row_ids() const noexcept { return row_ids_; }

  bool well_formed() const {
    if (row_ptr_.size() != row_ids_.size() + 1 || row_ptr_.front() != 0) return false;
    if (row_ptr_.back() != static_cast<std::int64_t>(col_ids_.size())) return false;
    if (col_ids_.size() != blocks_.size()) return false;
    if (!std::is_sorted(row_ids_.begin(), row_ids_.end())) return false;
    if (std::adjacent_find(row_ids_.begin(), row_ids_.end()) != row_ids_.end()) return false;
    for (std::size_t ri = 0; ri < row_ids_.size(); ++ri) {
      if (row_ptr_[ri] > row_ptr_[ri + 1]) return false;
      if (row_ptr_[ri] == row_ptr_[ri + 1]) return false;  // empty rows must not linger
      for (auto e = row_ptr_[ri] + 1; e < row_ptr_[ri + 1]; ++e)
        if (col_ids_[static_cast<std::size_t>(e - 1)] >= col_ids_[static_cast<std::size_t>(e)])
          return false;
    }
    return true;
  }

  void clear() {
    row_ids_.clear();
    row_ptr_ = {0};
    col_ids_.clear();
    blocks_.clear();
  }

 private:
  // (position, found) of row id i in row_ids_
  std::pair<std::int64_t, bool> find_row(std::int64_t i) const {
    const auto it = std::lower_bound(row_ids_.begin(), row_ids_.end(), i);
    return {it - row_ids_.begin(), it != row_ids_.end() && *it == i};
  }

  // (entry position, found) of column j within row slot ri
  std::pair<std::int64_t, bool> find_col(std::int64_t ri, std::int64_t j) const {
    const auto lo = col_ids_.begin() + row_ptr_[static_cast<std::size_t>(ri)];
    const auto hi = row_ptr_.size() > static_cast<std::size_t>(ri) + 1
                        ? col_ids_.begin() + row_ptr_[static_cast<std::size_t>(ri) + 1]
                        : col_ids_.end();
    const auto it = std::lower_bound(lo, hi, j);
    return {it - col_ids_.begin(), it != hi && *it == j};
  }

  std::vector<std::int64_t> row_ids_;
  std::vector<std::int64_t> row_ptr_;
  std::vector<std::int64_t> col_ids_;
  std::vector<DenseBlock> blocks_;
};

/// A blocked sparse matrix distributed over a 2D process grid. Block (i,j)
/// lives on the rank at grid coordinates (rows.dist(i), cols.dist(j)).
class DistMatrix {
 public:
  DistMatrix() = default;

  DistMatrix(Axis rows, Axis cols, ProcessGrid grid)
      : rows_(std::move(rows)), cols_(std::move(cols)), grid_(std::move(grid)) {
    if (grid_.ndims() != 2) throw invalid_argument("DistMatrix: grid must be 2-dimensional");
    if (rows_.extent() != grid_.dim(0) || cols_.extent() != grid_.dim(1))
      throw invalid_argument("DistMatrix: axis extents do not match the grid");
    local_.resize(static_cast<std::size_t>(grid_.size()));
  }

  const Axis& rows() const noexcept { return rows_; }
  const Axis& cols() const noexcept { return cols_; }
  const ProcessGrid& grid() const noexcept { return grid_; }
  std::int64_t n_block_rows() const noexcept { return rows_.n_blocks(); }
  std::int64_t n_block_cols() const noexcept { return cols_.n_blocks(); }

  int owner_rank(std::int64_t i, std::int64_t j) const {
    return grid_.rank_of({rows_.dist(i), cols_.dist(j)});
  }

  LocalStore& local(int rank) { return local_.at(static_cast<std::size_t>(rank)); }
  const LocalStore& local(int rank) const { return local_.at(static_cast<std::size_t>(rank)); }
  int nranks() const noexcept { return static_cast<int>(local_.size()); }

  void put_block(std::int64_t i, std::int64_t j, DenseBlock block, bool accumulate = false) {
    check_dims(i, j, block);
    local_[static_cast<std::size_t>(owner_rank(i, j))].insert(i, j, std::move(block),
                                                              accumulate);
  }

  /// Ownership-checked variant used inside rank workers.
  void put_block_at(int rank, std::int64_t i, std::int64_t j, DenseBlock block,
                    bool accumulate = false) {
    const int owner = owner_rank(i, j);
    if (owner != rank)
      throw ownership_error("put_block: rank " + std::to_string(rank) + " does not own block (" +
                            std::to_string(i) + "," + std::to_string(j) + "), rank " +
                            std::to_string(owner) + " does");
    check_dims(i, j, block);
    local_[static_cast<std::size_t>(rank)].insert(i, j, std::move(block), accumulate);
  }

  const DenseBlock* get_block(std::int64_t i, std::int64_t j) const {
    return local_[static_cast<std::size_t>(owner_rank(i, j))].find(i, j);
  }

  const DenseBlock* get_block_at(int rank, std::int64_t i, std::int64_t j) const {
    const int owner = owner_rank(i, j);
    if (owner != rank)
      throw ownership_error("get_block: rank " + std::to_string(rank) + " does not own block (" +
                            std::to_string(i) + "," + std::to_string(j) + "), rank " +
                            std::to_string(owner) + " does");
    return local_[static_cast<std::size_t>(rank)].find(i, j);
  }

  std::int64_t stored_elements() const {
    std::int64_t s = 0;
    for (const auto& l : local_) s += l.stored_elements();
    return s;
  }

  std::int64_t stored_blocks() const {
    std::int64_t s = 0;
    for (const auto& l : local_) s += l.n_stored_blocks();
    return s;
  }

  /// Stored elements over the dense element count, reduced across all ranks.
  double occupancy() const {
    const std::int64_t dense = rows_.total_elements() * cols_.total_elements();
    if (dense == 0) return 0.0;
    return static_cast<double>(stored_elements()) / static_cast<double>(dense);
  }

  /// Replicated axis entries plus this rank's store index.
  std::int64_t index_entries(int rank) const {
    return rows_.index_entries() + cols_.index_entries() +
           local_.at(static_cast<std::size_t>(rank)).index_entries();
  }

  /// Visits every stored block of every rank in (rank, row, col) order.
  template <class Fn>
  void for_each_global(Fn&& fn) const {
    for (int r = 0; r < nranks(); ++r)
      local_[static_cast<std::size_t>(r)].for_each(
          [&](std::int64_t i, std::int64_t j, const DenseBlock& b) { fn(r, i, j, b); });
  }

  DistMatrix transpose() const;
  void add(const DistMatrix& b, double alpha, double beta);
  double trace() const;
  std::vector<double> to_dense() const;

  bool well_formed() const {
    for (int r = 0; r < nranks(); ++r) {
      if (!local_[static_cast<std::size_t>(r)].well_formed()) return false;
      bool ok = true;
      local_[static_cast<std::size_t>(r)].for_each(
          [&](std::int64_t i, std::int64_t j, const DenseBlock& b) {
            if (owner_rank(i, j) != r) ok = false;
            if (b.rows != rows_.size(i) || b.cols != cols_.size(j)) ok = false;
          });
      if (!ok) return false;
    }
    return true;
  }

 private:
  void check_dims(std::int64_t i, std::int64_t j, const DenseBlock& block) const {
    if (block.rows != rows_.size(i) || block.cols != cols_.size(j))
      throw invalid_argument("put_block: block is " + std::to_string(block.rows) + "x" +
                             std::to_string(block.cols) + " but slot (" + std::to_string(i) +
                             "," + std::to_string(j) + ") requires " +
                             std::to_string(rows_.size(i)) + "x" + std::to_string(cols_.size(j)));
  }

  Axis rows_;
  Axis cols_;
  ProcessGrid grid_;
  std::vector<LocalStore> local_;
};

/// Empty matrix from explicit blockings and distributions.
inline DistMatrix new_matrix(const Blocking& row_blocking, const Blocking& col_blocking,
                             const ProcessGrid& grid, std::vector<int> row_dist,
                             std::vector<int> col_dist) {
  if (grid.ndims() != 2) throw invalid_argument("new_matrix: grid must be 2-dimensional");
  return DistMatrix(Axis(row_blocking, std::move(row_dist), grid.dim(0)),
                    Axis(col_blocking, std::move(col_dist), grid.dim(1)), grid);
}

/// Empty matrix with the default round-robin distribution on both axes.
inline DistMatrix new_matrix_round_robin(const Blocking& row_blocking,
                                         const Blocking& col_blocking, const ProcessGrid& grid) {
  if (grid.ndims() != 2) throw invalid_argument("new_matrix: grid must be 2-dimensional");
  return DistMatrix(Axis::round_robin(row_blocking, grid.dim(0)),
                    Axis::round_robin(col_blocking, grid.dim(1)), grid);
}

inline DistMatrix DistMatrix::transpose() const {
  auto dims = grid_.dims();
  std::swap(dims[0], dims[1]);
  DistMatrix t(cols_, rows_, ProcessGrid(dims));
  for_each_global([&](int, std::int64_t i, std::int64_t j, const DenseBlock& b) {
    t.put_block(j, i, transpose_block(b));
  });
  return t;
}

inline void DistMatrix::add(const DistMatrix& b, double alpha, double beta) {
  if (!rows_.same_blocking(b.rows_) || !cols_.same_blocking(b.cols_))
    throw invalid_argument("add: blockings do not conform");
  if (grid_ != b.grid_ || !rows_.same_distribution(b.rows_) ||
      !cols_.same_distribution(b.cols_))
    throw invalid_argument("add: distributions do not match");
  for (auto& l : local_)
    l.for_each_mutable([&](std::int64_t, std::int64_t, DenseBlock& blk) {
      for (auto& x : blk.values) x *= alpha;
    });
  b.for_each_global([&](int rank, std::int64_t i, std::int64_t j, const DenseBlock& blk) {
    DenseBlock& dst =
        local_[static_cast<std::size_t>(rank)].get_or_create(i, j, blk.rows, blk.cols);
    for (std::size_t t = 0; t < dst.values.size(); ++t) dst.values[t] += beta * blk.values[t];
  });
}

inline double DistMatrix::trace() const {
  if (rows_.total_elements() != cols_.total_elements() || !rows_.same_blocking(cols_))
    throw invalid_argument("trace: matrix must be square with matching blockings");
  double tr = 0.0;
  for_each_global([&](int, std::int64_t i, std::int64_t j, const DenseBlock& b) {
    if (i != j) return;
    for (int d = 0; d < std::min(b.rows, b.cols); ++d) tr += b.at(d, d);
  });
  return tr;
}

inline std::vector<double> DistMatrix::to_dense() const {
  const std::int64_t m = rows_.total_elements();
  const std::int64_t n = cols_.total_elements();
  std::vector<double> dense(static_cast<std::size_t>(m * n), 0.0);
  for_each_global([&](int, std::int64_t i, std::int64_t j, const DenseBlock& b) {
    const std::int64_t r0 = rows_.offset(i);
    const std::int64_t c0 = cols_.offset(j);
    for (int r = 0; r < b.rows; ++r)
      for (int c = 0; c < b.cols; ++c)
        dense[static_cast<std::size_t>((r0 + r) * n + (c0 + c))] = b.at(r, c);
  });
  return dense;
}

/// True when both matrices store exactly the same blocks with bit-equal
/// values (layout aside).
inline bool equal_content(const DistMatrix& a, const DistMatrix& b) {
  if (a.n_block_rows() != b.n_block_rows() || a.n_block_cols() != b.n_block_cols()) return false;
  std::vector<std::tuple<std::int64_t, std::int64_t, const DenseBlock*>> ea, eb;
  a.for_each_global([&](int, std::int64_t i, std::int64_t j, const DenseBlock& blk) {
    ea.emplace_back(i, j, &blk);
  });
  b.for_each_global([&](int, std::int64_t i, std::int64_t j, const DenseBlock& blk) {
    eb.emplace_back(i, j, &blk);
  });
  auto key = [](const auto& t) { return std::pair(std::get<0>(t), std::get<1>(t)); };
  std::sort(ea.begin(), ea.end(), [&](const auto& x, const auto& y) { return key(x) < key(y); });
  std::sort(eb.begin(), eb.end(), [&](const auto& x, const auto& y) { return key(x) < key(y); });
  if (ea.size() != eb.size()) return false;
  for (std::size_t t = 0; t < ea.size(); ++t) {
    if (key(ea[t]) != key(eb[t])) return false;
    if (!(*std::get<2>(ea[t]) == *std::get<2>(eb[t]))) return false;
  }
  return true;
}

namespace detail {

/// A block tagged with its global coordinates, as carried inside packets.
struct TaggedBlock {
  std::int64_t i = 0;
  std::int64_t j = 0;
  DenseBlock block;
};

inline Packet pack_blocks(const std::vector<TaggedBlock>& blocks) {
  Packet p;
  for (const auto& tb : blocks) {
    p.meta.push_back(tb.i);
    p.meta.push_back(tb.j);
    p.meta.push_back(tb.block.rows);
    p.meta.push_back(tb.block.cols);
    p.values.insert(p.values.end(), tb.block.values.begin(), tb.block.values.end());
  }
  return p;
}

inline std::vector<TaggedBlock> unpack_blocks(const Packet& p) {
  std::vector<TaggedBlock> blocks;
  std::size_t v = 0;
  for (std::size_t t = 0; t < p.meta.size(); t += 4) {
    TaggedBlock tb;
    tb.i = p.meta[t];
    tb.j = p.meta[t + 1];
    const auto m = static_cast<int>(p.meta[t + 2]);
    const auto n = static_cast<int>(p.meta[t + 3]);
    const auto count = static_cast<std::size_t>(m) * static_cast<std::size_t>(n);
    tb.block = DenseBlock(
        m, n, std::vector<double>(p.values.begin() + static_cast<std::ptrdiff_t>(v),
                                  p.values.begin() + static_cast<std::ptrdiff_t>(v + count)));
    v += count;
    blocks.push_back(std::move(tb));
  }
  return blocks;
}

/// One deterministic personalized exchange: every rank sends one (possibly
/// empty) packet to every other rank over nranks steps; blocks staying on
/// their rank travel as free self-messages. Blocks are packed in the order
/// the bucket builder produced them.
struct OutBlock {
  int dest = 0;
  std::int64_t i = 0;
  std::int64_t j = 0;
  DenseBlock block;
};

template <class Deliver>
inline void exchange_blocks(SimComm& comm, int rank, std::vector<OutBlock> out,
                            Deliver&& deliver) {
  const int world = comm.nranks();
  std::vector<std::vector<TaggedBlock>> buckets(static_cast<std::size_t>(world));
  for (auto& ob : out)
    buckets[static_cast<std::size_t>(ob.dest)].push_back(
        TaggedBlock{ob.i, ob.j, std::move(ob.block)});
  for (int step = 0; step < world; ++step) {
    const int to = (rank + step) % world;
    const int from = (rank - step + world) % world;
    comm.send(rank, to, pack_blocks(buckets[static_cast<std::size_t>(to)]));
    for (auto& tb : unpack_blocks(comm.recv(rank, from)))
      deliver(tb.i, tb.j, std::move(tb.block));
  }
}

}  // namespace detail

/// Moves `src` onto a new layout, communicating each block at most once and
/// charging the ledger only for blocks that change ranks. With `transpose`
/// set, block (i,j) lands transposed at (j,i) of the target layout.
inline DistMatrix redistribute(SimComm& comm, const DistMatrix& src, Axis new_rows,
                               Axis new_cols, const ProcessGrid& new_grid,
                               bool transpose = false,
                               const std::string& phase = "redistribute") {
  if (!transpose) {
    if (!src.rows().same_blocking(new_rows) || !src.cols().same_blocking(new_cols))
      throw invalid_argument("redistribute: target blockings do not match the source");
  } else {
    if (!src.rows().same_blocking(new_cols) || !src.cols().same_blocking(new_rows))
      throw invalid_argument("redistribute: transposed target blockings do not match");
  }
  if (comm.nranks() < src.grid().size() || comm.nranks() < new_grid.size())
    throw invalid_argument("redistribute: communicator smaller than the involved grids");

  DistMatrix dst(std::move(new_rows), std::move(new_cols), new_grid);
  comm.run([&](int rank) {
    comm.set_phase(rank, phase);
    std::vector<detail::OutBlock> out;
    if (rank < src.nranks())
      src.local(rank).for_each([&](std::int64_t i, std::int64_t j, const DenseBlock& b) {
        detail::OutBlock ob;
        ob.i = transpose ? j : i;
        ob.j = transpose ? i : j;
        ob.block = transpose ? transpose_block(b) : b;
        ob.dest = dst.owner_rank(ob.i, ob.j);
        out.push_back(std::move(ob));
      });
    detail::exchange_blocks(comm, rank, std::move(out),
                            [&](std::int64_t i, std::int64_t j, DenseBlock&& blk) {
                              dst.local(rank).insert(i, j, std::move(blk), false);
                            });
  });
  return dst;
}

/// Routes every stored block of `src` into `dst`, accumulating into any
/// blocks already present.
inline void redistribute_add(SimComm& comm, const DistMatrix& src, DistMatrix& dst,
                             const std::string& phase = "redistribute") {
  if (!src.rows().same_blocking(dst.rows()) || !src.cols().same_blocking(dst.cols()))
    throw invalid_argument("redistribute_add: blockings do not conform");
  if (comm.nranks() < src.grid().size() || comm.nranks() < dst.grid().size())
    throw invalid_argument("redistribute_add: communicator smaller than the involved grids");
  comm.run([&](int rank) {
    comm.set_phase(rank, phase);
    std::vector<detail::OutBlock> out;
    if (rank < src.nranks())
      src.local(rank).for_each([&](std::int64_t i, std::int64_t j, const DenseBlock& b) {
        out.push_back(detail::OutBlock{dst.owner_rank(i, j), i, j, b});
      });
    detail::exchange_blocks(comm, rank, std::move(out),
                            [&](std::int64_t i, std::int64_t j, DenseBlock&& blk) {
                              dst.local(rank).insert(i, j, std::move(blk), true);
                            });
  });
}

}  // namespace blocktensor

#endif  // BLOCKTENSOR_MATRIX_HPP

// SPDX-FileCopyrightText: © 2026 blocktensor developers
//
// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCKTENSOR_GRID_HPP
#define BLOCKTENSOR_GRID_HPP

#include <string>
#include <vector>

#include "blocktensor/errors.hpp"

namespace blocktensor {

/// An n-dimensional logical arrangement of ranks. Ranks are enumerated in
/// row-major order over the grid coordinates (last dimension fastest).
class ProcessGrid {
 public:
  ProcessGrid() : dims_{1}, size_(1) {}

  explicit ProcessGrid(std::vector<int> dims) : dims_(std::move(dims)) {
    if (dims_.empty()) throw invalid_argument("ProcessGrid: dims must be non-empty");
    size_ = 1;
    for (int d : dims_) {
      if (d < 1) throw invalid_argument("ProcessGrid: every grid extent must be >= 1");
      size_ *= d;
    }
  }

  int ndims() const noexcept { return static_cast<int>(dims_.size()); }
  int dim(int i) const { return dims_.at(static_cast<std::size_t>(i)); }
  const std::vector<int>& dims() const noexcept { return dims_; }
  int size() const noexcept { return size_; }

  std::vector<int> coords_of(int rank) const {
    if (rank < 0 || rank >= size_)
      throw invalid_argument("coords_of: rank " + std::to_string(rank) + " out of range [0," +
                             std::to_string(size_) + ")");
    std::vector<int> coords(dims_.size());
    for (int d = ndims() - 1; d >= 0; --d) {
      coords[static_cast<std::size_t>(d)] = rank % dims_[static_cast<std::size_t>(d)];
      rank /= dims_[static_cast<std::size_t>(d)];
    }
    return coords;
  }

  int rank_of(const std::vector<int>& coords) const {
    if (coords.size() != dims_.size())
      throw invalid_argument("rank_of: expected " + std::to_string(dims_.size()) +
                             " coordinates, got " + std::to_string(coords.size()));
    int rank = 0;
    for (std::size_t d = 0; d < dims_.size(); ++d) {
      if (coords[d] < 0 || coords[d] >= dims_[d])
        throw invalid_argument("rank_of: coordinate " + std::to_string(coords[d]) +
                               " out of range for dimension " + std::to_string(d));
      rank = rank * dims_[d] + coords[d];
    }
    return rank;
  }

  friend bool operator==(const ProcessGrid& a, const ProcessGrid& b) {
    return a.dims_ == b.dims_;
  }
  friend bool operator!=(const ProcessGrid& a, const ProcessGrid& b) { return !(a == b); }

 private:
  std::vector<int> dims_;
  int size_;
};

/// One member of a partition of a parent grid along a single dimension.
/// `members` lists the parent ranks in ascending order; that order coincides
/// with row-major enumeration of the local grid.
struct Subgroup {
  ProcessGrid parent;
  int split_dim = 0;
  int factor = 1;
  int coord_begin = 0;  // slice [coord_begin, coord_end) along split_dim
  int coord_end = 0;
  std::vector<int> members;  // parent ranks, ascending
  ProcessGrid local_grid;

  int local_rank_of(int parent_rank) const {
    auto coords = parent.coords_of(parent_rank);
    const auto d = static_cast<std::size_t>(split_dim);
    if (coords[d] < coord_begin || coords[d] >= coord_end)
      throw invalid_argument("local_rank_of: rank not in subgroup");
    coords[d] -= coord_begin;
    return local_grid.rank_of(coords);
  }

  int parent_rank_of(int local_rank) const {
    auto coords = local_grid.coords_of(local_rank);
    coords[static_cast<std::size_t>(split_dim)] += coord_begin;
    return parent.rank_of(coords);
  }
};

/// Partitions `grid` into `factor` subgroups by slicing dimension `dim`.
/// When the extent does not divide evenly the remainder goes to the
/// lowest-indexed subgroups, so slice widths differ by at most one.
inline std::vector<Subgroup> split_grid(const ProcessGrid& grid, int dim, int factor) {
  if (dim < 0 || dim >= grid.ndims())
    throw invalid_argument("split_grid: dimension index out of range");
  const int extent = grid.dim(dim);
  if (factor < 1 || factor > extent)
    throw invalid_argument("split_grid: factor " + std::to_string(factor) +
                           " must be in [1," + std::to_string(extent) + "]");

  std::vector<Subgroup> groups;
  groups.reserve(static_cast<std::size_t>(factor));
  const int base = extent / factor;
  const int rem = extent % factor;
  int begin = 0;
  for (int s = 0; s < factor; ++s) {
    const int width = base + (s < rem ? 1 : 0);
    Subgroup g;
    g.parent = grid;
    g.split_dim = dim;
    g.factor = factor;
    g.coord_begin = begin;
    g.coord_end = begin + width;
    auto local_dims = grid.dims();
    local_dims[static_cast<std::size_t>(dim)] = width;
    g.local_grid = ProcessGrid(local_dims);
    for (int r = 0; r < grid.size(); ++r) {
      const auto coords = grid.coords_of(r);
      const int c = coords[static_cast<std::size_t>(dim)];
      if (c >= g.coord_begin && c < g.coord_end) g.members.push_back(r);
    }
    begin += width;
    groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace blocktensor

#endif  // BLOCKTENSOR_GRID_HPP

// SPDX-FileCopyrightText: © 2026 blocktensor developers
//
// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCKTENSOR_MULTIPLY_CANNON_HPP
#define BLOCKTENSOR_MULTIPLY_CANNON_HPP

#include <cstdint>
#include <map>
#include <vector>

#include "blocktensor/block.hpp"
#include "blocktensor/comm.hpp"
#include "blocktensor/matrix.hpp"

namespace blocktensor {

namespace detail {

/// Local batched contribution sum: for every (i,k) block of `tile_a` and
/// (k,j) block of `tile_b`, accumulates a_blk * b_blk into the (i,j) block of
/// `out`, creating zero blocks on demand. Batches are ordered by target
/// row-block, then column, then k, so the accumulation order is fixed.
template <class Store>
inline void multiply_tiles_into(const std::vector<TaggedBlock>& tile_a,
                                const std::vector<TaggedBlock>& tile_b, Store& out) {
  std::map<std::int64_t, std::vector<const TaggedBlock*>> b_by_k;
  for (const auto& tb : tile_b) b_by_k[tb.i].push_back(&tb);

  std::vector<BatchItem> batch;
  for (const auto& ta : tile_a) {
    auto it = b_by_k.find(ta.j);
    if (it == b_by_k.end()) continue;
    for (const TaggedBlock* tb : it->second)
      batch.push_back(BatchItem{&ta.block, &tb->block, ta.i, tb->j, ta.j});
  }
  order_batches(batch);
  for (const auto& bi : batch) {
    DenseBlock& c =
        out.get_or_create(bi.target_row_block, bi.target_col_block, bi.a_block->rows,
                          bi.b_block->cols);
    block_gemm_acc(c, *bi.a_block, *bi.b_block);
  }
}

inline std::vector<TaggedBlock> copy_local_blocks(const LocalStore& store) {
  std::vector<TaggedBlock> tile;
  store.for_each([&](std::int64_t i, std::int64_t j, const DenseBlock& b) {
    tile.push_back(TaggedBlock{i, j, b});
  });
  return tile;
}

}  // namespace detail

/// C <- C + A*B by ring-shifting A tiles along grid rows and B tiles along
/// grid columns over q = sqrt(P) steps. C blocks never travel. The skewed
/// initial alignment (row i rotated left by i, column j rotated up by j) is
/// established when the working tiles are formed; the q shift rounds are the
/// counted traffic, and every send is posted before the local compute of the
/// same step.
inline void multiply_cannon(SimComm& comm, const DistMatrix& a, const DistMatrix& b,
                            DistMatrix& c) {
  const ProcessGrid& grid = a.grid();
  if (grid.ndims() != 2 || grid.dim(0) != grid.dim(1))
    throw grid_error("multiply_cannon: grid must be square, got " +
                     std::to_string(grid.dim(0)) + "x" + std::to_string(grid.dim(1)));
  if (b.grid() != grid || c.grid() != grid)
    throw grid_error("multiply_cannon: operands must share one square grid");
  if (!a.cols().same_blocking(b.rows()))
    throw invalid_argument("multiply_cannon: inner blockings of A and B differ");
  if (!c.rows().same_blocking(a.rows()) || !c.cols().same_blocking(b.cols()))
    throw invalid_argument("multiply_cannon: C blockings do not conform");
  if (!a.cols().same_distribution(b.rows()))
    throw invalid_argument(
        "multiply_cannon: inner distributions of A and B differ; redistribute first");
  if (!c.rows().same_distribution(a.rows()) || !c.cols().same_distribution(b.cols()))
    throw invalid_argument("multiply_cannon: C distribution must match A rows x B cols");
  const int q = grid.dim(0);
  const int nprocs = grid.size();
  if (comm.nranks() < nprocs)
    throw invalid_argument("multiply_cannon: communicator smaller than the grid");

  // Skewed starting tiles: rank (r,c) begins holding A tiles of grid column
  // (c+r) mod q and B tiles of grid row (r+c) mod q.
  std::vector<std::vector<detail::TaggedBlock>> tile_a(static_cast<std::size_t>(nprocs));
  std::vector<std::vector<detail::TaggedBlock>> tile_b(static_cast<std::size_t>(nprocs));
  for (int rank = 0; rank < nprocs; ++rank) {
    const auto rc = grid.coords_of(rank);
    tile_a[static_cast<std::size_t>(rank)] =
        detail::copy_local_blocks(a.local(grid.rank_of({rc[0], (rc[1] + rc[0]) % q})));
    tile_b[static_cast<std::size_t>(rank)] =
        detail::copy_local_blocks(b.local(grid.rank_of({(rc[0] + rc[1]) % q, rc[1]})));
  }

  comm.run([&](int rank) {
    if (rank >= nprocs) return;
    comm.set_phase(rank, "cannon");
    const auto rc = grid.coords_of(rank);
    auto my_a = std::move(tile_a[static_cast<std::size_t>(rank)]);
    auto my_b = std::move(tile_b[static_cast<std::size_t>(rank)]);
    const int left = grid.rank_of({rc[0], (rc[1] + q - 1) % q});
    const int right = grid.rank_of({rc[0], (rc[1] + 1) % q});
    const int up = grid.rank_of({(rc[0] + q - 1) % q, rc[1]});
    const int down = grid.rank_of({(rc[0] + 1) % q, rc[1]});
    for (int step = 0; step < q; ++step) {
      if (q > 1) {
        comm.send(rank, left, detail::pack_blocks(my_a));
        comm.send(rank, up, detail::pack_blocks(my_b));
      }
      detail::multiply_tiles_into(my_a, my_b, c.local(rank));
      if (q > 1) {
        my_a = detail::unpack_blocks(comm.recv(rank, right));
        my_b = detail::unpack_blocks(comm.recv(rank, down));
      }
    }
  });
}

}  // namespace blocktensor

#endif  // BLOCKTENSOR_MULTIPLY_CANNON_HPP

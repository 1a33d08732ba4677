// SPDX-FileCopyrightText: © 2026 blocktensor developers
//
// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCKTENSOR_MULTIPLY_RECT_HPP
#define BLOCKTENSOR_MULTIPLY_RECT_HPP

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "blocktensor/comm.hpp"
#include "blocktensor/cost_model.hpp"
#include "blocktensor/matrix.hpp"
#include "blocktensor/multiply_cannon.hpp"
#include "blocktensor/partition.hpp"

namespace blocktensor {

enum class Algorithm { cannon, case1, case2 };

inline const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::cannon: return "cannon";
    case Algorithm::case1: return "case1";
    case Algorithm::case2: return "case2";
  }
  return "?";
}

/// Predicted per-process volume of one algorithm on a problem spec.
inline double predicted_volume(Algorithm a, const MultiplySpec& s) {
  switch (a) {
    case Algorithm::cannon: return cannon_volume(s);
    case Algorithm::case1: return case1_volume(s);
    case Algorithm::case2: return case2_volume(s);
  }
  throw invalid_argument("predicted_volume: unknown algorithm");
}

/// Picks the algorithm with the smallest predicted per-process volume.
/// Ties resolve in the order cannon, case1, case2.
inline Algorithm select_algorithm(double m, double n, double k, double occ_a, double occ_b,
                                  double occ_c_estimate, double nprocs) {
  MultiplySpec s;
  s.m = m;
  s.n = n;
  s.k = k;
  s.occ_a = occ_a;
  s.occ_b = occ_b;
  s.occ_c = occ_c_estimate;
  s.nprocs = nprocs;
  Algorithm best = Algorithm::cannon;
  double best_volume = cannon_volume(s);
  if (case1_volume(s) < best_volume) {
    best = Algorithm::case1;
    best_volume = case1_volume(s);
  }
  if (case2_volume(s) < best_volume) best = Algorithm::case2;
  return best;
}

namespace detail {

/// Unordered accumulation target for partial results that do not live on any
/// grid yet. Iteration order is (row, col).
struct MapStore {
  std::map<std::pair<std::int64_t, std::int64_t>, DenseBlock> blocks;

  DenseBlock& get_or_create(std::int64_t i, std::int64_t j, int m, int n) {
    auto [it, inserted] = blocks.try_emplace({i, j}, m, n);
    return it->second;
  }

  void accumulate(std::int64_t i, std::int64_t j, DenseBlock&& b) {
    auto it = blocks.find({i, j});
    if (it == blocks.end()) {
      blocks.emplace(std::pair{i, j}, std::move(b));
      return;
    }
    for (std::size_t t = 0; t < it->second.values.size(); ++t)
      it->second.values[t] += b.values[t];
  }
};

/// Wraps an axis's block sizes with a new grid placement, without
/// materializing any per-block arrays.
inline Axis relocated_axis(const Axis& source, std::function<int(std::int64_t)> dist_fn,
                           int extent) {
  return Axis::functional(
      source.n_blocks(), [source](std::int64_t b) { return source.size(b); },
      std::move(dist_fn), extent);
}

inline Axis slab_axis(const Axis& source, const ChunkPartition& slabs) {
  return relocated_axis(
      source, [slabs](std::int64_t b) { return slabs.part_of(b); }, slabs.parts());
}

inline Axis unsplit_axis(const Axis& source) {
  return relocated_axis(source, [](std::int64_t) { return 0; }, 1);
}

inline void check_conformal(const DistMatrix& a, const DistMatrix& b, const DistMatrix& c,
                            const char* who) {
  if (!a.cols().same_blocking(b.rows()))
    throw invalid_argument(std::string(who) + ": inner blockings of A and B differ");
  if (!c.rows().same_blocking(a.rows()) || !c.cols().same_blocking(b.cols()))
    throw invalid_argument(std::string(who) + ": C blockings do not conform");
}

}  // namespace detail

/// C <- C + A*B for the regime where the result is far smaller than the
/// inputs. A (transposed in flight) and B are redistributed over the
/// contracted dimension onto a linear grid of `nprocs` ranks, each rank forms
/// its local partial of the full result, and a rotating-segment ring combines
/// the partials in `nprocs` steps, overlapping each send with the local
/// summation. The reduced segments are finally routed back onto C's own
/// layout and added to it.
inline void multiply_reduce_case1(SimComm& comm, const DistMatrix& a, const DistMatrix& b,
                                  DistMatrix& c, int nprocs) {
  detail::check_conformal(a, b, c, "multiply_reduce_case1");
  if (nprocs < 1) throw invalid_argument("multiply_reduce_case1: nprocs must be positive");
  if (comm.nranks() < nprocs || comm.nranks() < a.grid().size() ||
      comm.nranks() < b.grid().size() || comm.nranks() < c.grid().size())
    throw invalid_argument("multiply_reduce_case1: communicator too small");

  const ChunkPartition k_slabs(a.cols().n_blocks(), nprocs);
  const ProcessGrid linear({nprocs, 1});

  // A lands transposed with the contracted dimension as its distributed rows.
  DistMatrix at = redistribute(comm, a, detail::slab_axis(a.cols(), k_slabs),
                               detail::unsplit_axis(a.rows()), linear, /*transpose=*/true);
  DistMatrix bl = redistribute(comm, b, detail::slab_axis(b.rows(), k_slabs),
                               detail::unsplit_axis(b.cols()), linear, /*transpose=*/false);

  const std::int64_t n_seg = static_cast<std::int64_t>(nprocs);
  const std::int64_t nbc = c.cols().n_blocks();
  auto segment_of = [nbc, n_seg](std::int64_t i, std::int64_t j) {
    return static_cast<int>((i * nbc + j) % n_seg);
  };

  comm.run([&](int rank) {
    detail::MapStore partial;
    if (rank < nprocs) {
      comm.set_phase(rank, "multiply");
      // local partial over this rank's K-slab; A blocks travel transposed
      std::vector<detail::TaggedBlock> tile_a;
      at.local(rank).for_each([&](std::int64_t k, std::int64_t i, const DenseBlock& blk) {
        tile_a.push_back(detail::TaggedBlock{i, k, transpose_block(blk)});
      });
      const auto tile_b = detail::copy_local_blocks(bl.local(rank));
      detail::multiply_tiles_into(tile_a, tile_b, partial);
    }

    comm.set_phase(rank, "reduce");
    if (nprocs > 1 && rank < nprocs) {
      const int next = (rank + 1) % nprocs;
      const int prev = (rank - 1 + nprocs) % nprocs;
      for (int t = 0; t < nprocs; ++t) {
        const int seg = (rank - t + nprocs) % nprocs;
        std::vector<detail::TaggedBlock> outgoing;
        for (auto it = partial.blocks.begin(); it != partial.blocks.end();) {
          if (segment_of(it->first.first, it->first.second) == seg) {
            outgoing.push_back(
                detail::TaggedBlock{it->first.first, it->first.second, std::move(it->second)});
            it = partial.blocks.erase(it);
          } else {
            ++it;
          }
        }
        comm.send(rank, next, detail::pack_blocks(outgoing));
        auto incoming = detail::unpack_blocks(comm.recv(rank, prev));
        for (auto& tb : incoming) partial.accumulate(tb.i, tb.j, std::move(tb.block));
      }
    }

    comm.set_phase(rank, "collect");
    std::vector<detail::OutBlock> out;
    for (auto& [key, blk] : partial.blocks)
      out.push_back(
          detail::OutBlock{c.owner_rank(key.first, key.second), key.first, key.second,
                           std::move(blk)});
    detail::exchange_blocks(comm, rank, std::move(out),
                            [&](std::int64_t i, std::int64_t j, DenseBlock&& blk) {
                              c.local(rank).insert(i, j, std::move(blk), true);
                            });
  });
}

/// C <- C + A*B for the regime where B is far smaller than A and C. A and C
/// are redistributed into row slabs on a linear grid of `nprocs` ranks and
/// stay resident; only B circulates. Each of the `nprocs` ring steps rotates
/// the virtual column window of A to match the B slab currently held, so A
/// data never moves.
inline void multiply_virtual_case2(SimComm& comm, const DistMatrix& a, const DistMatrix& b,
                                   DistMatrix& c, int nprocs) {
  detail::check_conformal(a, b, c, "multiply_virtual_case2");
  if (nprocs < 1) throw invalid_argument("multiply_virtual_case2: nprocs must be positive");
  if (comm.nranks() < nprocs || comm.nranks() < a.grid().size() ||
      comm.nranks() < b.grid().size() || comm.nranks() < c.grid().size())
    throw invalid_argument("multiply_virtual_case2: communicator too small");

  const ChunkPartition m_slabs(a.rows().n_blocks(), nprocs);
  const ChunkPartition k_slabs(a.cols().n_blocks(), nprocs);
  const ProcessGrid linear({nprocs, 1});

  DistMatrix al = redistribute(comm, a, detail::slab_axis(a.rows(), m_slabs),
                               detail::unsplit_axis(a.cols()), linear);
  DistMatrix bl = redistribute(comm, b, detail::slab_axis(b.rows(), k_slabs),
                               detail::unsplit_axis(b.cols()), linear);
  DistMatrix cl(detail::slab_axis(c.rows(), m_slabs), detail::unsplit_axis(c.cols()), linear);

  comm.run([&](int rank) {
    if (rank >= nprocs) return;
    comm.set_phase(rank, "ring");
    auto my_b = detail::copy_local_blocks(bl.local(rank));
    const int up = (rank - 1 + nprocs) % nprocs;
    const int down = (rank + 1) % nprocs;
    for (int step = 0; step < nprocs; ++step) {
      if (nprocs > 1) comm.send(rank, up, detail::pack_blocks(my_b));
      const int window = (rank + step) % nprocs;
      const std::int64_t k_lo = k_slabs.begin(window);
      const std::int64_t k_hi = k_slabs.end(window);
      std::vector<detail::TaggedBlock> tile_a;
      al.local(rank).for_each([&](std::int64_t i, std::int64_t k, const DenseBlock& blk) {
        if (k >= k_lo && k < k_hi) tile_a.push_back(detail::TaggedBlock{i, k, blk});
      });
      detail::multiply_tiles_into(tile_a, my_b, cl.local(rank));
      if (nprocs > 1) my_b = detail::unpack_blocks(comm.recv(rank, down));
    }
  });

  redistribute_add(comm, cl, c, "collect");
}

/// Runs the chosen algorithm. `nprocs` is the size of the linear grid for the
/// rectangular algorithms; the 2D algorithm runs on the operands' own grid.
inline void multiply_dispatch(SimComm& comm, Algorithm algo, const DistMatrix& a,
                              const DistMatrix& b, DistMatrix& c, int nprocs) {
  switch (algo) {
    case Algorithm::cannon: multiply_cannon(comm, a, b, c); return;
    case Algorithm::case1: multiply_reduce_case1(comm, a, b, c, nprocs); return;
    case Algorithm::case2: multiply_virtual_case2(comm, a, b, c, nprocs); return;
  }
  throw invalid_argument("multiply_dispatch: unknown algorithm");
}

/// Measured problem spec for A*B with a caller-supplied estimate (or
/// measurement) of the result occupancy.
inline MultiplySpec measured_spec(const DistMatrix& a, const DistMatrix& b, double occ_c,
                                  int nprocs) {
  MultiplySpec s;
  s.m = static_cast<double>(a.rows().total_elements());
  s.k = static_cast<double>(a.cols().total_elements());
  s.n = static_cast<double>(b.cols().total_elements());
  s.occ_a = a.occupancy();
  s.occ_b = b.occupancy();
  s.occ_c = occ_c;
  s.nprocs = nprocs;
  return s;
}

}  // namespace blocktensor

#endif  // BLOCKTENSOR_MULTIPLY_RECT_HPP

// SPDX-FileCopyrightText: © 2026 blocktensor developers
//
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "blocktensor/matrix.hpp"
#include "support/oracles.hpp"

using namespace blocktensor;
using namespace testsupport;

TEST_CASE("new_matrix basics") {
  ProcessGrid g({1, 1});
  auto m = new_matrix(Blocking({1}), Blocking({1}), g, {0}, {0});
  CHECK(m.stored_blocks() == 0);
  CHECK(m.occupancy() == 0.0);

  SECTION("round-robin distribution follows the modulo rule") {
    ProcessGrid g2({2, 1});
    auto m2 = new_matrix_round_robin(Blocking({2, 2, 2, 2}), Blocking({4}), g2);
    CHECK(m2.rows().dist(0) == 0);
    CHECK(m2.rows().dist(1) == 1);
    CHECK(m2.rows().dist(2) == 0);
    CHECK(m2.rows().dist(3) == 1);
  }

  SECTION("mismatched distribution length is rejected") {
    CHECK_THROWS_AS(new_matrix(Blocking({2, 2}), Blocking({4}), ProcessGrid({2, 1}), {0}, {0}),
                    invalid_argument);
  }
  SECTION("distribution coordinate out of grid range is rejected") {
    CHECK_THROWS_AS(new_matrix(Blocking({2}), Blocking({4}), ProcessGrid({2, 1}), {2}, {0}),
                    invalid_argument);
  }
}

TEST_CASE("put/get round trip") {
  ProcessGrid g({2, 2});
  auto m = new_matrix_round_robin(Blocking({2, 3}), Blocking({1, 2}), g);

  DenseBlock b(3, 2, {1, 2, 3, 4, 5, 6});
  m.put_block(1, 1, b);
  REQUIRE(m.get_block(1, 1) != nullptr);
  CHECK(*m.get_block(1, 1) == b);
  CHECK(m.get_block(0, 0) == nullptr);

  SECTION("accumulating the additive inverse leaves an explicit zero block") {
    DenseBlock neg = b;
    for (auto& v : neg.values) v = -v;
    m.put_block(1, 1, neg, true);
    REQUIRE(m.get_block(1, 1) != nullptr);
    for (double v : m.get_block(1, 1)->values) CHECK(v == 0.0);
    CHECK(m.stored_blocks() == 1);  // still present, still counted
  }

  SECTION("wrong-owner access is an ownership error") {
    const int owner = m.owner_rank(1, 1);
    const int thief = (owner + 1) % g.size();
    CHECK_THROWS_AS(m.put_block_at(thief, 1, 1, b), ownership_error);
    CHECK_THROWS_AS(m.get_block_at(thief, 1, 1), ownership_error);
    CHECK_NOTHROW(m.get_block_at(owner, 1, 1));
  }

  SECTION("block dimension mismatch is rejected") {
    CHECK_THROWS_AS(m.put_block(0, 0, DenseBlock(5, 5)), invalid_argument);
  }
}

TEST_CASE("occupancy") {
  ProcessGrid g({2, 2});
  Blocking b10 = Blocking::uniform(10, 10);
  auto m = new_matrix_round_robin(b10, b10, g);
  CHECK(m.occupancy() == 0.0);

  SECTION("37 distinct random blocks on a 100x100 matrix give 0.37") {
    Rng rng(5);
    std::set<std::pair<int, int>> chosen;
    while (chosen.size() < 37)
      chosen.insert({static_cast<int>(rng.uniform_int(0, 9)),
                     static_cast<int>(rng.uniform_int(0, 9))});
    for (auto [i, j] : chosen) m.put_block(i, j, DenseBlock(10, 10));
    CHECK(m.occupancy() == Catch::Approx(0.37).epsilon(1e-14));
  }

  SECTION("all blocks present gives exactly 1") {
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j) m.put_block(i, j, DenseBlock(10, 10));
    CHECK(m.occupancy() == 1.0);
  }
}

TEST_CASE("transpose") {
  Rng rng(6);
  ProcessGrid g({2, 3});
  auto rows = random_blocking(rng, 17, 1, 5);
  auto cols = random_blocking(rng, 23, 1, 5);
  auto m = random_matrix(rng, rows, cols, g, 0.4);

  SECTION("matches the dense oracle") {
    auto t = m.transpose();
    CHECK(t.to_dense() == dense_transpose(m.to_dense(), 17, 23));
  }
  SECTION("is an involution") {
    auto tt = m.transpose().transpose();
    CHECK(equal_content(m, tt));
  }
  SECTION("diagonal-only matrix keeps its block set") {
    auto d = new_matrix_round_robin(Blocking({2, 2}), Blocking({2, 2}), ProcessGrid({2, 2}));
    d.put_block(0, 0, DenseBlock(2, 2, {1, 2, 3, 4}));
    d.put_block(1, 1, DenseBlock(2, 2, {5, 6, 7, 8}));
    auto t = d.transpose();
    CHECK(t.stored_blocks() == 2);
    CHECK(*t.get_block(0, 0) == transpose_block(*d.get_block(0, 0)));
    CHECK(*t.get_block(1, 1) == transpose_block(*d.get_block(1, 1)));
  }
  SECTION("occupancy is invariant") {
    CHECK(m.transpose().occupancy() == Catch::Approx(m.occupancy()).epsilon(1e-14));
  }
}

TEST_CASE("add and trace") {
  Rng rng(7);
  ProcessGrid g({2, 2});
  Blocking blk({4, 6});
  auto a = random_matrix(rng, blk, blk, g, 0.7);

  SECTION("a - a vanishes") {
    auto copy = a;
    copy.add(a, 1.0, -1.0);
    for (double v : copy.to_dense()) CHECK(v == 0.0);
  }

  SECTION("nonconformal operands are rejected") {
    auto other = random_matrix(rng, Blocking({5, 5}), blk, g, 0.5);
    CHECK_THROWS_AS(a.add(other, 1.0, 1.0), invalid_argument);
  }

  SECTION("dense oracle on alpha*a + beta*b") {
    auto b = random_matrix(rng, blk, blk, g, 0.7);
    auto expect = a.to_dense();
    auto bd = b.to_dense();
    for (std::size_t t = 0; t < expect.size(); ++t) expect[t] = 0.5 * expect[t] - 2.0 * bd[t];
    auto c = a;
    c.add(b, 0.5, -2.0);
    auto got = c.to_dense();
    for (std::size_t t = 0; t < got.size(); ++t)
      CHECK(got[t] == Catch::Approx(expect[t]).margin(1e-13));
  }

  SECTION("trace of a blocked identity is the dimension") {
    auto id = identity_matrix(blk, g);
    CHECK(id.trace() == 10.0);
  }

  SECTION("trace requires a square matrix") {
    auto rect = random_matrix(rng, Blocking({4}), Blocking({6}), g, 1.0);
    CHECK_THROWS_AS(rect.trace(), invalid_argument);
  }

  SECTION("trace(A*B) == trace(B*A) via the dense oracle") {
    auto b = random_matrix(rng, blk, blk, g, 0.6);
    auto ad = a.to_dense(), bd = b.to_dense();
    std::vector<double> ab(100, 0.0), ba(100, 0.0);
    dense_gemm_acc(ab, ad, bd, 10, 10, 10);
    dense_gemm_acc(ba, bd, ad, 10, 10, 10);
    double tr_ab = 0, tr_ba = 0;
    for (int d = 0; d < 10; ++d) {
      tr_ab += ab[static_cast<std::size_t>(d * 10 + d)];
      tr_ba += ba[static_cast<std::size_t>(d * 10 + d)];
    }
    CHECK(tr_ab == Catch::Approx(tr_ba).epsilon(1e-12));
  }
}

TEST_CASE("local stores remain well formed after mutation") {
  Rng rng(8);
  ProcessGrid g({2, 2});
  auto m = new_matrix_round_robin(Blocking({2, 2, 2}), Blocking({2, 2, 2}), g);
  // interleaved inserts, including replacements and accumulations
  for (int round = 0; round < 3; ++round)
    for (std::int64_t i = 0; i < 3; ++i)
      for (std::int64_t j = 0; j < 3; ++j) {
        if (!rng.bernoulli(0.6)) continue;
        DenseBlock b(2, 2);
        for (auto& v : b.values) v = rng.normal();
        m.put_block(i, j, std::move(b), round % 2 == 1);
      }
  CHECK(m.well_formed());
  CHECK(m.transpose().well_formed());
}

TEST_CASE("redistribute") {
  Rng rng(9);
  ProcessGrid g22({2, 2});
  Blocking rows = random_blocking(rng, 24, 2, 5);
  Blocking cols = random_blocking(rng, 20, 2, 5);
  auto m = random_matrix(rng, rows, cols, g22, 0.5);

  SECTION("identical layout moves nothing") {
    SimComm comm(ProcessGrid({4}));
    auto copy = redistribute(comm, m, Axis::round_robin(rows, 2), Axis::round_robin(cols, 2),
                             g22);
    CHECK(comm.ledger().total_elements_sent() == 0);
    CHECK(equal_content(m, copy));
  }

  SECTION("one-rank to one-rank relayout is free") {
    ProcessGrid g11({1, 1});
    auto single = random_matrix(rng, rows, cols, g11, 0.5);
    SimComm comm(ProcessGrid({1}));
    auto moved = redistribute(comm, single, Axis::round_robin(rows, 1),
                              Axis::round_robin(cols, 1), ProcessGrid({1, 1}));
    CHECK(comm.ledger().total_elements_sent() == 0);
    CHECK(equal_content(single, moved));
  }

  SECTION("2x2 grid to linear 4 grid: content preserved, moved blocks charged") {
    ProcessGrid g41({4, 1});
    Axis new_rows = Axis::round_robin(rows, 4);
    Axis new_cols = Axis::round_robin(cols, 1);

    // independent count of elements that must change ranks
    DistMatrix target_shape(new_rows, new_cols, g41);
    std::int64_t expected_moved = 0;
    m.for_each_global([&](int rank, std::int64_t i, std::int64_t j, const DenseBlock& b) {
      if (target_shape.owner_rank(i, j) != rank) expected_moved += b.size();
    });

    SimComm comm(ProcessGrid({4}));
    auto moved = redistribute(comm, m, new_rows, new_cols, g41);
    CHECK(moved.to_dense() == m.to_dense());
    CHECK(moved.well_formed());
    CHECK(comm.ledger().total_elements_sent() == expected_moved);
    CHECK(comm.ledger().total_elements_sent() == comm.ledger().total_elements_received());
    CHECK(moved.occupancy() == Catch::Approx(m.occupancy()).epsilon(1e-14));
  }

  SECTION("transpose in flight lands blocks at swapped coordinates") {
    ProcessGrid g41({4, 1});
    SimComm comm(ProcessGrid({4}));
    auto t = redistribute(comm, m, Axis::round_robin(cols, 4), Axis::round_robin(rows, 1), g41,
                          /*transpose=*/true);
    CHECK(t.to_dense() == dense_transpose(m.to_dense(), 24, 20));
  }
}

TEST_CASE("redistribute randomized against the dense oracle") {
  Rng rng(10);
  for (int trial = 0; trial < 25; ++trial) {
    const auto rows = random_blocking(rng, rng.uniform_int(4, 40), 1, 9);
    const auto cols = random_blocking(rng, rng.uniform_int(4, 40), 1, 9);
    ProcessGrid src_grid({static_cast<int>(rng.uniform_int(1, 3)),
                          static_cast<int>(rng.uniform_int(1, 3))});
    ProcessGrid dst_grid({static_cast<int>(rng.uniform_int(1, 3)),
                          static_cast<int>(rng.uniform_int(1, 3))});
    auto m = random_matrix(rng, rows, cols, src_grid, rng.uniform());
    SimComm comm(ProcessGrid({std::max(src_grid.size(), dst_grid.size())}));
    auto moved = redistribute(comm, m, Axis::round_robin(rows, dst_grid.dim(0)),
                              Axis::round_robin(cols, dst_grid.dim(1)), dst_grid);
    REQUIRE(moved.to_dense() == m.to_dense());
    REQUIRE(moved.well_formed());
  }
}

TEST_CASE("functional axes answer queries without storing arrays") {
  const std::int64_t nb = 10000;
  Axis rows = Axis::functional(
      nb, [](std::int64_t) { return 3; }, [](std::int64_t b) { return static_cast<int>(b % 4); },
      4);
  CHECK(rows.n_blocks() == nb);
  CHECK(rows.size(1234) == 3);
  CHECK(rows.dist(1234) == 2);
  CHECK(rows.index_entries() == 0);
  CHECK(rows.total_elements() == 3 * nb);

  ProcessGrid g({4, 1});
  DistMatrix m(rows, Axis(Blocking({2}), {0}, 1), g);
  m.put_block(9999, 0, DenseBlock(3, 2));
  CHECK(m.get_block(9999, 0) != nullptr);
  // footprint: a handful of store entries, nothing proportional to nb
  for (int r = 0; r < 4; ++r) CHECK(m.index_entries(r) < 16);
}

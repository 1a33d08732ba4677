// SPDX-FileCopyrightText: © 2026 blocktensor developers
//
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "blocktensor/comm.hpp"

using namespace blocktensor;

namespace {

Packet make_packet(std::size_t n_values, double fill = 1.0) {
  Packet p;
  p.values.assign(n_values, fill);
  return p;
}

}  // namespace

TEST_CASE("single message updates both ledger sides") {
  for (auto sched : {Schedule::sequential, Schedule::parallel}) {
    SimComm comm(ProcessGrid({2}), sched);
    comm.run([&](int rank) {
      if (rank == 0) comm.send(0, 1, make_packet(100));
      if (rank == 1) comm.recv(1, 0);
    });
    CHECK(comm.ledger().rank_total(0).elements_sent == 100);
    CHECK(comm.ledger().rank_total(1).elements_received == 100);
    CHECK(comm.ledger().rank_total(0).elements_received == 0);
    CHECK(comm.ledger().rank_total(1).elements_sent == 0);
  }
}

TEST_CASE("self-sends are free") {
  SimComm comm(ProcessGrid({2}));
  comm.run([&](int rank) {
    comm.send(rank, rank, make_packet(42));
    auto p = comm.recv(rank, rank);
    CHECK(p.values.size() == 42);
  });
  for (int r = 0; r < 2; ++r) {
    CHECK(comm.ledger().rank_total(r).elements_sent == 0);
    CHECK(comm.ledger().rank_total(r).elements_received == 0);
  }
}

TEST_CASE("ring shift of one 10-element block among 4 ranks") {
  for (auto sched : {Schedule::sequential, Schedule::parallel}) {
    SimComm comm(ProcessGrid({4}), sched);
    comm.run([&](int rank) {
      comm.send(rank, (rank + 1) % 4, make_packet(10, rank));
      auto p = comm.recv(rank, (rank + 3) % 4);
      CHECK(p.values[0] == static_cast<double>((rank + 3) % 4));
    });
    for (int r = 0; r < 4; ++r) {
      CHECK(comm.ledger().rank_total(r).elements_sent == 10);
      CHECK(comm.ledger().rank_total(r).elements_received == 10);
    }
  }
}

TEST_CASE("messages between a fixed pair are FIFO") {
  SimComm comm(ProcessGrid({2}));
  auto order = comm.run([&](int rank) -> std::vector<double> {
    if (rank == 0) {
      for (int t = 0; t < 5; ++t) comm.send(0, 1, make_packet(1, t));
      return {};
    }
    std::vector<double> seen;
    for (int t = 0; t < 5; ++t) seen.push_back(comm.recv(1, 0).values[0]);
    return seen;
  });
  CHECK(order[1] == std::vector<double>({0, 1, 2, 3, 4}));
}

TEST_CASE("conservation: total sent equals total received at quiescence") {
  SimComm comm(ProcessGrid({3, 2}), Schedule::parallel);
  comm.run([&](int rank) {
    const int n = comm.nranks();
    for (int t = 0; t < n; ++t) comm.send(rank, (rank + t) % n, make_packet((rank + 1u) * 3u));
    for (int t = 0; t < n; ++t) comm.recv(rank, (rank - t + n) % n);
  });
  CHECK(comm.ledger().total_elements_sent() == comm.ledger().total_elements_received());
}

TEST_CASE("sequential and parallel schedules give identical ledgers") {
  auto body = [](SimComm& comm, int rank) {
    const int n = comm.nranks();
    comm.set_phase(rank, "shift");
    comm.send(rank, (rank + 1) % n, make_packet(static_cast<std::size_t>(rank) + 1));
    auto p = comm.recv(rank, (rank - 1 + n) % n);
    return p.values.size();
  };
  auto [res_seq, led_seq] = run_spmd(ProcessGrid({5}), body, Schedule::sequential);
  auto [res_par, led_par] = run_spmd(ProcessGrid({5}), body, Schedule::parallel);
  CHECK(res_seq == res_par);
  CHECK(led_seq == led_par);
  CHECK(led_seq.phase_elements_sent("shift") == 1 + 2 + 3 + 4 + 5);
}

TEST_CASE("deadlock is detected and names the blocked ranks") {
  for (auto sched : {Schedule::sequential, Schedule::parallel}) {
    SimComm comm(ProcessGrid({2}), sched);
    CHECK_THROWS_AS(comm.run([&](int rank) { comm.recv(rank, 1 - rank); }), deadlock_error);
  }
  SimComm comm(ProcessGrid({3}));
  try {
    comm.run([&](int rank) {
      if (rank == 2) return;
      comm.recv(rank, 2);
    });
    FAIL("expected deadlock");
  } catch (const deadlock_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("0") != std::string::npos);
    CHECK(msg.find("1") != std::string::npos);
  }
}

TEST_CASE("worker exceptions tear the run down and are rethrown") {
  SimComm comm(ProcessGrid({3}));
  CHECK_THROWS_AS(comm.run([&](int rank) {
    if (rank == 1) throw invalid_argument("boom");
    if (rank == 0) comm.recv(0, 1);  // would block forever without teardown
  }),
                  invalid_argument);
}

TEST_CASE("phase breakdown separates traffic") {
  SimComm comm(ProcessGrid({2}));
  comm.run([&](int rank) {
    comm.set_phase(rank, "a");
    comm.send(rank, 1 - rank, make_packet(5));
    comm.recv(rank, 1 - rank);
    comm.set_phase(rank, "b");
    comm.send(rank, 1 - rank, make_packet(7));
    comm.recv(rank, 1 - rank);
  });
  CHECK(comm.ledger().phase_elements_sent("a") == 10);
  CHECK(comm.ledger().phase_elements_sent("b") == 14);
  CHECK(comm.ledger().rank_phase(0, "a").elements_sent == 5);
  CHECK(comm.ledger().rank_phase(0, "b").elements_received == 7);
}

TEST_CASE("meta traffic is accounted in its own column") {
  SimComm comm(ProcessGrid({2}));
  comm.run([&](int rank) {
    Packet p;
    p.values.assign(3, 1.0);
    p.meta.assign(4, 7);
    comm.send(rank, 1 - rank, std::move(p));
    comm.recv(rank, 1 - rank);
  });
  CHECK(comm.ledger().rank_total(0).elements_sent == 3);
  CHECK(comm.ledger().rank_total(0).meta_sent == 4);
  CHECK(comm.ledger().rank_total(0).meta_received == 4);
}

TEST_CASE("repeated runs with the same inputs produce identical ledgers") {
  auto once = [] {
    SimComm comm(ProcessGrid({4}), Schedule::parallel);
    comm.run([&](int rank) {
      for (int t = 1; t < 4; ++t)
        comm.send(rank, (rank + t) % 4, make_packet(static_cast<std::size_t>(rank * t + 1)));
      for (int t = 1; t < 4; ++t) comm.recv(rank, (rank - t + 4) % 4);
    });
    return comm.ledger();
  };
  CHECK(once() == once());
}

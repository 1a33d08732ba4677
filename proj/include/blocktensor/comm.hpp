// SPDX-FileCopyrightText: © 2026 blocktensor developers
//
// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCKTENSOR_COMM_HPP
#define BLOCKTENSOR_COMM_HPP

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

#include "blocktensor/errors.hpp"
#include "blocktensor/grid.hpp"

namespace blocktensor {

/// How rank workers are interleaved. Results and ledgers are identical for
/// both schedules; `sequential` runs one worker at a time in rank order,
/// handing over at each blocking point.
enum class Schedule { parallel, sequential };

/// A message between ranks. `values` carries matrix elements (the unit the
/// volume ledger counts); `meta` carries block coordinates and similar index
/// data, accounted in a separate ledger column.
struct Packet {
  std::vector<double> values;
  std::vector<std::int64_t> meta;
};

struct TrafficCounters {
  std::int64_t elements_sent = 0;
  std::int64_t elements_received = 0;
  std::int64_t meta_sent = 0;
  std::int64_t meta_received = 0;

  TrafficCounters& operator+=(const TrafficCounters& o) {
    elements_sent += o.elements_sent;
    elements_received += o.elements_received;
    meta_sent += o.meta_sent;
    meta_received += o.meta_received;
    return *this;
  }
  friend bool operator==(const TrafficCounters& a, const TrafficCounters& b) {
    return a.elements_sent == b.elements_sent && a.elements_received == b.elements_received &&
           a.meta_sent == b.meta_sent && a.meta_received == b.meta_received;
  }
};

/// Per-rank counters of communicated matrix elements, kept both as totals and
/// broken down by phase label. Self-sends are not charged.
class Ledger {
 public:
  Ledger() = default;
  explicit Ledger(int nranks)
      : totals_(static_cast<std::size_t>(nranks)),
        by_phase_(static_cast<std::size_t>(nranks)) {}

  int nranks() const noexcept { return static_cast<int>(totals_.size()); }

  const TrafficCounters& rank_total(int rank) const {
    return totals_.at(static_cast<std::size_t>(rank));
  }

  TrafficCounters rank_phase(int rank, std::string_view phase) const {
    const auto& m = by_phase_.at(static_cast<std::size_t>(rank));
    auto it = m.find(phase);
    return it == m.end() ? TrafficCounters{} : it->second;
  }

  std::int64_t total_elements_sent() const {
    std::int64_t s = 0;
    for (const auto& t : totals_) s += t.elements_sent;
    return s;
  }
  std::int64_t total_elements_received() const {
    std::int64_t s = 0;
    for (const auto& t : totals_) s += t.elements_received;
    return s;
  }
  double mean_elements_sent() const {
    return totals_.empty() ? 0.0
                           : static_cast<double>(total_elements_sent()) /
                                 static_cast<double>(totals_.size());
  }
  std::int64_t max_elements_sent() const {
    std::int64_t m = 0;
    for (const auto& t : totals_) m = std::max(m, t.elements_sent);
    return m;
  }
  std::int64_t phase_elements_sent(std::string_view phase) const {
    std::int64_t s = 0;
    for (const auto& m : by_phase_) {
      auto it = m.find(phase);
      if (it != m.end()) s += it->second.elements_sent;
    }
    return s;
  }

  void add_sent(int rank, const std::string& phase, std::int64_t elements, std::int64_t meta) {
    auto& t = totals_[static_cast<std::size_t>(rank)];
    t.elements_sent += elements;
    t.meta_sent += meta;
    auto& p = by_phase_[static_cast<std::size_t>(rank)][phase];
    p.elements_sent += elements;
    p.meta_sent += meta;
  }
  void add_received(int rank, const std::string& phase, std::int64_t elements,
                    std::int64_t meta) {
    auto& t = totals_[static_cast<std::size_t>(rank)];
    t.elements_received += elements;
    t.meta_received += meta;
    auto& p = by_phase_[static_cast<std::size_t>(rank)][phase];
    p.elements_received += elements;
    p.meta_received += meta;
  }

  /// Folds a child ledger in, translating child rank r to rank_map[r].
  void merge(const Ledger& child, const std::vector<int>& rank_map) {
    for (int r = 0; r < child.nranks(); ++r) {
      const int w = rank_map.at(static_cast<std::size_t>(r));
      totals_[static_cast<std::size_t>(w)] += child.totals_[static_cast<std::size_t>(r)];
      for (const auto& [phase, c] : child.by_phase_[static_cast<std::size_t>(r)])
        by_phase_[static_cast<std::size_t>(w)][phase] += c;
    }
  }

  void reset() {
    for (auto& t : totals_) t = TrafficCounters{};
    for (auto& m : by_phase_) m.clear();
  }

  friend bool operator==(const Ledger& a, const Ledger& b) {
    return a.totals_ == b.totals_ && a.by_phase_ == b.by_phase_;
  }

 private:
  std::vector<TrafficCounters> totals_;
  std::vector<std::map<std::string, TrafficCounters, std::less<>>> by_phase_;
};

/// Simulated communicator over a process grid. One worker thread is run per
/// rank; messages between a fixed (from, to) pair are FIFO. send() enqueues
/// without blocking, recv() blocks the calling worker until the matching
/// message arrives. All workers blocked at once is reported as a deadlock
/// naming the blocked ranks.
class SimComm {
 public:
  explicit SimComm(ProcessGrid grid, Schedule schedule = Schedule::parallel)
      : grid_(std::move(grid)),
        schedule_(schedule),
        nranks_(grid_.size()),
        queues_(static_cast<std::size_t>(nranks_) * static_cast<std::size_t>(nranks_)),
        ledger_(nranks_),
        state_(static_cast<std::size_t>(nranks_), WorkerState::runnable),
        waiting_from_(static_cast<std::size_t>(nranks_), -1),
        phase_(static_cast<std::size_t>(nranks_)),
        errors_(static_cast<std::size_t>(nranks_)) {}

  const ProcessGrid& grid() const noexcept { return grid_; }
  int nranks() const noexcept { return nranks_; }
  Schedule schedule() const noexcept { return schedule_; }
  const Ledger& ledger() const noexcept { return ledger_; }
  Ledger& ledger() noexcept { return ledger_; }
  void reset_ledger() { ledger_.reset(); }

  /// Labels subsequent traffic of `rank` in the per-phase ledger breakdown.
  void set_phase(int rank, std::string label) {
    std::lock_guard<std::mutex> lk(mu_);
    phase_[static_cast<std::size_t>(rank)] = std::move(label);
  }

  void send(int from, int to, Packet packet) {
    std::unique_lock<std::mutex> lk(mu_);
    if (failed_) throw abort_signal{};
    check_rank(from, "send");
    check_rank(to, "send");
    const auto elements = static_cast<std::int64_t>(packet.values.size());
    const auto meta = static_cast<std::int64_t>(packet.meta.size());
    queue(from, to).push_back(std::move(packet));
    if (from != to)
      ledger_.add_sent(from, phase_[static_cast<std::size_t>(from)], elements, meta);
    cv_.notify_all();
  }

  Packet recv(int at, int from) {
    std::unique_lock<std::mutex> lk(mu_);
    check_rank(at, "recv");
    check_rank(from, "recv");
    for (;;) {
      if (failed_) throw abort_signal{};
      auto& q = queue(from, at);
      if (!q.empty()) {
        Packet p = std::move(q.front());
        q.pop_front();
        if (from != at)
          ledger_.add_received(at, phase_[static_cast<std::size_t>(at)],
                               static_cast<std::int64_t>(p.values.size()),
                               static_cast<std::int64_t>(p.meta.size()));
        return p;
      }
      state_[static_cast<std::size_t>(at)] = WorkerState::waiting;
      waiting_from_[static_cast<std::size_t>(at)] = from;
      if (schedule_ == Schedule::sequential && current_ == at)
        pass_token(at);
      else if (schedule_ == Schedule::parallel)
        detect_parallel_deadlock();
      cv_.wait(lk, [&] {
        return failed_ ||
               (!queue(from, at).empty() &&
                (schedule_ == Schedule::parallel || current_ == at));
      });
      state_[static_cast<std::size_t>(at)] = WorkerState::runnable;
      waiting_from_[static_cast<std::size_t>(at)] = -1;
    }
  }

  /// Runs one worker per rank to completion. `body` is invoked as body(rank)
  /// and may only touch rank-local state and this communicator.
  template <class Fn>
  auto run(Fn&& body) {
    using R = std::invoke_result_t<Fn&, int>;
    prepare_run();
    if constexpr (std::is_void_v<R>) {
      launch_and_join([&](int rank) { body(rank); });
      finish_run();
    } else {
      std::vector<R> results(static_cast<std::size_t>(nranks_));
      launch_and_join([&](int rank) { results[static_cast<std::size_t>(rank)] = body(rank); });
      finish_run();
      return results;
    }
  }

 private:
  struct abort_signal {};
  enum class WorkerState { runnable, waiting, finished };

  std::deque<Packet>& queue(int from, int to) {
    return queues_[static_cast<std::size_t>(from) * static_cast<std::size_t>(nranks_) +
                   static_cast<std::size_t>(to)];
  }

  void check_rank(int r, const char* who) const {
    if (r < 0 || r >= nranks_)
      throw invalid_argument(std::string(who) + ": rank " + std::to_string(r) +
                             " out of range [0," + std::to_string(nranks_) + ")");
  }

  void prepare_run() {
    std::lock_guard<std::mutex> lk(mu_);
    for (auto& q : queues_)
      if (!q.empty()) throw error("run: message queues not empty at start");
    std::fill(state_.begin(), state_.end(), WorkerState::runnable);
    std::fill(waiting_from_.begin(), waiting_from_.end(), -1);
    for (auto& p : phase_) p.clear();
    for (auto& e : errors_) e = nullptr;
    failed_ = false;
    deadlock_message_.clear();
    current_ = (schedule_ == Schedule::sequential) ? 0 : -1;
  }

  void launch_and_join(const std::function<void(int)>& invoke) {
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(nranks_));
    for (int r = 0; r < nranks_; ++r) {
      workers.emplace_back([this, r, &invoke] {
        wait_for_turn(r);
        try {
          invoke(r);
        } catch (const abort_signal&) {
          // torn down after a failure elsewhere
        } catch (...) {
          register_error(r, std::current_exception());
        }
        on_finish(r);
      });
    }
    for (auto& w : workers) w.join();
  }

  void finish_run() {
    for (int r = 0; r < nranks_; ++r)
      if (errors_[static_cast<std::size_t>(r)])
        std::rethrow_exception(errors_[static_cast<std::size_t>(r)]);
    if (!deadlock_message_.empty()) throw deadlock_error(deadlock_message_);
    for (int from = 0; from < nranks_; ++from)
      for (int to = 0; to < nranks_; ++to)
        if (!queue(from, to).empty())
          throw error("run: unconsumed message from rank " + std::to_string(from) +
                      " to rank " + std::to_string(to));
  }

  void wait_for_turn(int rank) {
    std::unique_lock<std::mutex> lk(mu_);
    cv_.wait(lk, [&] {
      return failed_ || schedule_ == Schedule::parallel || current_ == rank;
    });
  }

  void register_error(int rank, std::exception_ptr e) {
    std::lock_guard<std::mutex> lk(mu_);
    errors_[static_cast<std::size_t>(rank)] = std::move(e);
    failed_ = true;
    cv_.notify_all();
  }

  void on_finish(int rank) {
    std::lock_guard<std::mutex> lk(mu_);
    state_[static_cast<std::size_t>(rank)] = WorkerState::finished;
    if (schedule_ == Schedule::sequential) {
      if (current_ == rank) pass_token(rank);
    } else {
      detect_parallel_deadlock();
    }
    cv_.notify_all();
  }

  // Sequential scheduling: hand the token to the next rank, in rank order
  // after `from`, that can make progress. Called with mu_ held.
  void pass_token(int from) {
    for (int step = 1; step <= nranks_; ++step) {
      const int r = (from + step) % nranks_;
      const auto i = static_cast<std::size_t>(r);
      if (state_[i] == WorkerState::finished) continue;
      if (state_[i] == WorkerState::runnable ||
          (state_[i] == WorkerState::waiting && !queue(waiting_from_[i], r).empty())) {
        current_ = r;
        cv_.notify_all();
        return;
      }
    }
    bool all_finished = true;
    for (const auto& s : state_)
      if (s != WorkerState::finished) all_finished = false;
    if (all_finished) {
      current_ = -1;
      return;
    }
    declare_deadlock();
  }

  // Parallel scheduling: a true deadlock is every unfinished worker parked on
  // an empty queue. Sends happen under mu_, so the check is exact. Called
  // with mu_ held.
  void detect_parallel_deadlock() {
    if (failed_) return;
    bool any_unfinished = false;
    for (int r = 0; r < nranks_; ++r) {
      const auto i = static_cast<std::size_t>(r);
      if (state_[i] == WorkerState::finished) continue;
      any_unfinished = true;
      if (state_[i] != WorkerState::waiting) return;
      if (!queue(waiting_from_[i], r).empty()) return;
    }
    if (any_unfinished) declare_deadlock();
  }

  void declare_deadlock() {
    std::ostringstream msg;
    msg << "deadlock: blocked ranks";
    for (int r = 0; r < nranks_; ++r) {
      const auto i = static_cast<std::size_t>(r);
      if (state_[i] == WorkerState::waiting)
        msg << " " << r << "(waiting on " << waiting_from_[i] << ")";
    }
    deadlock_message_ = msg.str();
    failed_ = true;
    cv_.notify_all();
  }

  ProcessGrid grid_;
  Schedule schedule_;
  int nranks_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::deque<Packet>> queues_;
  Ledger ledger_;
  std::vector<WorkerState> state_;
  std::vector<int> waiting_from_;
  std::vector<std::string> phase_;
  std::vector<std::exception_ptr> errors_;
  int current_ = -1;
  bool failed_ = false;
  std::string deadlock_message_;
};

/// Convenience wrapper: builds a communicator over `grid`, runs `body` as one
/// worker per rank, and returns the per-rank results together with the ledger.
template <class Fn>
auto run_spmd(const ProcessGrid& grid, Fn&& body, Schedule schedule = Schedule::parallel) {
  using R = std::invoke_result_t<Fn&, SimComm&, int>;
  SimComm comm(grid, schedule);
  if constexpr (std::is_void_v<R>) {
    comm.run([&](int rank) { body(comm, rank); });
    return comm.ledger();
  } else {
    auto results = comm.run([&](int rank) { return body(comm, rank); });
    return std::pair<std::vector<R>, Ledger>(std::move(results), comm.ledger());
  }
}

}  // namespace blocktensor

#endif  // BLOCKTENSOR_COMM_HPP

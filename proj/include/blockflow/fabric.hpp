#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "blockflow/core.hpp"

namespace blockflow {

// Raised on the rank whose wait timed out; `blocked` lists every rank that
// was inside a wait at that moment.
class DeadlockError : public Error {
 public:
  DeadlockError(const std::string& what, std::vector<std::string> blocked)
      : Error(what), blocked(std::move(blocked)) {}
  std::vector<std::string> blocked;
};

// Raised on ranks woken because another rank failed.
class AbortedError : public Error {
 public:
  using Error::Error;
};

inline double default_timeout_s() {
  if (const char* v = std::getenv("BLOCKFLOW_TIMEOUT_S")) {
    char* end = nullptr;
    const double t = std::strtod(v, &end);
    if (end != v && t > 0.0) return t;
  }
  return 5.0;
}

// In-process point-to-point transport between simulated ranks. Messages on a
// (src, dst, tag) channel match in posting order. Sends complete only once the
// matching receive is posted unless the fabric is eager.
class Fabric {
 public:
  struct Request {
    int src = 0;
    int dst = 0;
    int tag = 0;
    std::uint64_t seq = 0;
    bool send = false;
    double* out = nullptr;
    std::size_t len = 0;
  };

  struct Totals {
    std::uint64_t sends = 0;
    std::uint64_t receives_completed = 0;
  };

  Fabric(int np, double timeout_s, bool eager = false) : np_(np), timeout_(timeout_s), eager_(eager), blocked_(np) {}

  int size() const { return np_; }
  double timeout() const { return timeout_; }

  Request isend(int src, int dst, int tag, std::span<const double> data) {
    std::lock_guard lock(m_);
    Channel& ch = channels_[{src, dst, tag}];
    Request r{src, dst, tag, ch.sends++, true, nullptr, data.size()};
    ch.data.emplace(r.seq, std::vector<double>(data.begin(), data.end()));
    ++totals_.sends;
    cv_.notify_all();
    return r;
  }

  Request irecv(int dst, int src, int tag, double* out, std::size_t len) {
    std::lock_guard lock(m_);
    Channel& ch = channels_[{src, dst, tag}];
    Request r{src, dst, tag, ch.recvs++, false, out, len};
    cv_.notify_all();
    return r;
  }

  void wait_all(int rank, const std::vector<Request>& reqs) {
    std::unique_lock lock(m_);
    blocked_[static_cast<std::size_t>(rank)] = describe(rank, reqs);
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_);
    while (true) {
      if (aborted_) {
        blocked_[static_cast<std::size_t>(rank)].clear();
        throw AbortedError("rank " + std::to_string(rank) + " aborted");
      }
      bool done = true;
      for (const auto& r : reqs)
        if (!complete(r)) {
          done = false;
          break;
        }
      if (done) break;
      if (cv_.wait_until(lock, deadline) == std::cv_status::timeout && !aborted_) {
        bool again = true;
        for (const auto& r : reqs) again = again && complete(r);
        if (again) break;
        throw timed_out(rank);
      }
    }
    for (const auto& r : reqs) {
      if (r.send) continue;
      Channel& ch = channels_.at({r.src, r.dst, r.tag});
      auto it = ch.data.find(r.seq);
      if (it->second.size() != r.len)
        throw Error("rank " + std::to_string(rank) + " received " + std::to_string(it->second.size()) +
                    " values on tag " + std::to_string(r.tag) + ", expected " + std::to_string(r.len));
      std::copy(it->second.begin(), it->second.end(), r.out);
      ch.data.erase(it);
      ++totals_.receives_completed;
    }
    blocked_[static_cast<std::size_t>(rank)].clear();
  }

  void barrier(int rank) {
    std::unique_lock lock(m_);
    const std::uint64_t gen = barrier_gen_;
    if (++barrier_count_ == np_) {
      barrier_count_ = 0;
      ++barrier_gen_;
      cv_.notify_all();
      return;
    }
    blocked_[static_cast<std::size_t>(rank)] = "rank " + std::to_string(rank) + " in barrier";
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_);
    while (barrier_gen_ == gen) {
      if (aborted_) {
        blocked_[static_cast<std::size_t>(rank)].clear();
        throw AbortedError("rank " + std::to_string(rank) + " aborted");
      }
      if (cv_.wait_until(lock, deadline) == std::cv_status::timeout && barrier_gen_ == gen && !aborted_)
        throw timed_out(rank);
    }
    blocked_[static_cast<std::size_t>(rank)].clear();
  }

  void abort() {
    std::lock_guard lock(m_);
    aborted_ = true;
    cv_.notify_all();
  }

  bool aborted() const {
    std::lock_guard lock(m_);
    return aborted_;
  }

  Totals totals() const {
    std::lock_guard lock(m_);
    return totals_;
  }

  // Messages posted but never received.
  std::size_t undelivered() const {
    std::lock_guard lock(m_);
    std::size_t n = 0;
    for (const auto& [k, ch] : channels_) n += ch.data.size();
    return n;
  }

 private:
  struct Channel {
    std::uint64_t sends = 0;
    std::uint64_t recvs = 0;
    std::map<std::uint64_t, std::vector<double>> data;
  };

  bool complete(const Request& r) const {
    const auto it = channels_.find({r.src, r.dst, r.tag});
    if (it == channels_.end()) return false;
    return r.send ? (eager_ || it->second.recvs > r.seq) : it->second.sends > r.seq;
  }

  static std::string describe(int rank, const std::vector<Request>& reqs) {
    std::string s = "rank " + std::to_string(rank) + " waits on";
    std::map<std::pair<int, bool>, int> peers;
    for (const auto& r : reqs) ++peers[{r.send ? r.dst : r.src, r.send}];
    for (const auto& [k, n] : peers)
      s += std::string(k.second ? " send to " : " recv from ") + std::to_string(k.first) + " (" + std::to_string(n) +
           ")";
    return s;
  }

  DeadlockError timed_out(int rank) {
    std::vector<std::string> blocked;
    for (const auto& b : blocked_)
      if (!b.empty()) blocked.push_back(b);
    aborted_ = true;
    blocked_[static_cast<std::size_t>(rank)].clear();
    cv_.notify_all();
    return DeadlockError("rank " + std::to_string(rank) + " timed out after " + std::to_string(timeout_) + " s",
                         std::move(blocked));
  }

  int np_;
  double timeout_;
  bool eager_;
  mutable std::mutex m_;
  std::condition_variable cv_;
  std::map<std::tuple<int, int, int>, Channel> channels_;
  std::vector<std::string> blocked_;
  bool aborted_ = false;
  int barrier_count_ = 0;
  std::uint64_t barrier_gen_ = 0;
  Totals totals_;
};

}  // namespace blockflow

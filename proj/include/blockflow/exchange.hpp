#pragma once

#include <chrono>
#include <exception>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "blockflow/cases.hpp"
#include "blockflow/decomp.hpp"
#include "blockflow/fabric.hpp"
#include "blockflow/schedule.hpp"
#include "blockflow/simulation.hpp"

namespace blockflow {

enum class PackStrategy { sliced, packed };
enum class Transport { staged, direct };
enum class BufferMode { transient, persistent };

inline std::string_view to_string(PackStrategy p) { return p == PackStrategy::sliced ? "sliced" : "packed"; }
inline std::string_view to_string(Transport t) { return t == Transport::staged ? "staged" : "direct"; }
inline std::string_view to_string(BufferMode b) { return b == BufferMode::transient ? "transient" : "persistent"; }

struct ExchangeStrategy {
  PackStrategy pack = PackStrategy::packed;
  WaitPolicy wait = WaitPolicy::per_block;
  Transport transport = Transport::direct;
  BufferMode buffers = BufferMode::persistent;
  bool reorder = true;
};

inline constexpr int kExchangeFields = 5;

struct TransferCounters {
  int rank = 0;
  std::uint64_t messages = 0;        // remote messages sent
  std::uint64_t runs = 0;            // contiguous transfers, local copies included
  std::uint64_t bytes = 0;           // remote payload bytes sent
  std::uint64_t staging_copies = 0;  // extra copies through a staging buffer
  std::uint64_t waits = 0;           // wait-all calls
  std::uint64_t allocations = 0;     // exchange buffers allocated

  TransferCounters& operator+=(const TransferCounters& o) {
    messages += o.messages;
    runs += o.runs;
    bytes += o.bytes;
    staging_copies += o.staging_copies;
    waits += o.waits;
    allocations += o.allocations;
    return *this;
  }
  TransferCounters scaled(std::uint64_t n) const {
    TransferCounters c = *this;
    c.messages *= n;
    c.runs *= n;
    c.bytes *= n;
    c.staging_copies *= n;
    c.waits *= n;
    return c;
  }
  bool same_traffic(const TransferCounters& o) const {
    return messages == o.messages && runs == o.runs && bytes == o.bytes && staging_copies == o.staging_copies &&
           waits == o.waits;
  }
};

// ---------------------------------------------------------------------------
// Packing

// Contiguous runs per field: one per i-line of the donor box when sliced.
inline std::size_t runs_per_field(const Box& donor, PackStrategy p) {
  if (p == PackStrategy::packed) return 1;
  return static_cast<std::size_t>(donor.extent(1)) * static_cast<std::size_t>(donor.extent(2));
}

inline void pack_face(const BlockSolver& donor, const Box& src, int field, double* out) {
  std::size_t n = 0;
  for_each_cell(src, [&](int i, int j, int k) { out[n++] = donor.prim[field][donor.cells(i, j, k)]; });
}

inline void unpack_face(BlockSolver& owner, const BoundarySpec& spec, const Block& donor, const TransferRegion& t,
                        int field, const double* in) {
  const Index3 lo = t.src.lo;
  const std::size_t e0 = static_cast<std::size_t>(t.src.extent(0));
  const std::size_t e1 = static_cast<std::size_t>(t.src.extent(1));
  for_each_cell(t.dst, [&](int i, int j, int k) {
    const Index3 m = map_to_neighbor(spec, *owner.block, donor, {i, j, k});
    const std::size_t off = static_cast<std::size_t>(m[0] - lo[0]) +
                            e0 * (static_cast<std::size_t>(m[1] - lo[1]) + e1 * static_cast<std::size_t>(m[2] - lo[2]));
    owner.prim[field][owner.cells(i, j, k)] = in[off];
  });
}

// ---------------------------------------------------------------------------
// Group-ordered execution shared by the solver exchange and abstract runs.

template <class Post, class Finish>
void run_groups(Fabric& fabric, int rank, const std::vector<const ScheduleEntry*>& entries, Post post,
                Finish finish, std::uint64_t& waits) {
  std::vector<Fabric::Request> reqs;
  std::vector<const ScheduleEntry*> pending;
  int group = -1;
  auto flush = [&] {
    if (pending.empty()) return;
    fabric.wait_all(rank, reqs);
    ++waits;
    finish(pending);
    reqs.clear();
    pending.clear();
  };
  for (const ScheduleEntry* e : entries) {
    if (e->local) {
      post(*e, reqs);
      continue;
    }
    if (e->group != group) {
      flush();
      group = e->group;
    }
    post(*e, reqs);
    pending.push_back(e);
  }
  flush();
}

// ---------------------------------------------------------------------------
// Per-rank exchange

class RankExchange {
 public:
  RankExchange(int rank, const DecompositionPlan& plan, const ExchangeSchedule& schedule, ExchangeStrategy st,
               Fabric& fabric, std::vector<BlockSolver>& blocks)
      : rank_(rank), plan_(&plan), st_(st), fabric_(&fabric), blocks_(&blocks) {
    counters_.rank = rank;
    for (std::size_t b = 0; b < blocks.size(); ++b) local_[blocks[b].block->id] = b;
    const auto& list = schedule.ranks[static_cast<std::size_t>(rank)];
    for (const auto& e : list) {
      if (e.axis >= 3) throw DecompError("schedule entry on invalid axis");
      by_axis_[static_cast<std::size_t>(e.axis)].push_back(&e);
    }
    const auto& B = plan.children.boundaries;
    for (const auto& e : list) {
      Slot s;
      const BoundarySpec& X = B[static_cast<std::size_t>(e.spec)];
      const BoundarySpec& Y = B[static_cast<std::size_t>(e.partner)];
      s.recv = transfer_region(X, plan.children.block(X.owner), plan.children.block(X.neighbor));
      s.send = transfer_region(Y, plan.children.block(Y.owner), plan.children.block(Y.neighbor)).src;
      slots_[e.spec] = s;
    }
  }

  void fill(int axis) {
    const auto& B = plan_->children.boundaries;
    auto post = [&](const ScheduleEntry& e, std::vector<Fabric::Request>& reqs) {
      Slot& s = slots_.at(e.spec);
      const BoundarySpec& X = B[static_cast<std::size_t>(e.spec)];
      if (e.local) {
        copy_connected(local(X.owner), X, local(X.neighbor));
        counters_.runs += kExchangeFields * runs_per_field(s.recv.src, st_.pack);
        return;
      }
      const BlockSolver& me = local(X.owner);
      const std::size_t ns = s.send.count(), nr = s.recv.src.count();
      if (st_.buffers == BufferMode::transient || s.send_buf.empty()) {
        s.send_buf.assign(kExchangeFields * ns, 0.0);
        s.recv_buf.assign(kExchangeFields * nr, 0.0);
        counters_.allocations += 2;
      }
      if (st_.transport == Transport::staged) {
        s.stage_in.assign(s.recv_buf.size(), 0.0);
        s.stage_out.assign(s.send_buf.size(), 0.0);
      }
      const std::size_t sr = runs_per_field(s.send, st_.pack), rr = runs_per_field(s.recv.src, st_.pack);
      const std::size_t slen = ns / sr, rlen = nr / rr;
      for (int v = 0; v < kExchangeFields; ++v) {
        double* buf = s.send_buf.data() + v * ns;
        pack_face(me, s.send, v, buf);
        for (std::size_t r = 0; r < sr; ++r) {
          const double* msg = buf + r * slen;
          if (st_.transport == Transport::staged) {
            double* st = s.stage_out.data() + v * ns + r * slen;
            std::copy(msg, msg + slen, st);
            ++counters_.staging_copies;
            msg = st;
          }
          reqs.push_back(fabric_->isend(rank_, e.peer, e.partner, {msg, slen}));
          ++counters_.messages;
          ++counters_.runs;
          counters_.bytes += slen * sizeof(double);
        }
        for (std::size_t r = 0; r < rr; ++r) {
          double* dst = (st_.transport == Transport::staged ? s.stage_in.data() : s.recv_buf.data()) + v * nr + r * rlen;
          reqs.push_back(fabric_->irecv(rank_, e.peer, e.spec, dst, rlen));
        }
      }
    };
    auto finish = [&](const std::vector<const ScheduleEntry*>& done) {
      for (const ScheduleEntry* e : done) {
        Slot& s = slots_.at(e->spec);
        const BoundarySpec& X = B[static_cast<std::size_t>(e->spec)];
        if (st_.transport == Transport::staged) {
          std::copy(s.stage_in.begin(), s.stage_in.end(), s.recv_buf.begin());
          counters_.staging_copies += kExchangeFields * runs_per_field(s.recv.src, st_.pack);
        }
        BlockSolver& me = local(X.owner);
        const Block& donor = plan_->children.block(X.neighbor);
        for (int v = 0; v < kExchangeFields; ++v)
          unpack_face(me, X, donor, s.recv, v, s.recv_buf.data() + v * s.recv.src.count());
      }
    };
    run_groups(*fabric_, rank_, by_axis_[static_cast<std::size_t>(axis)], post, finish, counters_.waits);
  }

  const TransferCounters& counters() const { return counters_; }

 private:
  struct Slot {
    TransferRegion recv;
    Box send;
    std::vector<double> send_buf, recv_buf, stage_in, stage_out;
  };

  BlockSolver& local(int id) {
    const auto it = local_.find(id);
    if (it == local_.end()) throw DecompError("block " + std::to_string(id) + " is not on rank " + std::to_string(rank_));
    return (*blocks_)[it->second];
  }

  int rank_;
  const DecompositionPlan* plan_;
  ExchangeStrategy st_;
  Fabric* fabric_;
  std::vector<BlockSolver>* blocks_;
  std::map<int, std::size_t> local_;
  std::array<std::vector<const ScheduleEntry*>, 3> by_axis_;
  std::map<int, Slot> slots_;
  TransferCounters counters_;
};

// Analytic traffic of one complete ghost fill (all phases) per rank.
inline std::vector<TransferCounters> count_transfers(const DecompositionPlan& plan, const ExchangeSchedule& schedule,
                                                     const ExchangeStrategy& st) {
  const auto& B = plan.children.boundaries;
  std::vector<TransferCounters> out(static_cast<std::size_t>(plan.np));
  for (int r = 0; r < plan.np; ++r) {
    TransferCounters& c = out[static_cast<std::size_t>(r)];
    c.rank = r;
    std::map<std::pair<int, int>, bool> groups;
    for (const auto& e : schedule.ranks[static_cast<std::size_t>(r)]) {
      const BoundarySpec& X = B[static_cast<std::size_t>(e.spec)];
      const BoundarySpec& Y = B[static_cast<std::size_t>(e.partner)];
      const Box recv = transfer_region(X, plan.children.block(X.owner), plan.children.block(X.neighbor)).src;
      if (e.local) {
        c.runs += kExchangeFields * runs_per_field(recv, st.pack);
        continue;
      }
      const Box send = transfer_region(Y, plan.children.block(Y.owner), plan.children.block(Y.neighbor)).src;
      const std::uint64_t ms = kExchangeFields * runs_per_field(send, st.pack);
      const std::uint64_t mr = kExchangeFields * runs_per_field(recv, st.pack);
      c.messages += ms;
      c.runs += ms;
      c.bytes += kExchangeFields * send.count() * sizeof(double);
      if (st.transport == Transport::staged) c.staging_copies += ms + mr;
      groups[{e.axis, e.group}] = true;
    }
    c.waits = groups.size();
  }
  return out;
}

struct CommVolume {
  int rank = 0;
  std::uint64_t bytes = 0;     // sent to other ranks
  std::uint64_t messages = 0;  // sent to other ranks
};

// Remote traffic per rank for `fills` complete ghost fills, from face areas,
// ghost depth and field count alone.
inline std::vector<CommVolume> estimate_comm_volume(const DecompositionPlan& plan,
                                                    PackStrategy pack = PackStrategy::packed, std::uint64_t fills = 1) {
  std::vector<CommVolume> out(static_cast<std::size_t>(plan.np));
  for (int r = 0; r < plan.np; ++r) out[static_cast<std::size_t>(r)].rank = r;
  for (const auto& s : plan.children.boundaries) {
    if (!s.connected) continue;
    const int donor = plan.rank_of(s.neighbor);
    if (donor == plan.rank_of(s.owner)) continue;
    const Box g = ghost_box(plan.children.block(s.owner), s.face, s.cells);
    auto& v = out[static_cast<std::size_t>(donor)];
    v.bytes += fills * kExchangeFields * g.count() * sizeof(double);
    v.messages += fills * kExchangeFields * runs_per_field(g, pack);
  }
  return out;
}

inline std::uint64_t total_comm_bytes(const std::vector<CommVolume>& v) {
  std::uint64_t b = 0;
  for (const auto& x : v) b += x.bytes;
  return b;
}

// ---------------------------------------------------------------------------
// Abstract schedule execution: one value per link, no solver.

struct ScheduleOutcome {
  bool completed = false;
  bool deadlocked = false;
  std::string error;
  std::vector<std::string> blocked;
  Fabric::Totals totals;
  std::size_t undelivered = 0;
};

inline ScheduleOutcome execute_schedule(const ExchangeSchedule& s, double timeout_s, bool eager = false) {
  Fabric fabric(s.np, timeout_s, eager);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(s.np));
  std::vector<std::thread> threads;
  for (int r = 0; r < s.np; ++r)
    threads.emplace_back([&, r] {
      try {
        std::vector<const ScheduleEntry*> list;
        for (const auto& e : s.ranks[static_cast<std::size_t>(r)]) list.push_back(&e);
        std::map<int, double> inbox;
        const double payload = r;
        std::uint64_t waits = 0;
        auto post = [&](const ScheduleEntry& e, std::vector<Fabric::Request>& reqs) {
          if (e.local) return;
          reqs.push_back(fabric.isend(r, e.peer, e.partner, {&payload, 1}));
          reqs.push_back(fabric.irecv(r, e.peer, e.spec, &inbox[e.spec], 1));
        };
        run_groups(fabric, r, list, post, [](const auto&) {}, waits);
      } catch (...) {
        errors[static_cast<std::size_t>(r)] = std::current_exception();
        fabric.abort();
      }
    });
  for (auto& t : threads) t.join();
  ScheduleOutcome out;
  out.completed = true;
  for (const auto& e : errors) {
    if (!e) continue;
    out.completed = false;
    try {
      std::rethrow_exception(e);
    } catch (const DeadlockError& d) {
      out.deadlocked = true;
      out.error = d.what();
      out.blocked = d.blocked;
    } catch (const AbortedError&) {
    } catch (const std::exception& x) {
      if (out.error.empty()) out.error = x.what();
    }
  }
  out.totals = fabric.totals();
  out.undelivered = fabric.undelivered();
  return out;
}

// ---------------------------------------------------------------------------
// Distributed run

class RankFailure : public Error {
 public:
  RankFailure(int rank, const std::string& what)
      : Error("rank " + std::to_string(rank) + ": " + what), rank(rank) {}
  int rank;
};

struct DistributedResult {
  Solution solution;
  ResidualHistory history;
  std::vector<TransferCounters> counters;
  ExchangeSchedule schedule;
  long steps = 0;
  bool converged = false;
  double seconds = 0.0;
  Fabric::Totals totals;
  std::size_t undelivered = 0;
};

inline DistributedResult run_distributed(const CaseSetup& c, const SchemeConfig& cfg, const DecompositionPlan& plan,
                                         const ExchangeStrategy& st, const StopControl& stop,
                                         double timeout_s = default_timeout_s()) {
  cfg.validate();
  const int np = plan.np;
  DistributedResult out;
  out.schedule = build_schedule(plan, relink_connected(plan), st.wait, st.reorder);

  const CaseContext ctx = make_context(c, cfg);
  std::vector<std::vector<BlockSolver>> blocks(static_cast<std::size_t>(np));
  std::vector<std::vector<int>> owned(static_cast<std::size_t>(np));
  for (const auto& info : plan.info) owned[static_cast<std::size_t>(info.rank)].push_back(info.id);
  for (int r = 0; r < np; ++r) {
    auto& list = blocks[static_cast<std::size_t>(r)];
    list.resize(owned[static_cast<std::size_t>(r)].size());
    for (std::size_t b = 0; b < list.size(); ++b) {
      const int id = owned[static_cast<std::size_t>(r)][b];
      const ChildInfo& info = plan.info[static_cast<std::size_t>(id)];
      std::vector<BoundarySpec> phys;
      for (const auto& s : plan.children.boundaries)
        if (s.owner == id && !s.connected) phys.push_back(s);
      init_block_solver(list[b], plan.children.block(id), std::move(phys));
      list[b].parent = plan.parents.index_of(info.parent);
      list[b].offset = info.offset;
      set_interior(list[b], ctx, [&c](Vec3 x) { return c.initial(x); });
    }
  }

  // Residual squares gathered per parent and summed in serial order.
  std::vector<std::array<std::vector<double>, 5>> board(plan.parents.blocks.size());
  for (std::size_t p = 0; p < board.size(); ++p)
    for (auto& v : board[p]) v.assign(plan.parents.blocks[p].cell_count(), 0.0);
  std::array<double, 5> reduced{};

  Fabric fabric(np, timeout_s);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(np));
  std::vector<TransferCounters> counters(static_cast<std::size_t>(np));
  std::vector<ResidualHistory> histories(static_cast<std::size_t>(np));
  std::vector<long> steps(static_cast<std::size_t>(np), 0);
  std::vector<bool> conv(static_cast<std::size_t>(np), false);
  std::vector<double> secs(static_cast<std::size_t>(np), 0.0);

  auto worker = [&](int r) {
    auto& mine = blocks[static_cast<std::size_t>(r)];
    RankExchange ex(r, plan, out.schedule, st, fabric, mine);
    StepEngine eng;
    eng.blocks = &mine;
    eng.cfg = cfg;
    eng.ctx = ctx;
    eng.history.set_flux_reference(c.free, c.gas);
    eng.fill_connected = [&ex](int axis) { ex.fill(axis); };
    eng.reduce_sum_squares = [&, r] {
      for (const auto& b : mine) {
        const Index3 pd = plan.parents.blocks[static_cast<std::size_t>(b.parent)].dims;
        auto& dst = board[static_cast<std::size_t>(b.parent)];
        for_each_cell(b.block->interior(), [&](int i, int j, int k) {
          const std::size_t q = b.cells(i, j, k);
          const std::size_t o = static_cast<std::size_t>(i - 1 + b.offset[0]) +
                                static_cast<std::size_t>(pd[0]) *
                                    (static_cast<std::size_t>(j - 1 + b.offset[1]) +
                                     static_cast<std::size_t>(pd[1]) * static_cast<std::size_t>(k - 1 + b.offset[2]));
          for (int v = 0; v < 5; ++v) dst[v][o] = b.res[v][q] * b.res[v][q];
        });
      }
      fabric.barrier(r);
      if (r == 0) {
        std::array<double, 5> acc{};
        for (const auto& p : board)
          for (std::size_t q = 0; q < p[0].size(); ++q)
            for (int v = 0; v < 5; ++v) acc[v] += p[v][q];
        reduced = acc;
      }
      fabric.barrier(r);
      return reduced;
    };
    fabric.barrier(r);
    const auto t0 = std::chrono::steady_clock::now();
    conv[static_cast<std::size_t>(r)] = eng.run(stop);
    secs[static_cast<std::size_t>(r)] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    counters[static_cast<std::size_t>(r)] = ex.counters();
    histories[static_cast<std::size_t>(r)] = eng.history;
    steps[static_cast<std::size_t>(r)] = eng.steps;
  };

  std::vector<std::thread> threads;
  for (int r = 0; r < np; ++r)
    threads.emplace_back([&, r] {
      try {
        worker(r);
      } catch (...) {
        errors[static_cast<std::size_t>(r)] = std::current_exception();
        fabric.abort();
      }
    });
  for (auto& t : threads) t.join();

  std::exception_ptr deadlock, failure;
  int failed_rank = -1;
  for (int r = 0; r < np; ++r) {
    const auto& e = errors[static_cast<std::size_t>(r)];
    if (!e) continue;
    try {
      std::rethrow_exception(e);
    } catch (const DeadlockError&) {
      if (!deadlock) deadlock = e;
    } catch (const AbortedError&) {
    } catch (...) {
      if (!failure) {
        failure = e;
        failed_rank = r;
      }
    }
  }
  if (failure) {
    try {
      std::rethrow_exception(failure);
    } catch (const std::exception& x) {
      throw RankFailure(failed_rank, x.what());
    }
  }
  if (deadlock) std::rethrow_exception(deadlock);

  out.solution = make_empty_solution(plan.parents);
  for (const auto& list : blocks)
    for (const auto& b : list) scatter_into(out.solution, static_cast<std::size_t>(b.parent), b);
  out.history = histories[0];
  out.counters = counters;
  out.steps = steps[0];
  out.converged = conv[0];
  for (double s : secs) out.seconds = std::max(out.seconds, s);
  out.totals = fabric.totals();
  out.undelivered = fabric.undelivered();
  return out;
}

// Two children per rank on the periodic annulus: the natural boundary order
// leaves every rank waiting on a peer that is itself waiting.
inline DecompositionPlan make_deadlock_plan(const CaseSetup& c) {
  DecompositionPlan plan = decompose_lattice(c.grid, {{8, 1, 1}});
  std::vector<int> map;
  for (const auto& info : plan.info) map.push_back(info.id / 2);
  assign_ranks(plan, map, 4);
  return plan;
}

}  // namespace blockflow

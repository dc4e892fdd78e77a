#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "blockflow/decomp.hpp"

namespace blockflow {

enum class WaitPolicy { per_block, deferred_all };

inline std::string_view to_string(WaitPolicy w) { return w == WaitPolicy::per_block ? "per_block" : "deferred_all"; }

// One connected boundary as seen by its owning rank: post a send of the
// partner's ghost data and a receive into `spec`'s ghosts, then wait.
struct ScheduleEntry {
  int spec = 0;
  int partner = 0;
  int rank = 0;
  int peer = 0;
  int axis = 0;
  int block = 0;
  bool local = false;
  int group = -1;  // wait group; -1 for local copies
  std::vector<int> desc;          // block, face, range of `spec`
  std::vector<int> partner_desc;  // same for `partner`
};

struct ExchangeSchedule {
  int np = 1;
  WaitPolicy policy = WaitPolicy::per_block;
  bool reordered = false;
  std::vector<std::vector<ScheduleEntry>> ranks;

  int group_count(int r) const {
    int g = 0;
    for (const auto& e : ranks[static_cast<std::size_t>(r)]) g = std::max(g, e.group + 1);
    return g;
  }
};

namespace detail {

inline std::vector<int> describe(const BoundarySpec& s) {
  return {s.owner, static_cast<int>(s.face), s.cells.lo[0], s.cells.lo[1], s.cells.lo[2],
          s.cells.hi[0], s.cells.hi[1], s.cells.hi[2]};
}

using ReorderKey = std::tuple<int, int, int, std::vector<int>, int>;

inline ReorderKey canonical_key(const ScheduleEntry& e) {
  const bool mine_low = e.rank < e.peer || (e.rank == e.peer && e.spec < e.partner);
  return {e.axis, std::min(e.rank, e.peer), std::max(e.rank, e.peer), mine_low ? e.desc : e.partner_desc,
          mine_low ? e.spec : e.partner};
}

}  // namespace detail

// Wait groups: per_block closes a group whenever the owning block or phase
// changes; deferred_all uses a single group per phase.
inline void assign_groups(ExchangeSchedule& s, WaitPolicy policy) {
  s.policy = policy;
  for (auto& list : s.ranks) {
    int g = -1;
    int last_block = -1, last_axis = -1;
    for (auto& e : list) {
      if (e.local) {
        e.group = -1;
        continue;
      }
      const bool fresh = g < 0 || e.axis != last_axis || (policy == WaitPolicy::per_block && e.block != last_block);
      if (fresh) ++g;
      e.group = g;
      last_block = e.block;
      last_axis = e.axis;
    }
  }
}

// Sorts each rank's entries by a key both endpoints of a link agree on.
inline void reorder_boundaries(ExchangeSchedule& s) {
  for (auto& list : s.ranks)
    std::stable_sort(list.begin(), list.end(), [](const ScheduleEntry& a, const ScheduleEntry& b) {
      return detail::canonical_key(a) < detail::canonical_key(b);
    });
  s.reordered = true;
  assign_groups(s, s.policy);
}

// Natural order: phase, then owning block, then boundary order.
inline ExchangeSchedule build_schedule(const DecompositionPlan& plan, const std::vector<Link>& links,
                                       WaitPolicy policy, bool reorder) {
  ExchangeSchedule s;
  s.np = plan.np;
  s.ranks.resize(static_cast<std::size_t>(plan.np));
  const auto& B = plan.children.boundaries;
  for (const auto& l : links) {
    ScheduleEntry e;
    e.spec = l.spec;
    e.partner = l.partner_spec;
    e.rank = l.rank;
    e.peer = l.nbr_rank;
    e.axis = B[static_cast<std::size_t>(l.spec)].axis();
    e.block = l.owner_block;
    e.local = l.local;
    e.desc = detail::describe(B[static_cast<std::size_t>(l.spec)]);
    e.partner_desc = detail::describe(B[static_cast<std::size_t>(l.partner_spec)]);
    s.ranks[static_cast<std::size_t>(l.rank)].push_back(e);
  }
  for (auto& list : s.ranks)
    std::stable_sort(list.begin(), list.end(), [](const ScheduleEntry& a, const ScheduleEntry& b) {
      return std::tie(a.axis, a.block, a.spec) < std::tie(b.axis, b.block, b.spec);
    });
  s.policy = policy;
  if (reorder)
    reorder_boundaries(s);
  else
    assign_groups(s, policy);
  return s;
}

// Random abstract topology: `links` rank pairs, every entry its own block,
// entries shuffled per rank. Spec ids are 2l and 2l+1 for link l.
inline ExchangeSchedule random_topology(std::uint32_t seed, int np, int links, WaitPolicy policy = WaitPolicy::per_block) {
  if (np < 2) throw DecompError("random topology needs at least 2 ranks");
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> pick(0, np - 1);
  ExchangeSchedule s;
  s.np = np;
  s.ranks.resize(static_cast<std::size_t>(np));
  for (int l = 0; l < links; ++l) {
    const int a = pick(rng);
    int b = pick(rng);
    while (b == a) b = pick(rng);
    ScheduleEntry ea, eb;
    ea.spec = 2 * l;
    ea.partner = 2 * l + 1;
    ea.rank = a;
    ea.peer = b;
    ea.block = 2 * l;
    ea.desc = {2 * l};
    ea.partner_desc = {2 * l + 1};
    eb = ea;
    std::swap(eb.spec, eb.partner);
    std::swap(eb.rank, eb.peer);
    std::swap(eb.desc, eb.partner_desc);
    eb.block = 2 * l + 1;
    s.ranks[static_cast<std::size_t>(a)].push_back(ea);
    s.ranks[static_cast<std::size_t>(b)].push_back(eb);
  }
  for (auto& list : s.ranks) std::shuffle(list.begin(), list.end(), rng);
  assign_groups(s, policy);
  return s;
}

struct WaitNode {
  int rank = 0;
  int group = 0;
  friend bool operator==(const WaitNode&, const WaitNode&) = default;
  friend auto operator<=>(const WaitNode&, const WaitNode&) = default;
};

using WaitCycle = std::vector<WaitNode>;

// Edges: a wait on group g needs group g-1 of the same rank, and for every
// remote entry the partner's post, which follows the partner's preceding group.
inline std::map<WaitNode, std::vector<WaitNode>> wait_graph(const ExchangeSchedule& s) {
  std::map<WaitNode, std::vector<WaitNode>> adj;
  std::map<std::pair<int, int>, int> group_of;  // (rank, spec) -> group
  for (const auto& list : s.ranks)
    for (const auto& e : list)
      if (!e.local) group_of[{e.rank, e.spec}] = e.group;
  for (const auto& list : s.ranks)
    for (const auto& e : list) {
      if (e.local) continue;
      const WaitNode me{e.rank, e.group};
      auto& out = adj[me];
      if (e.group >= 1) out.push_back({e.rank, e.group - 1});
      const auto it = group_of.find({e.peer, e.partner});
      if (it == group_of.end()) throw DecompError("schedule entry without a partner entry");
      if (it->second >= 1) out.push_back({e.peer, it->second - 1});
    }
  for (auto& [n, out] : adj) {
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }
  return adj;
}

// All elementary cycles (up to `limit`), each starting at its smallest node.
inline std::vector<WaitCycle> detect_deadlock(const ExchangeSchedule& s, std::size_t limit = 10000) {
  const auto adj = wait_graph(s);
  std::vector<WaitCycle> cycles;
  std::vector<WaitNode> path;
  std::map<WaitNode, bool> on_path;
  std::vector<WaitNode> nodes;
  for (const auto& [n, _] : adj) nodes.push_back(n);

  std::function<void(const WaitNode&, const WaitNode&)> dfs = [&](const WaitNode& start, const WaitNode& v) {
    if (cycles.size() >= limit) return;
    const auto it = adj.find(v);
    if (it == adj.end()) return;
    for (const WaitNode& w : it->second) {
      if (w < start) continue;
      if (w == start) {
        cycles.push_back(path);
        continue;
      }
      if (on_path[w]) continue;
      on_path[w] = true;
      path.push_back(w);
      dfs(start, w);
      path.pop_back();
      on_path[w] = false;
    }
  };
  for (const WaitNode& n : nodes) {
    path = {n};
    on_path.clear();
    on_path[n] = true;
    dfs(n, n);
  }
  return cycles;
}

// Cycle test by colouring DFS; cheaper than enumerating every cycle.
inline bool has_cycle(const ExchangeSchedule& s) {
  const auto adj = wait_graph(s);
  std::map<WaitNode, int> colour;  // 0 new, 1 on stack, 2 done
  std::function<bool(const WaitNode&)> visit = [&](const WaitNode& v) {
    colour[v] = 1;
    if (const auto it = adj.find(v); it != adj.end())
      for (const WaitNode& w : it->second) {
        const int c = colour[w];
        if (c == 1 || (c == 0 && visit(w))) return true;
      }
    colour[v] = 2;
    return false;
  };
  for (const auto& [n, _] : adj)
    if (colour[n] == 0 && visit(n)) return true;
  return false;
}

inline std::string describe_cycle(const WaitCycle& c) {
  std::string out;
  for (const auto& n : c) out += "rank " + std::to_string(n.rank) + " (wait " + std::to_string(n.group) + ") -> ";
  if (!c.empty()) out += "rank " + std::to_string(c.front().rank);
  return out;
}

}  // namespace blockflow

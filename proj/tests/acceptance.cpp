// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "blockflow/bench.hpp"
#include "blockflow/cases.hpp"
#include "blockflow/decomp.hpp"
#include "blockflow/exchange.hpp"
#include "blockflow/schedule.hpp"
#include "blockflow/simulation.hpp"
#include "blockflow/verify.hpp"

using namespace blockflow;

namespace {

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << " [failed: " << what << "]";
    }
  }
};

Block cart_block(int id, Index3 n, bool two_d, double x0) {
  std::vector<Vec3> p;
  const int nk = two_d ? 0 : n[2];
  for (int k = 0; k <= nk; ++k)
    for (int j = 0; j <= n[1]; ++j)
      for (int i = 0; i <= n[0]; ++i) p.push_back({x0 + i, 1.0 * j, 1.0 * k});
  return make_block(id, two_d ? Index3{n[0], n[1], 1} : n, two_d, p);
}

MultiBlockGrid separate_blocks(const std::vector<Index3>& dims, bool two_d) {
  MultiBlockGrid g;
  double x = 0.0;
  for (std::size_t b = 0; b < dims.size(); ++b) {
    g.blocks.push_back(cart_block(static_cast<int>(b), dims[b], two_d, x));
    x += dims[b][0] + 10.0;
    for (int f = 0; f < (two_d ? 4 : 6); ++f)
      add_physical_face(g, static_cast<int>(b), static_cast<Face>(f), BcType::farfield);
  }
  g.parent_count = static_cast<int>(g.blocks.size());
  validate_boundaries(g);
  return g;
}

std::vector<ExchangeStrategy> all_strategies() {
  std::vector<ExchangeStrategy> out;
  for (auto pack : {PackStrategy::packed, PackStrategy::sliced})
    for (auto wait : {WaitPolicy::per_block, WaitPolicy::deferred_all})
      for (auto tr : {Transport::direct, Transport::staged})
        for (auto buf : {BufferMode::persistent, BufferMode::transient}) {
          ExchangeStrategy s;
          s.pack = pack;
          s.wait = wait;
          s.transport = tr;
          s.buffers = buf;
          out.push_back(s);
        }
  return out;
}

DecompositionPlan plan_for(const CaseSetup& c, int np) {
  return decompose(c.grid, np, 3, np < static_cast<int>(c.grid.blocks.size()));
}

void criterion1(Check& ck) {
  struct Run {
    std::string name;
    int level;
    long steps;
  };
  const std::vector<Run> runs{{"inlet_ramp_2d", 0, 100}, {"inlet_ramp_2d", 2, 100}, {"c_annulus_2d", 0, 100},
                              {"multiblock_box_3d", 0, 100}};
  const SchemeConfig cfg;
  double worst = 0.0;
  int configs = 0, bitwise = 0;
  for (const auto& r : runs) {
    const CaseSetup c = make_case(r.name, r.level);
    StopControl stop;
    stop.max_steps = r.steps;
    Simulation serial(c, cfg);
    serial.run(stop);
    const Solution ref = serial.solution();
    for (int np : {2, 4, 8}) {
      const DecompositionPlan plan = plan_for(c, np);
      for (const auto& st : all_strategies()) {
        const DistributedResult res = run_distributed(c, cfg, plan, st, stop);
        const double d = max_relative_difference(ref, res.solution, c.free, c.gas);
        worst = std::max(worst, d);
        ++configs;
        if (bitwise_equal(ref, res.solution)) ++bitwise;
        if (!(d <= 1e-12)) {
          std::ostringstream w;
          w << r.name << " level " << r.level << " np " << np << " " << to_string(st.pack) << "/"
            << to_string(st.wait) << "/" << to_string(st.transport) << "/" << to_string(st.buffers) << " diff " << d;
          ck.require(false, w.str());
        }
      }
    }
  }
  ck.detail << configs << " runs, max relative difference " << worst << ", bitwise " << bitwise << "/" << configs;
}

void criterion2(Check& ck) {
  const CaseSetup c = make_case("deadlock_demo");
  const DecompositionPlan plan = make_deadlock_plan(c);
  const auto links = relink_connected(plan);
  const ExchangeSchedule naive = build_schedule(plan, links, WaitPolicy::per_block, false);
  const auto cycles = detect_deadlock(naive);
  ck.require(cycles.size() == 1 && cycles[0].size() == 4, "naive order has one 4-rank cycle");
  const ScheduleOutcome timed = execute_schedule(naive, 1.0);
  ck.require(timed.deadlocked && timed.blocked.size() == 4, "naive order times out on all 4 ranks");

  ExchangeStrategy st;
  st.reorder = false;
  StopControl stop;
  stop.max_steps = 2;
  bool solver_deadlock = false;
  try {
    run_distributed(c, SchemeConfig{}, plan, st, stop, 1.0);
  } catch (const DeadlockError&) {
    solver_deadlock = true;
  }
  ck.require(solver_deadlock, "naive solver run raises a deadlock");

  const ExchangeSchedule fixed = build_schedule(plan, links, WaitPolicy::per_block, true);
  ck.require(!has_cycle(fixed), "reordered schedule is acyclic");
  ck.require(execute_schedule(fixed, 10.0).completed, "reordered schedule completes");
  st.reorder = true;
  stop.max_steps = 20;
  const DistributedResult r = run_distributed(c, SchemeConfig{}, plan, st, stop, 10.0);
  ck.require(r.steps == 20, "reordered solver run completes");

  int clean = 0;
  for (std::uint32_t seed = 0; seed < 100; ++seed) {
    ExchangeSchedule s = random_topology(seed, 20, 60);
    reorder_boundaries(s);
    if (!has_cycle(s)) ++clean;
  }
  ck.require(clean == 100, "random topologies cycle-free after reorder");
  ck.detail << "naive: " << (cycles.empty() ? std::string("no cycle") : describe_cycle(cycles[0]))
            << ", timeout blocked " << timed.blocked.size() << " ranks; reordered ok; random cycle-free " << clean
            << "/100";
}

void criterion3(Check& ck) {
  const auto two = decompose(separate_blocks({{32, 16, 1}, {16, 16, 1}}, true), 2, 2, true);
  const auto l2 = two.rank_loads();
  ck.require(l2.size() == 2 && l2[0] == l2[1], "2:1 scenario loads equal");

  const auto four =
      decompose(separate_blocks({{20, 20, 20}, {20, 20, 10}, {20, 10, 10}, {20, 10, 10}}, false), 4, 3, true);
  std::vector<std::size_t> units;
  for (const auto& c : four.info) units.push_back(static_cast<std::size_t>(c.dims[0]) * c.dims[1] * c.dims[2]);
  double best = std::numeric_limits<double>::infinity();
  if (units.size() <= 10) {
    std::size_t n = 1;
    for (std::size_t u = 0; u < units.size(); ++u) n *= 4;
    for (std::size_t code = 0; code < n; ++code) {
      std::array<std::size_t, 4> load{};
      std::size_t x = code;
      for (auto s : units) {
        load[x % 4] += s;
        x /= 4;
      }
      const auto [mn, mx] = std::minmax_element(load.begin(), load.end());
      if (*mn > 0) best = std::min(best, static_cast<double>(*mx) / static_cast<double>(*mn));
    }
  }
  ck.require(four.load_ratio() == 1.0, "{8,4,2,2} ratio 1.0");
  ck.require(four.load_ratio() == best, "{8,4,2,2} ratio equals exhaustive optimum");
  ck.detail << "2:1 loads " << l2[0] << "/" << l2[1] << "; {8,4,2,2}e3 ratio " << four.load_ratio() << " (oracle "
            << best << ", " << units.size() << " units)";
}

CaseSetup bar_case() {
  CaseSetup c = make_case("multiblock_box_3d");
  std::vector<Vec3> p;
  for (int k = 0; k <= 8; ++k)
    for (int j = 0; j <= 8; ++j)
      for (int i = 0; i <= 16; ++i) p.push_back({i / 8.0, j / 8.0, k / 8.0});
  c.grid = MultiBlockGrid{};
  c.grid.blocks.push_back(make_block(0, {16, 8, 8}, false, p));
  for (int f = 0; f < 6; ++f) add_physical_face(c.grid, 0, static_cast<Face>(f), BcType::farfield);
  c.grid.parent_count = 1;
  c.pulse_center = {1.0, 0.5, 0.5};
  c.pulse_radius = 0.3;
  return c;
}

void criterion4(Check& ck) {
  const CaseSetup bar = bar_case();
  const auto bar_plan = decompose_lattice(bar.grid, {{2, 1, 1}});
  std::uint64_t sliced = 0, packed = 0;
  for (auto pack : {PackStrategy::sliced, PackStrategy::packed}) {
    ExchangeStrategy st;
    st.pack = pack;
    const auto sched = build_schedule(bar_plan, relink_connected(bar_plan), st.wait, true);
    const auto pred = count_transfers(bar_plan, sched, st);
    (pack == PackStrategy::sliced ? sliced : packed) = pred[0].messages;
  }
  ck.require(sliced == 320 && packed == 5, "i-face 8x8 sliced 320 vs packed 5");

  int combos = 0, matches = 0;
  std::uint64_t msgs = 0, copies = 0;
  SchemeConfig cfg;
  StopControl stop;
  stop.max_steps = 2;
  const auto fills = static_cast<std::uint64_t>(stop.max_steps * cfg.rk_stages);
  for (const std::string name : {"multiblock_box_3d", "c_annulus_2d"}) {
    const CaseSetup c = make_case(name);
    const auto plan = plan_for(c, 8);
    for (const auto& st : all_strategies()) {
      const auto sched = build_schedule(plan, relink_connected(plan), st.wait, st.reorder);
      const auto pred = count_transfers(plan, sched, st);
      const auto res = run_distributed(c, cfg, plan, st, stop);
      bool same = res.counters.size() == pred.size();
      for (std::size_t r = 0; same && r < pred.size(); ++r) same = res.counters[r].same_traffic(pred[r].scaled(fills));
      ++combos;
      if (same) ++matches;
      if (st.transport == Transport::staged)
        for (const auto& r : res.counters) {
          msgs += r.messages;
          copies += r.staging_copies;
        }
    }
  }
  ck.require(matches == combos, "measured counters equal predictions");
  ck.require(copies == 2 * msgs, "staged copies = 2 x messages");
  ck.detail << "i-face sliced " << sliced << " vs packed " << packed << "; measured = predicted " << matches << "/"
            << combos << "; staged copies " << copies << " for " << msgs << " messages";
}

void criterion5(Check& ck) {
  SchemeConfig cfg;
  cfg.limiter = LimiterKind::none;
  StopControl stop;
  stop.max_steps = 200000;
  stop.relative_target = 1e-9;
  for (bool viscous : {false, true}) {
    const OrderStudy st = run_order_study(viscous, {0, 2, 4}, cfg, stop);
    const char* tag = viscous ? "NS" : "Euler";
    for (const auto& e : st.errors) ck.require(e.converged, std::string(tag) + " level converged");
    const double r = st.rho_orders.back(), p = st.p_orders.back();
    ck.require(std::abs(r - 2.0) <= 0.2 && std::abs(p - 2.0) <= 0.2, std::string(tag) + " order 2 +- 0.2");
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s rho %.3f p %.3f (coarse pair %.3f/%.3f); ", tag, r, p, st.rho_orders[0],
                  st.p_orders[0]);
    ck.detail << buf;
  }
}

void criterion6(Check& ck) {
  double fs = 0.0, tel = 0.0;
  for (const auto& name : case_names())
    for (int level : {0, 1}) {
      const CaseSetup c = make_case(name, level);
      for (auto lim : {LimiterKind::none, LimiterKind::van_albada}) {
        SchemeConfig cfg;
        cfg.limiter = lim;
        fs = std::max(fs, freestream_residual(uniform_flow_case(c), cfg));
      }
    }
  for (const auto& name : case_names())
    for (bool viscous : {false, true}) {
      SchemeConfig cfg;
      cfg.viscous = viscous;
      tel = std::max(tel, telescoping_mismatch(make_case(name, 0, viscous), cfg, 100));
    }
  ck.require(fs <= 1e-12, "freestream residual <= 1e-12");
  ck.require(tel <= 1e-12, "telescoping mismatch <= 1e-12");
  ck.detail << "freestream max scaled residual " << fs << ", telescoping mismatch " << tel << " over 100 steps";
}

void criterion7(Check& ck) {
  ck.require(ssspnt(53248, 1000, 1, 53.248) == 1.0, "ssspnt spot value");
  ck.require(ssspnt(53248, 1000, 2, 53.248) == 0.5, "ssspnt halves with np");
  ck.require(speedup(100, 25) == 4.0, "speedup spot value");
  ck.require(speedup(9.5, 9.5) == 1.0, "speedup of equal times");
  ck.require(efficiency(4, 8) == 0.5, "efficiency spot value");
  for (int np : {1, 2, 7, 64}) ck.require(efficiency(np, np) == 1.0, "efficiency(np, np)");
  double worst = 0.0;
  for (double k : {2.0, 3.0, 10.0, 1000.0})
    for (double np : {1.0, 4.0, 13.0}) {
      const double a = ssspnt(k * 53248, 500, k * np, 8.25), b = ssspnt(53248, 500, np, 8.25);
      worst = std::max(worst, std::abs(a - b) / b);
    }
  ck.require(worst <= 1e-15, "ssspnt scale invariance");
  ck.detail << "spot values exact, scale invariance within " << worst;
}

void criterion8(Check& ck) {
  SchemeConfig cfg;
  cfg.limiter = LimiterKind::van_albada;
  StopControl stop;
  stop.max_steps = 20000;
  stop.relative_target = 1e-6;
  const CaseSetup c = make_case("inlet_ramp_2d");
  Simulation free_run(c, cfg);
  const bool conv = free_run.run(stop);
  const ResidualHistory& h = free_run.history();
  const double final_free = h.max_relative(h.size() - 1);
  ck.require(conv && final_free <= 1e-6, "unfrozen run drops 6 orders");

  // Stall: the first 50-step window past the residual peak in which the
  // residual rises on at least 10 steps.
  std::vector<double> m(h.size());
  for (std::size_t n = 0; n < h.size(); ++n) m[n] = h.max_relative(n);
  const std::size_t peak = static_cast<std::size_t>(std::max_element(m.begin(), m.end()) - m.begin());
  constexpr std::size_t kWindow = 50;
  std::size_t stall = 0;
  for (std::size_t n = peak + 1; n + kWindow < m.size() && stall == 0; ++n) {
    int rises = 0;
    for (std::size_t q = n; q < n + kWindow; ++q) rises += m[q + 1] > m[q];
    if (rises >= 10) stall = n;
  }
  ck.require(stall > 0, "stall located");
  long rises_free = 0;
  for (std::size_t n = stall + 1; n < m.size(); ++n) rises_free += m[n] > m[n - 1];

  cfg.limiter_freeze_at = static_cast<long>(stall);
  Simulation frozen(c, cfg);
  const bool conv2 = frozen.run(stop);
  const ResidualHistory& f = frozen.history();
  long rises = 0;
  for (std::size_t n = stall + 1; n < f.size(); ++n) rises += f.max_relative(n) > f.max_relative(n - 1);
  ck.require(conv2 && f.max_relative(f.size() - 1) <= 1e-6, "frozen run drops 6 orders");
  ck.require(rises == 0, "monotone decrease after freezing");
  ck.detail << "unfrozen " << free_run.steps() << " steps to " << final_free << " (" << rises_free
            << " rises after step " << stall << "); frozen at " << stall << ": " << frozen.steps() << " steps, "
            << rises << " rises after freeze";
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    double limit_s;
    std::function<void(Check&)> run;
  };
  const std::vector<Criterion> all{{1, 180, criterion1}, {2, 60, criterion2}, {3, 10, criterion3},
                                   {4, 10, criterion4},  {5, 300, criterion5}, {6, 300, criterion6},
                                   {7, 1, criterion7},   {8, 300, criterion8}};
  int failed = 0;
  for (const auto& c : all) {
    Check ck;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(ck);
    } catch (const std::exception& e) {
      ck.ok = false;
      ck.detail << " [exception: " << e.what() << "]";
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (s > c.limit_s) {
      ck.ok = false;
      ck.detail << " [over time limit " << c.limit_s << " s]";
    }
    if (!ck.ok) ++failed;
    std::printf("%s criterion %d: %s (%.2f s)\n", ck.ok ? "PASS" : "FAIL", c.id, ck.detail.str().c_str(), s);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

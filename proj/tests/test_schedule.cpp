#include <gtest/gtest.h>

#include <map>
#include <set>

#include "blockflow/cases.hpp"
#include "blockflow/exchange.hpp"
#include "blockflow/schedule.hpp"

using namespace blockflow;

namespace {

ExchangeSchedule demo_schedule(bool reorder, WaitPolicy w = WaitPolicy::per_block) {
  const auto plan = make_deadlock_plan(make_case("deadlock_demo"));
  return build_schedule(plan, relink_connected(plan), w, reorder);
}

std::vector<std::vector<std::pair<int, int>>> order_of(const ExchangeSchedule& s) {
  std::vector<std::vector<std::pair<int, int>>> out;
  for (const auto& list : s.ranks) {
    out.emplace_back();
    for (const auto& e : list) out.back().push_back({e.spec, e.group});
  }
  return out;
}

}  // namespace

TEST(DeadlockDemo, NaiveOrderHasExactlyOneFourCycle) {
  const auto s = demo_schedule(false);
  ASSERT_EQ(s.np, 4);
  const auto cycles = detect_deadlock(s);
  ASSERT_EQ(cycles.size(), 1u);
  std::set<int> ranks;
  for (const auto& n : cycles[0]) ranks.insert(n.rank);
  EXPECT_EQ(cycles[0].size(), 4u);
  EXPECT_EQ(ranks.size(), 4u);
  EXPECT_TRUE(has_cycle(s));
  // Every arc of the cycle is a wait on a neighbouring rank.
  for (std::size_t n = 0; n < cycles[0].size(); ++n) {
    const int a = cycles[0][n].rank, b = cycles[0][(n + 1) % 4].rank;
    EXPECT_EQ((a - b + 4) % 4 == 1 || (b - a + 4) % 4 == 1, true);
  }
  EXPECT_NE(describe_cycle(cycles[0]).find("rank 0"), std::string::npos);
}

TEST(DeadlockDemo, NaiveOrderTimesOutOnAllRanks) {
  const auto out = execute_schedule(demo_schedule(false), 0.5);
  EXPECT_TRUE(out.deadlocked);
  EXPECT_FALSE(out.completed);
  EXPECT_EQ(out.blocked.size(), 4u);
}

TEST(DeadlockDemo, ReorderedScheduleCompletes) {
  const auto s = demo_schedule(true);
  EXPECT_TRUE(detect_deadlock(s).empty());
  EXPECT_FALSE(has_cycle(s));
  const auto out = execute_schedule(s, 5.0);
  EXPECT_TRUE(out.completed) << out.error;
  EXPECT_EQ(out.undelivered, 0u);
  EXPECT_EQ(out.totals.sends, out.totals.receives_completed);
}

TEST(DeadlockDemo, DeferredWaitsAvoidTheCycle) {
  const auto s = demo_schedule(false, WaitPolicy::deferred_all);
  EXPECT_TRUE(detect_deadlock(s).empty());
  EXPECT_TRUE(execute_schedule(s, 5.0).completed);
}

TEST(Reorder, SingleLinkKeepsItsOrder) {
  ExchangeSchedule s = random_topology(3, 2, 1);
  const auto before = order_of(s);
  reorder_boundaries(s);
  EXPECT_EQ(order_of(s), before);
}

TEST(Reorder, IsIdempotent) {
  for (std::uint32_t seed = 0; seed < 20; ++seed) {
    ExchangeSchedule s = random_topology(seed, 7, 15);
    reorder_boundaries(s);
    const auto once = order_of(s);
    reorder_boundaries(s);
    EXPECT_EQ(order_of(s), once);
  }
  ExchangeSchedule d = demo_schedule(true);
  const auto once = order_of(d);
  reorder_boundaries(d);
  EXPECT_EQ(order_of(d), once);
}

TEST(Reorder, BothEndpointsAgreeOnPairOrder) {
  ExchangeSchedule s = random_topology(9, 6, 30);
  reorder_boundaries(s);
  // Sequence of links each rank sees towards a given peer, as link ids.
  std::map<std::pair<int, int>, std::vector<int>> seen;
  for (const auto& list : s.ranks)
    for (const auto& e : list) seen[{e.rank, e.peer}].push_back(e.spec / 2);
  for (const auto& [k, v] : seen) EXPECT_EQ(v, seen.at({k.second, k.first}));
}

TEST(Reorder, RandomTwentyRankTopologiesAreCycleFree) {
  for (std::uint32_t seed = 0; seed < 100; ++seed) {
    ExchangeSchedule s = random_topology(seed, 20, 60);
    reorder_boundaries(s);
    EXPECT_FALSE(has_cycle(s)) << "seed " << seed;
    EXPECT_TRUE(detect_deadlock(s, 1).empty()) << "seed " << seed;
  }
}

TEST(DetectDeadlock, AgreesWithExecution) {
  int deadlocks = 0, clean = 0;
  for (std::uint32_t seed = 0; seed < 24; ++seed) {
    const ExchangeSchedule s = random_topology(1000 + seed, 5, 7);
    const bool cyc = has_cycle(s);
    EXPECT_EQ(cyc, !detect_deadlock(s).empty());
    const auto out = execute_schedule(s, 0.2);
    EXPECT_EQ(out.deadlocked, cyc) << "seed " << seed;
    EXPECT_EQ(out.completed, !cyc) << "seed " << seed;
    (cyc ? deadlocks : clean)++;
  }
  EXPECT_GT(deadlocks, 0);
  EXPECT_GT(clean, 0);
}

// Buffered sends do not help: each receive still needs the partner's post,
// which sits behind the partner's earlier wait.
TEST(DetectDeadlock, EagerSendsStillDeadlock) {
  const auto out = execute_schedule(demo_schedule(false), 0.3, true);
  EXPECT_TRUE(out.deadlocked);
}

TEST(WaitGroups, PolicyShapesGroups) {
  const auto per = demo_schedule(false, WaitPolicy::per_block);
  const auto def = demo_schedule(false, WaitPolicy::deferred_all);
  for (int r = 0; r < 4; ++r) {
    EXPECT_EQ(per.group_count(r), 2);
    EXPECT_EQ(def.group_count(r), 1);
  }
}

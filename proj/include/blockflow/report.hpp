#pragma once

#include <ostream>
#include <vector>

#include <json.hpp>

#include "blockflow/bench.hpp"
#include "blockflow/decomp.hpp"
#include "blockflow/exchange.hpp"
#include "blockflow/schedule.hpp"

namespace blockflow {

using Json = nlohmann::ordered_json;

inline Json to_json(const TransferCounters& c) {
  return Json{{"rank", c.rank},
              {"messages", c.messages},
              {"runs", c.runs},
              {"bytes", c.bytes},
              {"staging_copies", c.staging_copies},
              {"waits", c.waits}};
}

inline Json counters_to_json(const std::vector<TransferCounters>& cs) {
  Json a = Json::array();
  for (const auto& c : cs) a.push_back(to_json(c));
  return a;
}

inline Json to_json(const Box& b) {
  return Json{{"lo", {b.lo[0], b.lo[1], b.lo[2]}}, {"hi", {b.hi[0], b.hi[1], b.hi[2]}}};
}

inline Json to_json(const BoundarySpec& s) {
  Json j{{"owner", s.owner}, {"face", to_string(s.face)}, {"cells", to_json(s.cells)}};
  if (s.connected) {
    j["neighbor"] = s.neighbor;
    j["nbr_face"] = to_string(s.nbr_face);
    j["nbr_cells"] = to_json(s.nbr_cells);
    j["axis_map"] = {s.orient.axis[0], s.orient.axis[1], s.orient.axis[2]};
    j["flip"] = {s.orient.flip[0], s.orient.flip[1], s.orient.flip[2]};
  } else {
    j["type"] = to_string(s.type);
  }
  return j;
}

inline Json plan_to_json(const DecompositionPlan& plan, const ExchangeSchedule* schedule = nullptr) {
  Json j;
  j["np"] = plan.np;
  j["aggregated"] = plan.aggregated;
  Json parents = Json::array();
  for (const auto& b : plan.parents.blocks)
    parents.push_back({{"id", b.id}, {"dims", {b.dims[0], b.dims[1], b.two_d ? 0 : b.dims[2]}}});
  j["parents"] = parents;
  Json children = Json::array();
  Json ranks = Json::array();
  for (const auto& c : plan.info) {
    children.push_back({{"id", c.id},
                        {"parent", c.parent},
                        {"offset", {c.offset[0], c.offset[1], c.offset[2]}},
                        {"dims", {c.dims[0], c.dims[1], c.dims[2]}},
                        {"rank", c.rank}});
    ranks.push_back(c.rank);
  }
  j["children"] = children;
  j["rank_map"] = ranks;
  j["loads"] = plan.rank_loads();
  Json specs = Json::array();
  for (const auto& s : plan.children.boundaries) specs.push_back(to_json(s));
  j["boundaries"] = specs;
  if (schedule) {
    Json order = Json::array();
    for (const auto& list : schedule->ranks) {
      Json r = Json::array();
      for (const auto& e : list)
        r.push_back({{"spec", e.spec}, {"peer", e.peer}, {"axis", e.axis}, {"group", e.group}, {"local", e.local}});
      order.push_back(r);
    }
    j["schedule"] = {{"policy", to_string(schedule->policy)}, {"reordered", schedule->reordered}, {"order", order}};
  }
  return j;
}

inline Json to_json(const ScalingReport& r) {
  Json entries = Json::array();
  for (const auto& e : r.entries)
    entries.push_back({{"np", e.timing.np},
                       {"size", e.timing.size},
                       {"steps", e.timing.steps},
                       {"time_s", e.timing.time_s},
                       {"samples", e.timing.samples},
                       {"spread", e.timing.spread},
                       {"flagged", e.timing.flagged},
                       {"ssspnt", e.ssspnt},
                       {"speedup", e.speedup},
                       {"efficiency", e.efficiency}});
  return Json{{"mode", to_string(r.mode)}, {"case", r.case_id}, {"entries", entries}};
}

}  // namespace blockflow

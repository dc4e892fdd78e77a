#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "blockflow/cases.hpp"
#include "blockflow/decomp.hpp"
#include "blockflow/exchange.hpp"

namespace blockflow {

inline constexpr double kSsspntScale = 1e-6;

// Scaled size-steps per np-time.
inline double ssspnt(double size, double steps, double np, double time, double s = kSsspntScale) {
  if (!(size > 0 && steps > 0 && np > 0 && time > 0 && s > 0)) throw Error("ssspnt needs positive inputs");
  return s * size * steps / (np * time);
}

inline double speedup(double t_serial, double t_parallel) {
  if (!(t_serial > 0 && t_parallel > 0)) throw Error("speedup needs positive times");
  return t_serial / t_parallel;
}

inline double efficiency(double speedup, double np) {
  if (!(np > 0)) throw Error("efficiency needs positive np");
  return speedup / np;
}

enum class ScalingMode { strong, weak };

inline std::string_view to_string(ScalingMode m) { return m == ScalingMode::strong ? "strong" : "weak"; }

inline ScalingMode scaling_mode_from_string(std::string_view s) {
  if (s == "strong") return ScalingMode::strong;
  if (s == "weak") return ScalingMode::weak;
  throw Error("unknown scaling mode '" + std::string(s) + "'");
}

struct TimingRecord {
  std::string case_id;
  int np = 1;
  std::size_t size = 0;
  long steps = 0;
  double time_s = 0.0;  // median of the samples
  std::vector<double> samples;
  double spread = 0.0;  // (max - min) / median
  bool flagged = false;
};

struct ScalingEntry {
  TimingRecord timing;
  double ssspnt = 0.0;
  double speedup = 1.0;
  double efficiency = 1.0;
};

struct ScalingReport {
  ScalingMode mode = ScalingMode::strong;
  std::string case_id;
  std::vector<ScalingEntry> entries;
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw Error("median of no samples");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct ScalingOptions {
  std::string case_id = "inlet_ramp_2d";
  int level = 0;
  bool viscous = false;
  long steps = 20;
  int repeats = 3;
  int split_dims = 3;
  double spread_limit = 0.01;
};

// Timed distributed runs, one configuration at a time. Speedup is the
// throughput (size * steps / time) relative to the first entry; efficiency
// divides by the rank ratio, so both reduce to the usual definitions for
// strong scaling.
inline ScalingReport run_scaling_suite(const ScalingOptions& o, const SchemeConfig& cfg, const ExchangeStrategy& st,
                                       const std::vector<int>& nps, ScalingMode mode) {
  if (nps.empty()) throw Error("scaling suite needs at least one np");
  if (o.repeats < 3) throw Error("scaling suite needs at least 3 repeats");
  if (mode == ScalingMode::weak && o.case_id == "deadlock_demo")
    throw Error("case '" + o.case_id + "' cannot be grown for weak scaling");
  ScalingReport rep;
  rep.mode = mode;
  rep.case_id = o.case_id;
  for (int np : nps) {
    if (np < 1) throw Error("np must be at least 1");
    int level = o.level;
    if (mode == ScalingMode::weak) {
      const int growth = np / nps.front();
      if (growth * nps.front() != np || (growth & (growth - 1)) != 0)
        throw Error("weak scaling needs np to be the first np times a power of two");
      for (int g = growth; g > 1; g /= 2) ++level;
    }
    const CaseSetup c = make_case(o.case_id, level, o.viscous);
    const int npb = static_cast<int>(c.grid.blocks.size());
    const DecompositionPlan plan = decompose(c.grid, np, o.split_dims, np < npb);
    StopControl stop;
    stop.max_steps = o.steps;
    ScalingEntry e;
    e.timing.case_id = o.case_id;
    e.timing.np = np;
    e.timing.size = c.grid.total_cells();
    e.timing.steps = o.steps;
    for (int r = 0; r < o.repeats; ++r) e.timing.samples.push_back(run_distributed(c, cfg, plan, st, stop).seconds);
    e.timing.time_s = median(e.timing.samples);
    const auto [mn, mx] = std::minmax_element(e.timing.samples.begin(), e.timing.samples.end());
    e.timing.spread = (*mx - *mn) / e.timing.time_s;
    e.timing.flagged = e.timing.spread > o.spread_limit;
    e.ssspnt = ssspnt(static_cast<double>(e.timing.size), static_cast<double>(o.steps), np, e.timing.time_s);
    rep.entries.push_back(std::move(e));
  }
  const ScalingEntry& base = rep.entries.front();
  for (auto& e : rep.entries) {
    const double rate = static_cast<double>(e.timing.size) / e.timing.time_s;
    const double base_rate = static_cast<double>(base.timing.size) / base.timing.time_s;
    e.speedup = rate / base_rate;
    e.efficiency = efficiency(e.speedup, static_cast<double>(e.timing.np) / base.timing.np);
  }
  return rep;
}

inline void write_scaling_csv(const ScalingReport& r, std::ostream& os) {
  os << "np,size,steps,time_s,ssspnt,speedup,efficiency\n";
  os.precision(10);
  for (const auto& e : r.entries)
    os << e.timing.np << ',' << e.timing.size << ',' << e.timing.steps << ',' << e.timing.time_s << ',' << e.ssspnt
       << ',' << e.speedup << ',' << e.efficiency << '\n';
}

}  // namespace blockflow

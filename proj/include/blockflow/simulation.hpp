#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "blockflow/cases.hpp"
#include "blockflow/mesh.hpp"
#include "blockflow/solver.hpp"

namespace blockflow {

// Relative L2 residual norms per equation. Each equation is normalized by its
// first significant norm; an equation whose norm is round-off compared with
// the others (scaled by characteristic fluxes) keeps relative norm 0 until it
// becomes significant.
struct ResidualHistory {
  std::array<double, 5> first{};
  std::array<bool, 5> has_ref{};
  std::array<double, 5> flux_ref{1.0, 1.0, 1.0, 1.0, 1.0};
  double significance = 1e-8;
  std::vector<std::array<double, 5>> absolute;
  std::vector<std::array<double, 5>> relative;

  void set_flux_reference(const Primitive& q, const GasModel& g) {
    const double speed = std::max(norm(q.vel()), q.sound_speed(g));
    const double m = q.rho * speed;
    flux_ref = {m, m * speed + q.p, m * speed + q.p, m * speed + q.p, m * total_enthalpy(q, g)};
  }

  void append(const std::array<double, 5>& sum_sq) {
    std::array<double, 5> a, r;
    double scaled_max = 0.0;
    for (int v = 0; v < 5; ++v) {
      a[v] = std::sqrt(sum_sq[v]);
      scaled_max = std::max(scaled_max, a[v] / flux_ref[v]);
    }
    for (int v = 0; v < 5; ++v) {
      if (!has_ref[v] && a[v] > 0.0 && a[v] / flux_ref[v] >= significance * scaled_max) {
        has_ref[v] = true;
        first[v] = a[v];
      }
      r[v] = has_ref[v] ? a[v] / first[v] : 0.0;
    }
    absolute.push_back(a);
    relative.push_back(r);
  }
  std::size_t size() const { return relative.size(); }
  double max_relative(std::size_t n) const {
    double m = 0.0;
    for (double x : relative[n]) m = std::max(m, x);
    return m;
  }
  double max_absolute(std::size_t n) const {
    double m = 0.0;
    for (double x : absolute[n]) m = std::max(m, x);
    return m;
  }
  // Largest absolute norm divided by the characteristic flux of its equation.
  double max_scaled(std::size_t n) const {
    double m = 0.0;
    for (int v = 0; v < 5; ++v) m = std::max(m, absolute[n][v] / flux_ref[v]);
    return m;
  }
  void write_csv(std::ostream& os) const {
    os << "step,r_mass,r_xmom,r_ymom,r_zmom,r_energy\n";
    os << std::setprecision(12);
    for (std::size_t n = 0; n < relative.size(); ++n) {
      os << n + 1;
      for (double x : relative[n]) os << ',' << x;
      os << '\n';
    }
  }
};

struct StopControl {
  long max_steps = 1000;
  double relative_target = 0.0;  // stop once every equation is below this (0 = run all steps)
  double absolute_target = 0.0;  // or once every flux-scaled absolute norm is below this
  double divergence_limit = 1e6;
};

// One time-marching engine over a set of blocks; connected ghosts and norm
// reductions are delegated so the same sequence runs serially or per rank.
struct StepEngine {
  std::vector<BlockSolver>* blocks = nullptr;
  SchemeConfig cfg;
  CaseContext ctx;
  std::function<void(int axis)> fill_connected;
  std::function<std::array<double, 5>()> reduce_sum_squares;
  std::function<void(const BlockSolver&, const ResidualSums&)> residual_hook;
  ResidualHistory history;
  long steps = 0;
  double divergence_limit = 1e6;

  void fill_ghosts() {
    const int nd = blocks->empty() ? 0 : blocks->front().space_dims();
    for (int d = 0; d < nd; ++d) {
      for (auto& b : *blocks) enforce_physical_phase(b, d, ctx);
      if (fill_connected) fill_connected(d);
    }
  }

  void step() {
    const bool frozen = cfg.limiter_freeze_at >= 0 && steps >= cfg.limiter_freeze_at;
    const auto& alphas = rk_alphas(cfg.rk_stages);
    for (std::size_t s = 0; s < alphas.size(); ++s) {
      fill_ghosts();
      for (auto& b : *blocks) {
        if (!(frozen && b.limiters_valid)) compute_all_limiters(b, cfg.limiter);
        const ResidualSums sums = assemble_residual(b, cfg, ctx);
        if (residual_hook) residual_hook(b, sums);
        if (s == 0) {
          local_time_step(b, cfg, ctx);
          store_stage_origin(b);
        }
      }
      if (s == 0) {
        history.append(reduce_sum_squares());
        const std::size_t n = history.size() - 1;
        if (!(history.max_relative(n) <= divergence_limit))
          throw PhysicsError("residual diverged at step " + std::to_string(steps + 1) + " (relative norm " +
                             std::to_string(history.max_relative(n)) + ")");
      }
      for (auto& b : *blocks) rk_update(b, alphas[s], ctx);
    }
    ++steps;
  }

  bool converged(const StopControl& stop) const {
    if (history.size() == 0) return false;
    const std::size_t n = history.size() - 1;
    if (stop.relative_target > 0.0 && history.size() > 1 && history.max_relative(n) <= stop.relative_target)
      return true;
    return stop.absolute_target > 0.0 && history.max_scaled(n) <= stop.absolute_target;
  }

  // Returns true when a stop target was met before max_steps.
  bool run(const StopControl& stop) {
    divergence_limit = stop.divergence_limit;
    while (steps < stop.max_steps) {
      step();
      if (converged(stop)) return true;
    }
    return false;
  }
};

// Sum of squared interior residuals in canonical order: parents ascending,
// then k, j, i.
inline std::array<double, 5> sum_squares_serial(const std::vector<BlockSolver>& blocks) {
  std::array<double, 5> acc{};
  for (const auto& b : blocks)
    for_each_cell(b.block->interior(), [&](int i, int j, int k) {
      const std::size_t c = b.cells(i, j, k);
      for (int v = 0; v < 5; ++v) acc[v] += b.res[v][c] * b.res[v][c];
    });
  return acc;
}

// Direct ghost copy for a connected patch whose donor block is in memory.
inline void copy_connected(BlockSolver& dst, const BoundarySpec& s, const BlockSolver& src) {
  const TransferRegion t = transfer_region(s, *dst.block, *src.block);
  for_each_cell(t.dst, [&](int i, int j, int k) {
    const Index3 m = map_to_neighbor(s, *dst.block, *src.block, {i, j, k});
    const std::size_t a = dst.cells(i, j, k);
    const std::size_t b = src.cells(m);
    for (int v = 0; v < 5; ++v) dst.prim[v][a] = src.prim[v][b];
  });
}

inline CaseContext make_context(const CaseSetup& c, const SchemeConfig& cfg) {
  CaseContext ctx;
  ctx.gas = c.gas;
  ctx.free = c.free;
  ctx.mms = c.mms ? &*c.mms : nullptr;
  ctx.viscous = cfg.viscous;
  ctx.wall_temperature = cfg.wall_temperature;
  return ctx;
}

// Interior primitives of every parent block, i fastest.
struct Solution {
  struct Part {
    int id = 0;
    Index3 dims{};
    std::array<std::vector<double>, 5> q;
  };
  std::vector<Part> parts;
};

inline Solution make_empty_solution(const MultiBlockGrid& g) {
  Solution s;
  for (const auto& b : g.blocks) {
    Solution::Part p;
    p.id = b.id;
    p.dims = b.dims;
    for (auto& f : p.q) f.assign(b.cell_count(), 0.0);
    s.parts.push_back(std::move(p));
  }
  return s;
}

inline void scatter_into(Solution& sol, std::size_t part, const BlockSolver& b) {
  Solution::Part& p = sol.parts[part];
  for_each_cell(b.block->interior(), [&](int i, int j, int k) {
    const std::size_t c = b.cells(i, j, k);
    const std::size_t dst = static_cast<std::size_t>(i - 1 + b.offset[0]) +
                            static_cast<std::size_t>(p.dims[0]) *
                                (static_cast<std::size_t>(j - 1 + b.offset[1]) +
                                 static_cast<std::size_t>(p.dims[1]) * static_cast<std::size_t>(k - 1 + b.offset[2]));
    for (int v = 0; v < 5; ++v) p.q[v][dst] = b.prim[v][c];
  });
}

// Largest difference of primitives (rho, |V|-scaled velocity, p, T) relative to
// freestream magnitudes.
inline double max_relative_difference(const Solution& a, const Solution& b, const Primitive& free,
                                      const GasModel& gas) {
  if (a.parts.size() != b.parts.size()) throw Error("solutions have different block counts");
  const double vref = std::max(norm(free.vel()), free.sound_speed(gas));
  const double Tref = free.T(gas);
  double m = 0.0;
  for (std::size_t p = 0; p < a.parts.size(); ++p) {
    const auto& x = a.parts[p];
    const auto& y = b.parts[p];
    if (x.dims != y.dims) throw Error("solutions have different block sizes");
    for (std::size_t c = 0; c < x.q[0].size(); ++c) {
      m = std::max(m, std::abs(x.q[0][c] - y.q[0][c]) / free.rho);
      for (int v = 1; v < 4; ++v) m = std::max(m, std::abs(x.q[v][c] - y.q[v][c]) / vref);
      m = std::max(m, std::abs(x.q[4][c] - y.q[4][c]) / free.p);
      const double Tx = x.q[4][c] / (gas.R * x.q[0][c]);
      const double Ty = y.q[4][c] / (gas.R * y.q[0][c]);
      m = std::max(m, std::abs(Tx - Ty) / Tref);
    }
  }
  return m;
}

inline bool bitwise_equal(const Solution& a, const Solution& b) {
  if (a.parts.size() != b.parts.size()) return false;
  for (std::size_t p = 0; p < a.parts.size(); ++p)
    for (int v = 0; v < 5; ++v)
      if (a.parts[p].q[v] != b.parts[p].q[v]) return false;
  return true;
}

// Serial multi-block run: every block in one process, links served by copy.
class Simulation {
 public:
  Simulation(const CaseSetup& c, const SchemeConfig& cfg) : case_(c) {
    cfg.validate();
    blocks_.resize(case_.grid.blocks.size());
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const Block& blk = case_.grid.blocks[b];
      std::vector<BoundarySpec> phys;
      for (const auto& s : case_.grid.boundaries)
        if (s.owner == blk.id && !s.connected) phys.push_back(s);
      init_block_solver(blocks_[b], blk, std::move(phys));
      blocks_[b].parent = static_cast<int>(b);
    }
    engine_.blocks = &blocks_;
    engine_.cfg = cfg;
    engine_.ctx = make_context(case_, cfg);
    engine_.history.set_flux_reference(case_.free, case_.gas);
    for (auto& b : blocks_) set_interior(b, engine_.ctx, [this](Vec3 x) { return case_.initial(x); });
    engine_.fill_connected = [this](int axis) {
      for (const auto& s : case_.grid.boundaries) {
        if (!s.connected || s.axis() != axis) continue;
        copy_connected(blocks_[case_.grid.index_of(s.owner)], s, blocks_[case_.grid.index_of(s.neighbor)]);
      }
    };
    engine_.reduce_sum_squares = [this] { return sum_squares_serial(blocks_); };
  }

  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  void step() { engine_.step(); }
  bool run(const StopControl& stop) { return engine_.run(stop); }
  void fill_ghosts() { engine_.fill_ghosts(); }

  std::vector<BlockSolver>& blocks() { return blocks_; }
  const std::vector<BlockSolver>& blocks() const { return blocks_; }
  const ResidualHistory& history() const { return engine_.history; }
  StepEngine& engine() { return engine_; }
  const CaseSetup& setup() const { return case_; }
  long steps() const { return engine_.steps; }

  Solution solution() const {
    Solution s = make_empty_solution(case_.grid);
    for (std::size_t b = 0; b < blocks_.size(); ++b) scatter_into(s, b, blocks_[b]);
    return s;
  }

 private:
  CaseSetup case_;
  std::vector<BlockSolver> blocks_;
  StepEngine engine_;
};

// ---------------------------------------------------------------------------
// Output

inline void write_vtk(const MultiBlockGrid& g, const Solution& sol, const GasModel& gas, const std::string& prefix) {
  for (std::size_t p = 0; p < sol.parts.size(); ++p) {
    const Block& b = g.blocks[p];
    const auto& part = sol.parts[p];
    std::ofstream os(prefix + "_block" + std::to_string(b.id) + ".vtk");
    if (!os) throw Error("cannot write solution file with prefix '" + prefix + "'");
    const int nk = b.two_d ? 0 : b.dims[2];
    os << "# vtk DataFile Version 3.0\nblockflow solution\nASCII\nDATASET STRUCTURED_GRID\n";
    os << "DIMENSIONS " << b.dims[0] + 1 << ' ' << b.dims[1] + 1 << ' ' << nk + 1 << '\n';
    os << "POINTS " << b.interior_node_count() << " double\n" << std::setprecision(17);
    for (int k = 0; k <= nk; ++k)
      for (int j = 0; j <= b.dims[1]; ++j)
        for (int i = 0; i <= b.dims[0]; ++i) {
          const Vec3 x = b.node(i, j, k);
          os << x.x << ' ' << x.y << ' ' << x.z << '\n';
        }
    const std::size_t n = b.cell_count();
    os << "CELL_DATA " << n << '\n';
    const char* names[5] = {"density", "u", "v", "w", "pressure"};
    for (int v = 0; v < 5; ++v) {
      os << "SCALARS " << names[v] << " double 1\nLOOKUP_TABLE default\n";
      for (double x : part.q[v]) os << x << '\n';
    }
    os << "SCALARS temperature double 1\nLOOKUP_TABLE default\n";
    for (std::size_t c = 0; c < n; ++c) os << part.q[4][c] / (gas.R * part.q[0][c]) << '\n';
  }
}

// Raw dump: int32 block count; per block int32 id + 3 dims, then 5 fields of doubles.
inline void write_raw(const Solution& sol, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write '" + path + "'");
  auto put = [&](auto x) { os.write(reinterpret_cast<const char*>(&x), sizeof(x)); };
  put(static_cast<std::int32_t>(sol.parts.size()));
  for (const auto& p : sol.parts) {
    put(static_cast<std::int32_t>(p.id));
    for (int d : p.dims) put(static_cast<std::int32_t>(d));
    for (const auto& f : p.q) os.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(double)));
  }
}

}  // namespace blockflow

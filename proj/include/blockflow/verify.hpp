#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "blockflow/cases.hpp"
#include "blockflow/simulation.hpp"

namespace blockflow {

struct ErrorNorms {
  std::array<double, 5> l2{};  // rho, u, v, w, p
  std::size_t cells = 0;
  bool converged = false;
  long steps = 0;
};

// Volume-weighted L2 error of interior primitives against the manufactured
// solution at cell centroids.
inline ErrorNorms discretization_error(const Simulation& sim) {
  const CaseSetup& c = sim.setup();
  if (!c.mms) throw Error("discretization error needs a manufactured solution");
  ErrorNorms e;
  double vol = 0.0;
  std::array<double, 5> acc{};
  for (const auto& b : sim.blocks())
    for_each_cell(b.block->interior(), [&](int i, int j, int k) {
      const std::size_t q = b.cells(i, j, k);
      const Primitive ex = c.mms->exact(b.metrics.centroid[q]);
      const double V = b.metrics.volume[q];
      for (int v = 0; v < 5; ++v) {
        const double d = b.prim[v][q] - ex[v];
        acc[v] += d * d * V;
      }
      vol += V;
      ++e.cells;
    });
  for (int v = 0; v < 5; ++v) e.l2[v] = std::sqrt(acc[v] / vol);
  return e;
}

inline double observed_order(double coarse_error, double fine_error, double ratio = 2.0) {
  return std::log(coarse_error / fine_error) / std::log(ratio);
}

struct OrderStudy {
  std::vector<ErrorNorms> errors;
  std::vector<double> rho_orders;  // between consecutive levels
  std::vector<double> p_orders;
};

// Converged manufactured-solution runs at the given refinement levels.
inline OrderStudy run_order_study(bool viscous, const std::vector<int>& levels, SchemeConfig cfg,
                                  const StopControl& stop) {
  cfg.viscous = viscous;
  OrderStudy st;
  for (int l : levels) {
    Simulation sim(make_case("cartesian_box", l, viscous), cfg);
    const bool ok = sim.run(stop);
    ErrorNorms e = discretization_error(sim);
    e.converged = ok;
    e.steps = sim.steps();
    st.errors.push_back(e);
  }
  for (std::size_t n = 1; n < st.errors.size(); ++n) {
    const auto& a = st.errors[n - 1];
    const auto& b = st.errors[n];
    const double ratio = std::sqrt(static_cast<double>(b.cells) / static_cast<double>(a.cells));
    st.rho_orders.push_back(observed_order(a.l2[0], b.l2[0], ratio));
    st.p_orders.push_back(observed_order(a.l2[4], b.l2[4], ratio));
  }
  return st;
}

// Same grid and connectivity with every physical face switched to farfield
// and no initial perturbation.
inline CaseSetup uniform_flow_case(CaseSetup c) {
  for (auto& s : c.grid.boundaries)
    if (!s.connected) s.type = BcType::farfield;
  if (c.mms) {
    c.mms.reset();
    c.gas = GasModel{};
    c.free = freestream(kAirfoilFarfield.mach, kAirfoilFarfield.p, kAirfoilFarfield.T, kAirfoilFarfield.alpha_deg,
                        c.gas);
  }
  c.pulse_amplitude = 0.0;
  return c;
}

// Largest interior residual of a uniform flow, per equation scaled by the
// characteristic flux times the largest face area.
inline double freestream_residual(const CaseSetup& uniform, SchemeConfig cfg) {
  Simulation sim(uniform, cfg);
  sim.fill_ghosts();
  ResidualHistory ref;
  ref.set_flux_reference(uniform.free, uniform.gas);
  double worst = 0.0;
  for (auto& b : sim.blocks()) {
    compute_all_limiters(b, cfg.limiter);
    assemble_residual(b, cfg, sim.engine().ctx);
    double amax = 0.0;
    for (int d = 0; d < b.space_dims(); ++d)
      for (double a : b.metrics.area[d]) amax = std::max(amax, a);
    for_each_cell(b.block->interior(), [&](int i, int j, int k) {
      const std::size_t q = b.cells(i, j, k);
      for (int v = 0; v < 5; ++v) worst = std::max(worst, std::abs(b.res[v][q]) / (ref.flux_ref[v] * amax));
    });
  }
  return worst;
}

// Worst relative mismatch between the summed residual and the net boundary
// flux minus source, over every stage of `steps` steps.
inline double telescoping_mismatch(const CaseSetup& c, const SchemeConfig& cfg, long steps) {
  Simulation sim(c, cfg);
  double worst = 0.0;
  sim.engine().residual_hook = [&](const BlockSolver& b, const ResidualSums& sums) {
    Flux total{};
    for_each_cell(b.block->interior(), [&](int i, int j, int k) {
      const std::size_t q = b.cells(i, j, k);
      for (int v = 0; v < 5; ++v) total[v] += b.res[v][q];
    });
    for (int v = 0; v < 5; ++v) {
      const double scale = sums.scale[v] + std::abs(sums.source[v]);
      if (scale == 0.0) continue;
      worst = std::max(worst, std::abs(total[v] - (sums.boundary[v] - sums.source[v])) / scale);
    }
  };
  StopControl stop;
  stop.max_steps = steps;
  sim.run(stop);
  return worst;
}

}  // namespace blockflow

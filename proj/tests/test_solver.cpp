#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "blockflow/cases.hpp"
#include "blockflow/simulation.hpp"
#include "blockflow/verify.hpp"

using namespace blockflow;

namespace {

// 16x16 unit square, every face farfield, airfoil freestream.
CaseSetup square(int level = 0) { return uniform_flow_case(make_case("cartesian_box", level)); }

CaseSetup square_with(BcType t) {
  CaseSetup c = square();
  for (auto& s : c.grid.boundaries) s.type = t;
  return c;
}

void fill_uniform(BlockSolver& b, const Primitive& q) {
  for (std::size_t c = 0; c < b.cells.size(); ++c) b.set(c, q);
}

const BoundarySpec& spec_on(const BlockSolver& b, Face f) {
  for (const auto& s : b.physical)
    if (s.face == f) return s;
  throw Error("no spec");
}

}  // namespace

TEST(Limiter, UniformFieldGivesOne) {
  for (auto k : {LimiterKind::none, LimiterKind::van_leer, LimiterKind::van_albada, LimiterKind::minmod})
    EXPECT_EQ(limiter_value(k, 0.0, 0.0), 1.0) << to_string(k);
}

TEST(Limiter, LinearDataGivesOne) {
  for (auto k : {LimiterKind::van_leer, LimiterKind::van_albada, LimiterKind::minmod})
    EXPECT_EQ(limiter_value(k, 0.3, 0.3), 1.0) << to_string(k);
}

TEST(Limiter, ExtremumGivesZero) {
  for (auto k : {LimiterKind::van_leer, LimiterKind::van_albada, LimiterKind::minmod}) {
    EXPECT_EQ(limiter_value(k, -0.3, 0.2), 0.0) << to_string(k);
    EXPECT_EQ(limiter_value(k, 0.0, 0.2), 0.0) << to_string(k);
    EXPECT_EQ(limiter_value(k, -0.3, 0.0), 0.0) << to_string(k);
  }
}

TEST(Limiter, ValuesStayInRange) {
  std::mt19937 rng(11);
  std::normal_distribution<double> N;
  for (int n = 0; n < 10000; ++n) {
    const double a = N(rng), b = N(rng);
    for (auto k : {LimiterKind::van_leer, LimiterKind::van_albada, LimiterKind::minmod}) {
      const double p = limiter_value(k, a, b);
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 2.0);
    }
  }
}

TEST(Limiter, FieldsOfUniformStateAreOne) {
  Simulation sim(square(), SchemeConfig{});
  auto& b = sim.blocks()[0];
  fill_uniform(b, sim.setup().free);
  compute_all_limiters(b, LimiterKind::van_albada);
  for (int d = 0; d < 2; ++d)
    for (int v = 0; v < 5; ++v)
      for_each_cell(b.block->interior(), [&](int i, int j, int k) {
        EXPECT_EQ(b.psi[d][0][v][b.cells(i, j, k)], 1.0);
        EXPECT_EQ(b.psi[d][1][v][b.cells(i, j, k)], 1.0);
      });
}

TEST(Muscl, FirstOrderBranch) {
  const MusclFace f = muscl_extrapolate({1.0, 3.0, 7.0, 2.0}, 1.0, 1.0, 1.0, 1.0, 0.0, 0.3);
  EXPECT_EQ(f.left, 3.0);
  EXPECT_EQ(f.right, 7.0);
}

TEST(Muscl, UniformDataIsPreserved) {
  for (double kappa : {-1.0, 0.0, 1.0 / 3.0, 1.0}) {
    const MusclFace f = muscl_extrapolate({2.5, 2.5, 2.5, 2.5}, 0.3, 1.7, 0.0, 2.0, 1.0, kappa);
    EXPECT_EQ(f.left, 2.5);
    EXPECT_EQ(f.right, 2.5);
  }
}

TEST(Muscl, LinearDataGivesExactInterfaceValue) {
  for (double kappa : {-1.0, 0.0, 1.0 / 3.0, 0.5, 1.0}) {
    const int i = 5;
    const MusclFace f = muscl_extrapolate({i - 1.0, i + 0.0, i + 1.0, i + 2.0}, 1, 1, 1, 1, 1.0, kappa);
    EXPECT_DOUBLE_EQ(f.left, i + 0.5);
    EXPECT_DOUBLE_EQ(f.right, i + 0.5);
  }
}

TEST(Muscl, MatchesTranscribedFormula) {
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> U(-1.0, 1.0), P(0.0, 2.0);
  for (int n = 0; n < 1000; ++n) {
    const double a = U(rng), b = U(rng), c = U(rng), d = U(rng);
    const double pl = P(rng), pm = P(rng), pp = P(rng), ph = P(rng), k = U(rng);
    const MusclFace f = muscl_extrapolate({a, b, c, d}, pl, pm, pp, ph, 1.0, k);
    EXPECT_NEAR(f.left, b + 0.25 * ((1 - k) * pl * (b - a) + (1 + k) * pm * (c - b)), 1e-15);
    EXPECT_NEAR(f.right, c - 0.25 * ((1 + k) * pp * (c - b) + (1 - k) * ph * (d - c)), 1e-15);
  }
}

TEST(RungeKutta, ZeroResidualLeavesStateUnchanged) {
  for (int M : {1, 2, 4}) {
    std::vector<double> q{1.0, -2.0, 3.5};
    const auto q0 = q;
    rk_step(M, q, [](std::vector<double>& x, const std::vector<double>& x0, double) { x = x0; });
    EXPECT_EQ(q, q0);
  }
}

TEST(RungeKutta, SolverUpdateWithZeroResidualKeepsConserved) {
  CaseSetup c = make_case("inlet_ramp_2d");
  Simulation sim(c, SchemeConfig{});
  auto& b = sim.blocks()[0];
  local_time_step(b, sim.engine().cfg, sim.engine().ctx);
  store_stage_origin(b);
  for (auto& r : b.res) std::fill(r.begin(), r.end(), 0.0);
  const auto before = b.cons;
  for (double a : rk_alphas(4)) rk_update(b, a, sim.engine().ctx);
  EXPECT_EQ(b.cons, before);
}

TEST(RungeKutta, SingleStageIsForwardEuler) {
  double u = 2.0;
  const double h = 0.1;
  rk_step(1, u, [&](double& x, const double& x0, double a) { x = x0 + a * h * (-x); });
  EXPECT_DOUBLE_EQ(u, 2.0 * (1 - h));
}

TEST(RungeKutta, TwoStageMatchesOdeOracle) {
  // y' = A y; the two-stage scheme equals (I + hA + h^2 A^2 / 2) y0.
  const double A[2][2] = {{-1.0, 2.0}, {-0.5, -3.0}};
  const double h = 0.05;
  std::array<double, 2> y{1.0, 0.5};
  const auto y0 = y;
  auto f = [&](const std::array<double, 2>& x) {
    return std::array<double, 2>{A[0][0] * x[0] + A[0][1] * x[1], A[1][0] * x[0] + A[1][1] * x[1]};
  };
  rk_step(2, y, [&](std::array<double, 2>& x, const std::array<double, 2>& x0, double a) {
    const auto d = f(x);
    for (int i = 0; i < 2; ++i) x[i] = x0[i] + a * h * d[i];
  });
  const auto Ay = f(y0);
  const auto AAy = f(Ay);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(y[i], y0[i] + h * Ay[i] + 0.5 * h * h * AAy[i], 1e-14);
}

TEST(RungeKutta, NonPhysicalUpdateNamesCell) {
  Simulation sim(make_case("inlet_ramp_2d"), SchemeConfig{});
  auto& b = sim.blocks()[0];
  local_time_step(b, sim.engine().cfg, sim.engine().ctx);
  store_stage_origin(b);
  for (auto& r : b.res) std::fill(r.begin(), r.end(), 0.0);
  b.res[0][b.cells(3, 4, 1)] = 1e12;
  try {
    rk_update(b, 1.0, sim.engine().ctx);
    FAIL() << "expected a PhysicsError";
  } catch (const PhysicsError& e) {
    EXPECT_NE(std::string(e.what()).find("cell (3,4,1)"), std::string::npos) << e.what();
  }
}

TEST(Boundary, SlipWallReflectsNormalVelocity) {
  CaseSetup c = square_with(BcType::slip_wall);
  Simulation sim(c, SchemeConfig{});
  auto& b = sim.blocks()[0];
  fill_uniform(b, {1.2, 1.0, 2.0, 0.0, 1e5});
  enforce_boundary(b, spec_on(b, Face::j_min), sim.engine().ctx);
  for (int i = 1; i <= 16; ++i)
    for (int j : {0, -1}) {
      const Primitive g = b.get(b.cells(i, j, 1));
      EXPECT_DOUBLE_EQ(g.u, 1.0);
      EXPECT_DOUBLE_EQ(g.v, -2.0);
      EXPECT_EQ(g.w, 0.0);
      EXPECT_EQ(g.rho, 1.2);
      EXPECT_EQ(g.p, 1e5);
    }
}

TEST(Boundary, NoSlipWallNegatesVelocity) {
  CaseSetup c = square_with(BcType::no_slip_wall);
  Simulation sim(c, SchemeConfig{});
  auto& b = sim.blocks()[0];
  fill_uniform(b, {1.2, 1.0, 2.0, 0.0, 1e5});
  enforce_boundary(b, spec_on(b, Face::i_max), sim.engine().ctx);
  const Primitive g = b.get(b.cells(17, 5, 1));
  EXPECT_EQ(g.u, -1.0);
  EXPECT_EQ(g.v, -2.0);
  EXPECT_EQ(g.p, 1e5);
}

TEST(Boundary, SupersonicInflowGhostIsFreestream) {
  Simulation sim(make_case("inlet_ramp_2d"), SchemeConfig{});
  auto& b = sim.blocks()[0];
  fill_uniform(b, {0.5, 10.0, 3.0, 0.0, 2e4});
  enforce_boundary(b, spec_on(b, Face::i_min), sim.engine().ctx);
  const GasModel g;
  const Primitive in = freestream(4.0, 12270.0, 217.0, 0.0, g);
  for (int j = 1; j <= 16; ++j)
    for (int i : {0, -1})
      for (int v = 0; v < 5; ++v) EXPECT_EQ(b.get(b.cells(i, j, 1))[v], in[v]);
}

TEST(Boundary, FarfieldIsFixedPointOfFreestream) {
  Simulation sim(square(), SchemeConfig{});
  auto& b = sim.blocks()[0];
  const Primitive f = sim.setup().free;
  fill_uniform(b, f);
  for (const auto& s : b.physical) enforce_boundary(b, s, sim.engine().ctx);
  for (std::size_t c = 0; c < b.cells.size(); ++c)
    for (int v = 0; v < 5; ++v) EXPECT_NEAR(b.get(c)[v], f[v], 1e-12 * (std::abs(f[v]) + f.sound_speed(sim.setup().gas)));
}

TEST(Boundary, FarfieldSupersonicBranches) {
  const GasModel g;
  const Primitive in{1.0, 800.0, 0.0, 0.0, 1e5}, free{1.1, 900.0, 10.0, 0.0, 1.2e5};
  const Primitive out = farfield_state(in, free, {1, 0, 0}, g);
  EXPECT_EQ(out.rho, in.rho);
  const Primitive inflow = farfield_state(in, free, {-1, 0, 0}, g);
  EXPECT_EQ(inflow.rho, free.rho);
}

TEST(WallFlux, UniformPressureCarriesNoMassOrEnergy) {
  CaseSetup c = square_with(BcType::slip_wall);
  SchemeConfig cfg;
  Simulation sim(c, cfg);
  auto& b = sim.blocks()[0];
  fill_uniform(b, {1.1, 120.0, -45.0, 0.0, 9e4});
  sim.fill_ghosts();
  compute_all_limiters(b, cfg.limiter);
  const ResidualSums s = assemble_residual(b, cfg, sim.engine().ctx);
  EXPECT_EQ(s.boundary[0], 0.0);
  EXPECT_EQ(s.boundary[4], 0.0);
}

TEST(WallFlux, StagnantFieldHasPressureMomentumFlux) {
  CaseSetup c = square_with(BcType::slip_wall);
  SchemeConfig cfg;
  Simulation sim(c, cfg);
  auto& b = sim.blocks()[0];
  const double p = 9e4;
  fill_uniform(b, {1.1, 0.0, 0.0, 0.0, p});
  sim.fill_ghosts();
  compute_all_limiters(b, cfg.limiter);
  assemble_residual(b, cfg, sim.engine().ctx);
  // A closed cell under uniform pressure has zero net force, and every face
  // flux is n p A, so each corner cell balances to round-off.
  const double h = 1.0 / 16;
  for (int v = 0; v < 5; ++v) EXPECT_LT(std::abs(b.res[v][b.cells(1, 1, 1)]), 1e-10 * p * h);
  EXPECT_EQ(detail::wall_pressure(b, Face::j_min, {4, 1, 1}), p);
}

TEST(WallFlux, LinearPressureExtrapolatesExactly) {
  CaseSetup c = square_with(BcType::slip_wall);
  Simulation sim(c, SchemeConfig{});
  auto& b = sim.blocks()[0];
  auto pressure = [](Vec3 x) { return 1e5 + 3e4 * x.y - 2e4 * x.x; };
  for_each_cell(b.block->interior(), [&](int i, int j, int k) {
    const std::size_t q = b.cells(i, j, k);
    b.set(q, {1.0, 0.0, 0.0, 0.0, pressure(b.metrics.centroid[q])});
  });
  for (int i = 1; i <= 16; ++i) {
    const double x = (i - 0.5) / 16;
    EXPECT_NEAR(detail::wall_pressure(b, Face::j_min, {i, 1, 1}), pressure({x, 0.0, 0.0}), 1e-12 * 1e5);
    EXPECT_NEAR(detail::wall_pressure(b, Face::j_max, {i, 16, 1}), pressure({x, 1.0, 0.0}), 1e-12 * 1e5);
  }
}

TEST(TimeStep, UniformCartesianFormula) {
  SchemeConfig cfg;
  Simulation sim(square(), cfg);
  auto& b = sim.blocks()[0];
  const Primitive q{1.1, 120.0, -45.0, 0.0, 9e4};
  fill_uniform(b, q);
  local_time_step(b, cfg, sim.engine().ctx);
  const double a = q.sound_speed(sim.setup().gas), h = 1.0 / 16;
  const double ref = h * h / (2 * (std::abs(q.u) + a) * h + 2 * (std::abs(q.v) + a) * h);
  for_each_cell(b.block->interior(), [&](int i, int j, int k) { EXPECT_NEAR(b.dt[b.cells(i, j, k)], ref, 1e-14 * ref); });

  cfg.cfl = 2.0;
  const double dt1 = b.dt[b.cells(3, 3, 1)];
  local_time_step(b, cfg, sim.engine().ctx);
  EXPECT_EQ(b.dt[b.cells(3, 3, 1)], 2.0 * dt1);
}

TEST(TimeStep, RefinementHalvesStep) {
  SchemeConfig cfg;
  const Primitive q{1.1, 120.0, -45.0, 0.0, 9e4};
  std::array<double, 2> dt{};
  for (int n = 0; n < 2; ++n) {
    Simulation sim(square(2 * n), cfg);
    auto& b = sim.blocks()[0];
    fill_uniform(b, q);
    local_time_step(b, cfg, sim.engine().ctx);
    dt[n] = b.dt[b.cells(1, 1, 1)];
  }
  EXPECT_NEAR(dt[1] / dt[0], 0.5, 1e-12);
}

TEST(TimeStep, ViscousTermShrinksStep) {
  SchemeConfig cfg;
  Simulation sim(make_case("cartesian_box", 0, true), cfg);
  auto& b = sim.blocks()[0];
  local_time_step(b, cfg, sim.engine().ctx);
  const double inv = b.dt[b.cells(5, 5, 1)];
  cfg.viscous = true;
  local_time_step(b, cfg, sim.engine().ctx);
  EXPECT_LT(b.dt[b.cells(5, 5, 1)], inv);
}

TEST(Iterate, FreestreamConvergesAtFirstStep) {
  Simulation sim(square(), SchemeConfig{});
  StopControl stop;
  stop.max_steps = 50;
  stop.absolute_target = 1e-12;
  EXPECT_TRUE(sim.run(stop));
  EXPECT_EQ(sim.steps(), 1);
  EXPECT_LE(sim.history().max_scaled(0), 1e-12);
}

TEST(Iterate, RelativeHistoryStartsAtOne) {
  Simulation sim(make_case("inlet_ramp_2d"), SchemeConfig{});
  StopControl stop;
  stop.max_steps = 3;
  sim.run(stop);
  for (double r : sim.history().relative[0]) EXPECT_TRUE(r == 1.0 || r == 0.0);
  EXPECT_EQ(sim.history().relative[0][0], 1.0);
}

TEST(Iterate, RunsAreDeterministic) {
  StopControl stop;
  stop.max_steps = 30;
  Simulation a(make_case("multiblock_box_3d"), SchemeConfig{});
  Simulation b(make_case("multiblock_box_3d"), SchemeConfig{});
  a.run(stop);
  b.run(stop);
  EXPECT_EQ(a.history().absolute, b.history().absolute);
  EXPECT_TRUE(bitwise_equal(a.solution(), b.solution()));
}

TEST(Iterate, FrozenLimitersAreBitwiseConstant) {
  SchemeConfig cfg;
  cfg.limiter_freeze_at = 5;
  Simulation sim(make_case("inlet_ramp_2d"), cfg);
  for (int n = 0; n < 6; ++n) sim.step();
  const auto psi = sim.blocks()[0].psi;
  for (int n = 0; n < 10; ++n) sim.step();
  EXPECT_EQ(sim.blocks()[0].psi, psi);
}

TEST(Iterate, DivergenceAborts) {
  SchemeConfig cfg;
  Simulation sim(make_case("inlet_ramp_2d"), cfg);
  StopControl stop;
  stop.max_steps = 200;
  stop.divergence_limit = 1e-3;
  EXPECT_THROW(sim.run(stop), PhysicsError);
}

// epsilon = 0 must reduce to the plain first-order Godunov-type residual
// of neighbouring cell values, written out here directly.
TEST(Iterate, FirstOrderMatchesHandWrittenResidual) {
  CaseSetup c = make_case("cartesian_box");
  SchemeConfig cfg;
  cfg.epsilon = 0.0;
  cfg.flux_overwrite = false;
  Simulation sim(c, cfg);
  auto& b = sim.blocks()[0];
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> U(0.9, 1.1);
  for_each_cell(b.block->interior(), [&](int i, int j, int k) {
    const std::size_t q = b.cells(i, j, k);
    Primitive s = b.get(q);
    s.rho *= U(rng);
    s.p *= U(rng);
    b.set(q, s);
  });
  sim.fill_ghosts();
  compute_all_limiters(b, cfg.limiter);
  assemble_residual(b, cfg, sim.engine().ctx);
  const GasModel& g = c.gas;
  const double h = 1.0 / 16;
  for (int j = 1; j <= 16; ++j)
    for (int i = 1; i <= 16; ++i) {
      auto Q = [&](int a, int bb) { return b.get(b.cells(a, bb, 1)); };
      Flux r{};
      const Flux fe = roe_flux(Q(i, j), Q(i + 1, j), {1, 0, 0}, g, cfg.entropy_fix);
      const Flux fw = roe_flux(Q(i - 1, j), Q(i, j), {1, 0, 0}, g, cfg.entropy_fix);
      const Flux fn = roe_flux(Q(i, j), Q(i, j + 1), {0, 1, 0}, g, cfg.entropy_fix);
      const Flux fs = roe_flux(Q(i, j - 1), Q(i, j), {0, 1, 0}, g, cfg.entropy_fix);
      const Flux S = c.mms->source(b.metrics.centroid[b.cells(i, j, 1)]);
      for (int v = 0; v < 5; ++v) r[v] = (fe[v] - fw[v] + fn[v] - fs[v]) * h - S[v] * h * h;
      for (int v = 0; v < 5; ++v)
        EXPECT_NEAR(b.res[v][b.cells(i, j, 1)], r[v], 1e-9 * (std::abs(fe[v]) + 1.0) * h) << i << "," << j << " " << v;
    }
}

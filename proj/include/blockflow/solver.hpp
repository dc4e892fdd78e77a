#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "blockflow/core.hpp"
#include "blockflow/mesh.hpp"
#include "blockflow/mms.hpp"
#include "blockflow/physics.hpp"

namespace blockflow {

enum class LimiterKind { none, van_leer, van_albada, minmod };

inline std::string_view to_string(LimiterKind k) {
  switch (k) {
    case LimiterKind::none: return "none";
    case LimiterKind::van_leer: return "van_leer";
    case LimiterKind::van_albada: return "van_albada";
    case LimiterKind::minmod: return "minmod";
  }
  return "?";
}

struct SchemeConfig {
  FluxScheme flux = FluxScheme::roe;
  double epsilon = 1.0;
  double kappa = -1.0;
  LimiterKind limiter = LimiterKind::van_albada;
  int rk_stages = 2;
  double cfl = 1.0;
  long limiter_freeze_at = -1;  // step index, -1 = never
  double entropy_fix = 0.1;
  bool viscous = false;
  bool flux_overwrite = true;
  std::optional<double> wall_temperature;

  void validate() const {
    if (epsilon != 0.0 && epsilon != 1.0) throw ConfigError("epsilon must be 0 or 1");
    if (kappa < -1.0 || kappa > 1.0) throw ConfigError("kappa must lie in [-1, 1]");
    if (rk_stages != 1 && rk_stages != 2 && rk_stages != 4) throw ConfigError("rk_stages must be 1, 2 or 4");
    if (!(cfl > 0.0)) throw ConfigError("cfl must be positive");
  }
};

inline const std::vector<double>& rk_alphas(int M) {
  static const std::vector<double> a1{1.0};
  static const std::vector<double> a2{0.5, 1.0};
  static const std::vector<double> a4{0.25, 1.0 / 3.0, 0.5, 1.0};
  switch (M) {
    case 1: return a1;
    case 2: return a2;
    case 4: return a4;
  }
  throw ConfigError("unsupported Runge-Kutta stage count " + std::to_string(M));
}

// Q^(k) = Q^n + alpha_k * h * f(Q^(k-1)); `stage(q, q0, alpha)` performs one stage.
template <typename State, typename Stage>
void rk_step(int M, State& q, Stage&& stage) {
  const State q0 = q;
  for (double a : rk_alphas(M)) stage(q, q0, a);
}

struct CaseContext {
  GasModel gas;
  Primitive free;
  const ManufacturedSolution* mms = nullptr;
  bool viscous = false;
  std::optional<double> wall_temperature;
};

// Psi(a/b) with b the difference the limiter multiplies.
inline double limiter_value(LimiterKind k, double a, double b) {
  if (k == LimiterKind::none) return 1.0;
  if (b == 0.0) {
    if (a == 0.0) return 1.0;
    if (a < 0.0) return 0.0;
    return k == LimiterKind::van_leer ? 2.0 : 1.0;
  }
  const double r = a / b;
  if (!(r > 0.0)) return 0.0;
  switch (k) {
    case LimiterKind::van_leer: return 2.0 * r / (1.0 + r);
    case LimiterKind::van_albada: return (r * r + r) / (1.0 + r * r);
    case LimiterKind::minmod: return std::min(1.0, r);
    case LimiterKind::none: break;
  }
  return 1.0;
}

struct MusclFace {
  double left;
  double right;
};

// Face m lies between q[1] (cell m) and q[2] (cell m+1); q[0], q[3] are the
// outer neighbours. Psi arguments follow the face they belong to.
inline MusclFace muscl_extrapolate(const std::array<double, 4>& q, double psi_plus_lo, double psi_minus_f,
                                   double psi_plus_f, double psi_minus_hi, double eps, double kappa) {
  const double dlo = q[1] - q[0];
  const double df = q[2] - q[1];
  const double dhi = q[3] - q[2];
  const double c = 0.25 * eps;
  return {q[1] + c * ((1.0 - kappa) * psi_plus_lo * dlo + (1.0 + kappa) * psi_minus_f * df),
          q[2] - c * ((1.0 + kappa) * psi_plus_f * df + (1.0 - kappa) * psi_minus_hi * dhi)};
}

struct BlockSolver {
  const Block* block = nullptr;
  BlockMetrics metrics;
  std::vector<BoundarySpec> physical;
  int parent = 0;
  Index3 offset{0, 0, 0};

  Lattice cells;
  std::array<std::vector<double>, 5> prim;
  std::array<std::vector<double>, 5> cons;
  std::array<std::vector<double>, 5> cons0;
  std::array<std::vector<double>, 5> res;
  std::vector<double> dt;
  std::array<std::vector<double>, 5> source;  // volume-integrated manufactured source
  // psi[dir][0 = plus, 1 = minus][var], indexed by the cell index of the face.
  std::array<std::array<std::array<std::vector<double>, 5>, 2>, 3> psi;
  bool limiters_valid = false;
  // For each face side, physical-spec index per face cell or -1.
  std::array<std::vector<int>, 6> face_spec;

  int dims(int a) const { return block->dims[a]; }
  int space_dims() const { return block->space_dims(); }

  Primitive get(std::size_t c) const {
    return {prim[0][c], prim[1][c], prim[2][c], prim[3][c], prim[4][c]};
  }
  void set(std::size_t c, const Primitive& q) {
    for (int v = 0; v < 5; ++v) prim[v][c] = q[v];
  }
  Lattice face_lattice(Face f) const {
    const Box fc = block->face_cells(f);
    return Lattice(fc.lo, {fc.extent(0), fc.extent(1), fc.extent(2)});
  }
};

inline void init_block_solver(BlockSolver& s, const Block& b, std::vector<BoundarySpec> physical) {
  s.block = &b;
  s.metrics = compute_metrics(b);
  s.physical = std::move(physical);
  s.cells = b.cell_lattice();
  const std::size_t n = s.cells.size();
  for (int v = 0; v < 5; ++v) {
    s.prim[v].assign(n, 0.0);
    s.cons[v].assign(n, 0.0);
    s.cons0[v].assign(n, 0.0);
    s.res[v].assign(n, 0.0);
  }
  s.dt.assign(n, 0.0);
  for (int d = 0; d < 3; ++d)
    for (int pm = 0; pm < 2; ++pm)
      for (int v = 0; v < 5; ++v) s.psi[d][pm][v].assign(n, 0.0);
  s.limiters_valid = false;
  for (int f = 0; f < 6; ++f) {
    const Face face = static_cast<Face>(f);
    if (axis_of(face) >= b.space_dims()) continue;
    const Lattice fl = s.face_lattice(face);
    s.face_spec[f].assign(fl.size(), -1);
    for (std::size_t p = 0; p < s.physical.size(); ++p) {
      if (s.physical[p].face != face) continue;
      for_each_cell(s.physical[p].cells,
                    [&](int i, int j, int k) { s.face_spec[f][fl(i, j, k)] = static_cast<int>(p); });
    }
  }
}

inline void set_interior(BlockSolver& s, const CaseContext& ctx, const std::function<Primitive(Vec3)>& init) {
  for_each_cell(s.block->interior(), [&](int i, int j, int k) {
    const std::size_t c = s.cells(i, j, k);
    const Primitive q = init(s.metrics.centroid[c]);
    s.set(c, q);
    const Conserved u = to_conserved(q, ctx.gas);
    for (int v = 0; v < 5; ++v) s.cons[v][c] = u[v];
  });
}

// ---------------------------------------------------------------------------
// Physical boundary conditions

inline Primitive farfield_state(const Primitive& in, const Primitive& free, Vec3 n, const GasModel& g) {
  const double gm1 = g.gamma - 1.0;
  const double ai = in.sound_speed(g);
  const double af = free.sound_speed(g);
  const double vni = dot(in.vel(), n);
  const double vnf = dot(free.vel(), n);
  if (vnf <= -af) return free;
  if (vni >= ai) return in;
  const double rp = vni + 2.0 * ai / gm1;
  const double rm = vnf - 2.0 * af / gm1;
  const double vn = 0.5 * (rp + rm);
  const double a = 0.25 * gm1 * (rp - rm);
  const Primitive& ref = vn >= 0.0 ? in : free;
  const double entropy = ref.p / std::pow(ref.rho, g.gamma);
  Primitive b;
  b.rho = std::pow(a * a / (g.gamma * entropy), 1.0 / gm1);
  b.p = b.rho * a * a / g.gamma;
  const Vec3 vt = ref.vel() - dot(ref.vel(), n) * n;
  const Vec3 V = vt + vn * n;
  b.u = V.x;
  b.v = V.y;
  b.w = V.z;
  return b;
}

inline Vec3 outward_normal(const BlockSolver& s, Face f, Index3 cell) {
  const int d = axis_of(f);
  Index3 fi = cell;
  fi[d] = is_max_face(f) ? s.dims(d) : 0;
  const Vec3 n = s.metrics.normal[d][s.metrics.faces[d](fi)];
  return is_max_face(f) ? n : -1.0 * n;
}

// Fills the ghost layers of one physical patch over its phase range.
inline void enforce_boundary(BlockSolver& s, const BoundarySpec& spec, const CaseContext& ctx) {
  if (spec.connected) throw Error("connected boundaries are filled by the exchange");
  const Block& b = *s.block;
  const int d = spec.axis();
  const bool hi = is_max_face(spec.face);
  const int N = b.dims[d];
  const int g = b.ghost(d);
  const GasModel& gas = ctx.gas;
  for_each_cell(phase_range(b, spec.face, spec.cells), [&](int i, int j, int k) {
    Index3 c{i, j, k};
    auto at = [&](int layer_from_face) {  // >0 interior layer, <=0 ghost layer
      Index3 x = c;
      x[d] = hi ? N + 1 - layer_from_face : layer_from_face;
      return s.cells(x);
    };
    const Vec3 n = outward_normal(s, spec.face, c);
    const Primitive i1 = s.get(at(1));
    switch (spec.type) {
      case BcType::supersonic_inflow:
        for (int l = 1; l <= g; ++l) s.set(at(1 - l), ctx.free);
        break;
      case BcType::supersonic_outflow: {
        const Primitive i2 = s.get(at(2));
        for (int l = 1; l <= g; ++l) {
          Primitive q;
          for (int v = 0; v < 5; ++v) q[v] = i1[v] + l * (i1[v] - i2[v]);
          s.set(at(1 - l), q.physical() ? q : i1);
        }
        break;
      }
      case BcType::slip_wall:
        for (int l = 1; l <= g; ++l) {
          Primitive q = s.get(at(l));
          const Vec3 V = q.vel();
          const Vec3 r = V - 2.0 * dot(V, n) * n;
          q.u = r.x;
          q.v = r.y;
          q.w = r.z;
          s.set(at(1 - l), q);
        }
        break;
      case BcType::no_slip_wall:
        for (int l = 1; l <= g; ++l) {
          Primitive q = s.get(at(l));
          q.u = -q.u;
          q.v = -q.v;
          q.w = -q.w;
          if (ctx.wall_temperature) {
            const double Tg = 2.0 * *ctx.wall_temperature - q.T(gas);
            q.rho = q.p / (gas.R * (Tg > 0.0 ? Tg : *ctx.wall_temperature));
          }
          s.set(at(1 - l), q);
        }
        break;
      case BcType::farfield: {
        const Primitive bs = farfield_state(i1, ctx.free, n, gas);
        for (int l = 1; l <= g; ++l) s.set(at(1 - l), bs);
        break;
      }
      case BcType::mms_dirichlet:
        if (!ctx.mms) throw PhysicsError("mms_dirichlet boundary without a manufactured solution");
        for (int l = 1; l <= g; ++l) {
          const std::size_t gc = at(1 - l);
          s.set(gc, ctx.mms->exact(s.metrics.centroid[gc]));
        }
        break;
    }
  });
}

inline void enforce_physical_phase(BlockSolver& s, int axis, const CaseContext& ctx) {
  for (const auto& spec : s.physical)
    if (spec.axis() == axis) enforce_boundary(s, spec, ctx);
}

// ---------------------------------------------------------------------------
// Limiters and residual

inline void compute_limiters(BlockSolver& s, int d, LimiterKind kind) {
  const Block& b = *s.block;
  const int N = b.dims[d];
  const std::ptrdiff_t st = s.cells.stride(d);
  Box lines = b.interior();
  lines.lo[d] = lines.hi[d] = 0;
  std::vector<double> delta(static_cast<std::size_t>(N + 3));
  for (int v = 0; v < 5; ++v) {
    const std::vector<double>& q = s.prim[v];
    std::vector<double>& pp = s.psi[d][0][v];
    std::vector<double>& pm = s.psi[d][1][v];
    for_each_cell(lines, [&](int i, int j, int k) {
      const std::size_t c0 = s.cells(i, j, k);  // cell index 0 along d
      auto cell = [&](int m) { return static_cast<std::size_t>(static_cast<std::ptrdiff_t>(c0) + m * st); };
      // delta[m + 1] = Q_{m+1} - Q_m for m in [-1, N+1]
      for (int m = -1; m <= N + 1; ++m) delta[m + 1] = q[cell(m + 1)] - q[cell(m)];
      for (int m = -1; m <= N + 1; ++m) {
        const double dm = delta[m + 1];
        pp[cell(m)] = m <= N ? limiter_value(kind, delta[m + 2], dm) : 0.0;
        pm[cell(m)] = m >= 0 ? limiter_value(kind, delta[m], dm) : 0.0;
      }
    });
  }
}

inline void compute_all_limiters(BlockSolver& s, LimiterKind kind) {
  for (int d = 0; d < s.space_dims(); ++d) compute_limiters(s, d, kind);
  s.limiters_valid = true;
}

struct ResidualSums {
  Flux boundary{};  // net outward flux through block boundary faces
  Flux source{};    // integral of the source term
  Flux scale{};     // sum of |face flux| over all faces
};

namespace detail {

inline double wall_pressure(const BlockSolver& s, Face f, Index3 cell) {
  const Block& b = *s.block;
  const int d = axis_of(f);
  const bool hi = is_max_face(f);
  const int N = b.dims[d];
  Index3 c1 = cell, c2 = cell;
  c1[d] = hi ? N : 1;
  c2[d] = hi ? N - 1 : 2;
  Index3 fi = cell;
  fi[d] = hi ? N : 0;
  const auto fn = detail::face_nodes(d, fi, b.two_d);
  Vec3 fc;
  for (const auto& nd : fn) fc += b.node(nd[0], nd[1], nd[2]);
  fc = 0.25 * fc;
  const Vec3 n = s.metrics.normal[d][s.metrics.faces[d](fi)];
  const std::size_t i1 = s.cells(c1), i2 = s.cells(c2);
  const double p1 = s.prim[4][i1];
  if (N < 2) return p1;
  const double p2 = s.prim[4][i2];
  const double d1 = std::abs(dot(s.metrics.centroid[i1] - fc, n));
  const double d2 = std::abs(dot(s.metrics.centroid[i2] - fc, n));
  if (!(d2 - d1 > 0.0)) return p1;
  const double pw = p1 + (p1 - p2) * d1 / (d2 - d1);
  return pw > 0.0 ? pw : p1;
}

}  // namespace detail

// R = sum_faces (F_inv - F_visc) A - S V over interior cells, written to s.res.
inline ResidualSums assemble_residual(BlockSolver& s, const SchemeConfig& cfg, const CaseContext& ctx) {
  const Block& b = *s.block;
  const BlockMetrics& M = s.metrics;
  const GasModel& gas = ctx.gas;
  ResidualSums sums;
  for (int v = 0; v < 5; ++v) std::fill(s.res[v].begin(), s.res[v].end(), 0.0);

  const bool viscous = cfg.viscous;
  Lattice nodes;
  std::array<std::vector<double>, 4> nodal;  // u, v, w, T
  if (viscous) {
    nodes.lo = {0, 0, 0};
    nodes.n = {b.dims[0] + 1, b.dims[1] + 1, b.two_d ? 1 : b.dims[2] + 1};
    for (auto& a : nodal) a.assign(nodes.size(), 0.0);
    const int nk = b.two_d ? 0 : b.dims[2];
    const double w = b.two_d ? 0.25 : 0.125;
    for (int k = 0; k <= nk; ++k)
      for (int j = 0; j <= b.dims[1]; ++j)
        for (int i = 0; i <= b.dims[0]; ++i) {
          std::array<double, 4> acc{};
          for (int dk = 0; dk <= (b.two_d ? 0 : 1); ++dk)
            for (int dj = 0; dj <= 1; ++dj)
              for (int di = 0; di <= 1; ++di) {
                const std::size_t c = s.cells(i + di, j + dj, b.two_d ? 1 : k + dk);
                acc[0] += s.prim[1][c];
                acc[1] += s.prim[2][c];
                acc[2] += s.prim[3][c];
                acc[3] += s.prim[4][c] / (gas.R * s.prim[0][c]);
              }
          const std::size_t n = nodes(i, j, k);
          for (int q = 0; q < 4; ++q) nodal[q][n] = w * acc[q];
        }
  }

  for (int d = 0; d < b.space_dims(); ++d) {
    const int N = b.dims[d];
    const std::ptrdiff_t st = s.cells.stride(d);
    Box lines = b.interior();
    lines.lo[d] = lines.hi[d] = 0;
    const auto& pp = s.psi[d][0];
    const auto& pm = s.psi[d][1];
    std::vector<Flux> row(static_cast<std::size_t>(N + 1));
    for_each_cell(lines, [&](int i, int j, int k) {
      const std::size_t c0 = s.cells(i, j, k);
      auto cell = [&](int m) { return static_cast<std::size_t>(static_cast<std::ptrdiff_t>(c0) + m * st); };
      for (int m = 0; m <= N; ++m) {
        Index3 fi{i, j, k};
        fi[d] = m;
        const std::size_t f = M.faces[d](fi);
        const Vec3 n = M.normal[d][f];
        const double A = M.area[d][f];
        Primitive L, R;
        const std::size_t cm = cell(m), cp = cell(m + 1);
        for (int v = 0; v < 5; ++v) {
          const auto& q = s.prim[v];
          const MusclFace fv = muscl_extrapolate({q[cell(m - 1)], q[cm], q[cp], q[cell(m + 2)]},
                                                 pp[v][cell(m - 1)], pm[v][cm], pp[v][cm], pm[v][cp],
                                                 cfg.epsilon, cfg.kappa);
          L[v] = fv.left;
          R[v] = fv.right;
        }
        if (!L.physical() || !R.physical()) {
          std::ostringstream os;
          os << "non-physical reconstructed state at " << "ijk"[d] << "-face (" << fi[0] << "," << fi[1] << ","
             << fi[2] << ") of block " << b.id;
          throw PhysicsError(os.str());
        }
        Flux F;
        const bool boundary = m == 0 || m == N;
        int spec = -1;
        if (boundary) {
          const Face face = make_face(d, m == N);
          Index3 fc{i, j, k};
          fc[d] = m == N ? N : 1;
          spec = s.face_spec[static_cast<int>(face)][s.face_lattice(face)(fc)];
        }
        const BcType type = spec >= 0 ? s.physical[spec].type : BcType::farfield;
        if (cfg.flux_overwrite && spec >= 0 && (type == BcType::slip_wall || type == BcType::no_slip_wall)) {
          Index3 cc{i, j, k};
          const double pw = detail::wall_pressure(s, make_face(d, m == N), cc);
          F = {0.0, n.x * pw, n.y * pw, n.z * pw, 0.0};
        } else if (cfg.flux_overwrite && spec >= 0 && type == BcType::farfield) {
          const bool hi = m == N;
          const Primitive in = s.get(hi ? cm : cp);
          const Primitive bs = farfield_state(in, ctx.free, hi ? n : -1.0 * n, gas);
          F = inviscid_normal_flux(bs, n, gas);
        } else {
          F = numerical_flux(cfg.flux, L, R, n, gas, cfg.entropy_fix);
        }
        if (viscous) {
          const auto& w = M.grad_weights[d][f];
          const auto dn = diamond_nodes(d, fi, b.two_d);
          FaceGradient grad{};
          const Primitive qm = s.get(cm), qp = s.get(cp);
          const std::array<double, 4> vm{qm.u, qm.v, qm.w, qm.T(gas)};
          const std::array<double, 4> vp{qp.u, qp.v, qp.w, qp.T(gas)};
          const int nn = b.two_d ? 2 : 4;
          for (int q = 0; q < 4; ++q) {
            Vec3 gq = vm[q] * w[0] + vp[q] * w[1];
            for (int a = 0; a < nn; ++a) gq += nodal[q][nodes(dn[a])] * w[2 + a];
            grad[q] = gq;
          }
          Primitive avg;
          for (int v = 0; v < 5; ++v) avg[v] = 0.5 * (qm[v] + qp[v]);
          const Flux Fv = viscous_normal_flux(grad, avg, n, gas);
          for (int v = 0; v < 5; ++v) F[v] -= Fv[v];
        }
        for (int v = 0; v < 5; ++v) F[v] *= A;
        row[m] = F;
        for (int v = 0; v < 5; ++v) {
          sums.scale[v] += std::abs(F[v]);
          if (m == 0) sums.boundary[v] -= F[v];
          if (m == N) sums.boundary[v] += F[v];
        }
      }
      for (int m = 0; m <= N; ++m)
        for (int v = 0; v < 5; ++v) {
          if (m >= 1) s.res[v][cell(m)] += row[m][v];
          if (m + 1 <= N) s.res[v][cell(m + 1)] -= row[m][v];
        }
    });
  }

  if (ctx.mms) {
    if (s.source[0].empty()) {
      for (auto& f : s.source) f.assign(s.cells.size(), 0.0);
      for_each_cell(b.interior(), [&](int i, int j, int k) {
        const std::size_t c = s.cells(i, j, k);
        const Flux S = ctx.mms->source(M.centroid[c]);
        for (int v = 0; v < 5; ++v) s.source[v][c] = S[v] * M.volume[c];
      });
    }
    for_each_cell(b.interior(), [&](int i, int j, int k) {
      const std::size_t c = s.cells(i, j, k);
      for (int v = 0; v < 5; ++v) {
        const double sv = s.source[v][c];
        s.res[v][c] -= sv;
        sums.source[v] += sv;
      }
    });
  }
  return sums;
}

inline void local_time_step(BlockSolver& s, const SchemeConfig& cfg, const CaseContext& ctx) {
  const Block& b = *s.block;
  const BlockMetrics& M = s.metrics;
  const GasModel& gas = ctx.gas;
  const double visc_coef = 2.0 * std::max(4.0 / 3.0, gas.gamma / gas.Pr);
  for_each_cell(b.interior(), [&](int i, int j, int k) {
    const std::size_t c = s.cells(i, j, k);
    const Primitive q = s.get(c);
    const double a = q.sound_speed(gas);
    const double V = M.volume[c];
    const double nu = cfg.viscous ? gas.mu(q.T(gas)) / q.rho : 0.0;
    double lam = 0.0;
    for (int d = 0; d < b.space_dims(); ++d)
      for (int side = 0; side < 2; ++side) {
        const std::size_t f = side == 0 ? M.low_face(d, i, j, k) : M.high_face(d, i, j, k);
        const double A = M.area[d][f];
        lam += (std::abs(dot(q.vel(), M.normal[d][f])) + a) * A;
        if (cfg.viscous) lam += visc_coef * nu * A * A / V;
      }
    s.dt[c] = cfg.cfl * V / lam;
  });
}

inline void store_stage_origin(BlockSolver& s) {
  for (int v = 0; v < 5; ++v) s.cons0[v] = s.cons[v];
}

// Q = Q0 - alpha dt/V R on interior cells, then primitives refreshed.
inline void rk_update(BlockSolver& s, double alpha, const CaseContext& ctx) {
  const Block& b = *s.block;
  for_each_cell(b.interior(), [&](int i, int j, int k) {
    const std::size_t c = s.cells(i, j, k);
    const double f = alpha * s.dt[c] / s.metrics.volume[c];
    Conserved u;
    for (int v = 0; v < 5; ++v) {
      u[v] = s.cons0[v][c] - f * s.res[v][c];
      s.cons[v][c] = u[v];
    }
    if (b.two_d) s.cons[3][c] = u[3] = 0.0;
    Primitive q;
    if (!to_primitive(u, ctx.gas, q)) {
      std::ostringstream os;
      os << "non-physical update in cell (" << i << "," << j << "," << k << ") of block " << b.id
         << " (reduce cfl)";
      throw PhysicsError(os.str());
    }
    s.set(c, q);
  });
}

}  // namespace blockflow

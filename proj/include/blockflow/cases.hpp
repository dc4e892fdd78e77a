#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "blockflow/core.hpp"
#include "blockflow/mesh.hpp"
#include "blockflow/mms.hpp"
#include "blockflow/physics.hpp"

namespace blockflow {

struct FreestreamSpec {
  double mach = 0.0;
  double p = 0.0;
  double T = 0.0;
  double alpha_deg = 0.0;
  int lift_axis = 1;
};

inline constexpr FreestreamSpec kInletInflow{4.0, 12270.0, 217.0, 0.0, 1};
inline constexpr FreestreamSpec kAirfoilFarfield{0.25, 84307.0, 300.0, 5.0, 1};
inline constexpr FreestreamSpec kWingFarfield{0.8395, 315979.763, 255.556, 3.06, 2};

struct CaseSetup {
  std::string name;
  int level = 0;
  bool viscous = false;
  MultiBlockGrid grid;
  GasModel gas;
  Primitive free;
  std::optional<ManufacturedSolution> mms;
  // Optional smooth pressure pulse added to the initial field.
  double pulse_amplitude = 0.0;
  Vec3 pulse_center;
  double pulse_radius = 1.0;

  Primitive initial(Vec3 x) const {
    if (mms) return mms->exact(x);
    Primitive q = free;
    if (pulse_amplitude != 0.0) {
      const Vec3 d = x - pulse_center;
      const double f = 1.0 + pulse_amplitude * std::exp(-dot(d, d) / (pulse_radius * pulse_radius));
      q.p *= f;
      q.rho *= f;
    }
    return q;
  }
};

inline const std::vector<std::string>& case_names() {
  static const std::vector<std::string> names{"inlet_ramp_2d", "c_annulus_2d", "multiblock_box_3d",
                                              "cartesian_box", "deadlock_demo"};
  return names;
}

namespace detail {

struct NodeArray {
  Index3 dims;  // cells
  bool two_d = false;
  std::vector<Vec3> p;

  int nk() const { return two_d ? 0 : dims[2]; }
  std::size_t idx(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0] + 1) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1] + 1) * k);
  }
  Vec3& at(int i, int j, int k) { return p[idx(i, j, k)]; }
  const Vec3& at(int i, int j, int k) const { return p[idx(i, j, k)]; }

  static NodeArray make(Index3 dims, bool two_d) {
    NodeArray a;
    a.dims = dims;
    a.two_d = two_d;
    a.p.assign(static_cast<std::size_t>(dims[0] + 1) * (dims[1] + 1) * (two_d ? 1 : dims[2] + 1), Vec3{});
    return a;
  }

  // Doubles the cell count along axis `ax` by inserting edge midpoints.
  NodeArray refined(int ax) const {
    Index3 nd = dims;
    nd[ax] *= 2;
    NodeArray r = make(nd, two_d);
    for (int k = 0; k <= r.nk(); ++k)
      for (int j = 0; j <= nd[1]; ++j)
        for (int i = 0; i <= nd[0]; ++i) {
          Index3 c{i, j, k};
          const int m = c[ax];
          c[ax] = m / 2;
          if (m % 2 == 0) {
            r.at(i, j, k) = at(c[0], c[1], c[2]);
          } else {
            Index3 e = c;
            e[ax] += 1;
            r.at(i, j, k) = 0.5 * (at(c[0], c[1], c[2]) + at(e[0], e[1], e[2]));
          }
        }
    return r;
  }
};

inline double lerp_node(double lo, double hi, int i, int n) { return (lo * (n - i) + hi * i) / n; }

// Axis to refine at each level: k, j, i cyclically in 3D; j, i in 2D.
inline int refine_axis(int level, bool two_d) {
  if (two_d) return level % 2 == 0 ? 1 : 0;
  return 2 - level % 3;
}

inline NodeArray refine_to(NodeArray a, int level) {
  for (int l = 0; l < level; ++l) a = a.refined(refine_axis(l, a.two_d));
  return a;
}

inline void add_block(MultiBlockGrid& g, int id, const NodeArray& a) {
  g.blocks.push_back(make_block(id, {a.dims[0], a.dims[1], a.two_d ? 1 : a.dims[2]}, a.two_d, a.p));
}

inline NodeArray inlet_nodes() {
  NodeArray a = NodeArray::make({52, 16, 1}, true);
  const double t = std::tan(30.0 * std::acos(-1.0) / 180.0);
  for (int j = 0; j <= 16; ++j)
    for (int i = 0; i <= 52; ++i) {
      const double x = lerp_node(0.0, 1.0, i, 52);
      const double yw = (std::min(x, 0.75) - std::min(x, 0.25)) * t;
      a.at(i, j, 0) = {x, yw + (1.0 - yw) * j / 16.0, 0.0};
    }
  return a;
}

inline NodeArray annulus_nodes() {
  const int ni = 64, nj = 16;
  NodeArray a = NodeArray::make({ni, nj, 1}, true);
  const double pi = std::acos(-1.0);
  for (int j = 0; j <= nj; ++j) {
    const double r = 0.5 * std::pow(20.0, static_cast<double>(j) / nj);
    for (int i = 0; i <= ni; ++i) {
      const int ii = i % ni;
      const double th = -2.0 * pi * ii / ni;
      a.at(i, j, 0) = {r * std::cos(th), r * std::sin(th), 0.0};
    }
  }
  return a;
}

inline NodeArray cartesian_nodes() {
  NodeArray a = NodeArray::make({16, 16, 1}, true);
  for (int j = 0; j <= 16; ++j)
    for (int i = 0; i <= 16; ++i) a.at(i, j, 0) = {lerp_node(0, 1, i, 16), lerp_node(0, 1, j, 16), 0.0};
  return a;
}

inline Vec3 box_perturb(Vec3 p) {
  const double pi = std::acos(-1.0);
  const double s = std::sin(pi * p.y) * std::sin(pi * p.z);
  return {p.x + 0.03 * s * std::sin(0.5 * pi * p.x), p.y + 0.02 * std::sin(pi * p.x / 2.0) * std::sin(pi * p.z),
          p.z + 0.02 * std::sin(pi * p.x / 2.0) * std::sin(pi * p.y)};
}

// Four parents along x with 16, 8, 4, 4 cells in i; the last is rotated 180
// degrees about the x axis.
inline std::vector<NodeArray> box_nodes() {
  const int ni[4] = {16, 8, 4, 4};
  const double x0[5] = {0.0, 2.0, 3.0, 3.5, 4.0};
  std::vector<NodeArray> out;
  for (int b = 0; b < 4; ++b) {
    NodeArray a = NodeArray::make({ni[b], 8, 8}, false);
    for (int k = 0; k <= 8; ++k)
      for (int j = 0; j <= 8; ++j)
        for (int i = 0; i <= ni[b]; ++i) {
          const int jj = b == 3 ? 8 - j : j;
          const int kk = b == 3 ? 8 - k : k;
          const Vec3 p{lerp_node(x0[b], x0[b + 1], i, ni[b]), lerp_node(0, 1, jj, 8), lerp_node(0, 1, kk, 8)};
          a.at(i, j, k) = box_perturb(p);
        }
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace detail

inline CaseSetup make_case(std::string_view name, int level = 0, bool viscous = false) {
  if (level < 0) throw Error("refinement level must be non-negative");
  CaseSetup c;
  c.name = std::string(name);
  c.level = level;
  c.viscous = viscous;
  MultiBlockGrid& g = c.grid;
  auto fs = [&](const FreestreamSpec& s) { c.free = freestream(s.mach, s.p, s.T, s.alpha_deg, c.gas, s.lift_axis); };
  const BcType wall = viscous ? BcType::no_slip_wall : BcType::slip_wall;

  if (name == "inlet_ramp_2d") {
    detail::add_block(g, 0, detail::refine_to(detail::inlet_nodes(), level));
    add_physical_face(g, 0, Face::i_min, BcType::supersonic_inflow);
    add_physical_face(g, 0, Face::i_max, BcType::supersonic_outflow);
    add_physical_face(g, 0, Face::j_min, wall);
    add_physical_face(g, 0, Face::j_max, wall);
    fs(kInletInflow);
  } else if (name == "c_annulus_2d" || name == "deadlock_demo") {
    detail::add_block(g, 0, detail::refine_to(detail::annulus_nodes(), level));
    connect_faces(g, 0, Face::i_min, 0, Face::i_max);
    add_physical_face(g, 0, Face::j_min, wall);
    add_physical_face(g, 0, Face::j_max, BcType::farfield);
    fs(kAirfoilFarfield);
  } else if (name == "multiblock_box_3d") {
    const auto parts = detail::box_nodes();
    for (int b = 0; b < 4; ++b) detail::add_block(g, b, detail::refine_to(parts[b], level));
    connect_faces(g, 0, Face::i_max, 1, Face::i_min);
    connect_faces(g, 1, Face::i_max, 2, Face::i_min);
    Orientation rot;
    rot.flip = {false, true, true};
    connect_faces(g, 2, Face::i_max, 3, Face::i_min, rot);
    for (int b = 0; b < 4; ++b)
      for (int f = 0; f < 6; ++f) {
        const Face face = static_cast<Face>(f);
        if ((face == Face::i_max && b < 3) || (face == Face::i_min && b > 0)) continue;
        add_physical_face(g, b, face, BcType::farfield);
      }
    fs(kWingFarfield);
    c.pulse_amplitude = 0.1;
    c.pulse_center = {2.6, 0.5, 0.5};
    c.pulse_radius = 0.5;
  } else if (name == "cartesian_box") {
    detail::add_block(g, 0, detail::refine_to(detail::cartesian_nodes(), level));
    for (int f = 0; f < 4; ++f) add_physical_face(g, 0, static_cast<Face>(f), BcType::mms_dirichlet);
    c.mms = manufactured_solution(viscous ? "ns_subsonic" : "euler_supersonic");
    c.gas = c.mms->gas;
    c.free = c.mms->exact({0.5, 0.5, 0.0});
  } else {
    throw Error("unknown case preset '" + std::string(name) + "'");
  }
  g.parent_count = static_cast<int>(g.blocks.size());
  validate_boundaries(g);
  return c;
}

}  // namespace blockflow

#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "blockflow/core.hpp"

namespace blockflow {

enum class BcType { supersonic_inflow, supersonic_outflow, slip_wall, no_slip_wall, farfield, mms_dirichlet };

inline std::string_view to_string(BcType t) {
  switch (t) {
    case BcType::supersonic_inflow: return "supersonic_inflow";
    case BcType::supersonic_outflow: return "supersonic_outflow";
    case BcType::slip_wall: return "slip_wall";
    case BcType::no_slip_wall: return "no_slip_wall";
    case BcType::farfield: return "farfield";
    case BcType::mms_dirichlet: return "mms_dirichlet";
  }
  return "?";
}

inline BcType bc_from_string(std::string_view s) {
  for (BcType t : {BcType::supersonic_inflow, BcType::supersonic_outflow, BcType::slip_wall,
                   BcType::no_slip_wall, BcType::farfield, BcType::mms_dirichlet})
    if (to_string(t) == s) return t;
  throw Error("unknown boundary type '" + std::string(s) + "'");
}

// Owner axis a corresponds to neighbor axis `axis[a]`, reversed when flip[a].
struct Orientation {
  std::array<int, 3> axis{0, 1, 2};
  std::array<bool, 3> flip{false, false, false};

  bool is_bijection() const {
    std::array<bool, 3> seen{};
    for (int a : axis) {
      if (a < 0 || a > 2 || seen[a]) return false;
      seen[a] = true;
    }
    return true;
  }
  Orientation inverse() const {
    Orientation inv;
    for (int a = 0; a < 3; ++a) {
      inv.axis[axis[a]] = a;
      inv.flip[axis[a]] = flip[a];
    }
    return inv;
  }
  friend bool operator==(const Orientation&, const Orientation&) = default;
};

// One boundary patch of a block face. `cells` are the owner's interior cells
// touching the face (a single layer along the face normal).
struct BoundarySpec {
  int owner = 0;
  Face face = Face::i_min;
  Box cells;
  bool connected = false;
  BcType type = BcType::farfield;
  int neighbor = -1;
  Face nbr_face = Face::i_min;
  Box nbr_cells;
  Orientation orient;

  int axis() const { return axis_of(face); }
  friend bool operator==(const BoundarySpec&, const BoundarySpec&) = default;
};

struct Block {
  int id = 0;
  Index3 dims{1, 1, 1};
  bool two_d = false;
  int ghost_depth = kGhostDepth;
  std::vector<Vec3> nodes;  // node lattice including ghost nodes

  int ghost(int a) const { return (two_d && a == 2) ? 0 : ghost_depth; }
  int space_dims() const { return two_d ? 2 : 3; }

  Lattice node_lattice() const {
    Lattice l;
    for (int a = 0; a < 3; ++a) {
      const int g = ghost(a);
      l.lo[a] = -g;
      l.n[a] = (two_d && a == 2) ? 1 : dims[a] + 1 + 2 * g;
    }
    return l;
  }
  // Interior cells are 1..N; ghosts 1-g..0 and N+1..N+g.
  Lattice cell_lattice() const {
    Lattice l;
    for (int a = 0; a < 3; ++a) {
      l.lo[a] = 1 - ghost(a);
      l.n[a] = dims[a] + 2 * ghost(a);
    }
    return l;
  }
  Box interior() const { return Box{{1, 1, 1}, {dims[0], dims[1], dims[2]}}; }
  Box face_cells(Face f) const {
    Box b = interior();
    const int a = axis_of(f);
    b.lo[a] = b.hi[a] = is_max_face(f) ? dims[a] : 1;
    return b;
  }
  std::size_t cell_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t interior_node_count() const {
    return static_cast<std::size_t>(dims[0] + 1) * (dims[1] + 1) * (two_d ? 1 : dims[2] + 1);
  }
  const Vec3& node(int i, int j, int k) const { return nodes[node_lattice()(i, j, k)]; }
  Vec3& node(int i, int j, int k) { return nodes[node_lattice()(i, j, k)]; }
};

// Builds a block from interior node coordinates (i fastest) and fills ghost
// nodes by linear extrapolation, one axis at a time so corners are defined.
inline Block make_block(int id, Index3 dims, bool two_d, const std::vector<Vec3>& interior_nodes) {
  for (int a = 0; a < 3; ++a)
    if (dims[a] <= 0) throw GridError("degenerate block " + std::to_string(id));
  if (two_d && dims[2] != 1) throw GridError("2D block " + std::to_string(id) + " must have Nk=1");
  Block b;
  b.id = id;
  b.dims = dims;
  b.two_d = two_d;
  const Lattice nl = b.node_lattice();
  b.nodes.assign(nl.size(), Vec3{});
  const int nk = two_d ? 0 : dims[2];
  if (interior_nodes.size() != b.interior_node_count())
    throw GridError("block " + std::to_string(id) + ": expected " +
                    std::to_string(b.interior_node_count()) + " nodes, got " +
                    std::to_string(interior_nodes.size()));
  std::size_t n = 0;
  for (int k = 0; k <= nk; ++k)
    for (int j = 0; j <= dims[1]; ++j)
      for (int i = 0; i <= dims[0]; ++i) b.node(i, j, k) = interior_nodes[n++];

  std::array<int, 3> lo{0, 0, 0};
  std::array<int, 3> hi{dims[0], dims[1], nk};
  for (int a = 0; a < b.space_dims(); ++a) {
    const int g = b.ghost(a);
    const int N = dims[a];
    const int t1 = (a + 1) % 3;
    const int t2 = (a + 2) % 3;
    for (int u = lo[t2]; u <= hi[t2]; ++u)
      for (int v = lo[t1]; v <= hi[t1]; ++v) {
        auto at = [&](int m) -> Vec3& {
          Index3 c{};
          c[a] = m;
          c[t1] = v;
          c[t2] = u;
          return b.node(c[0], c[1], c[2]);
        };
        const Vec3 p0 = at(0), p1 = at(1), pn = at(N), pm = at(N - 1);
        for (int l = 1; l <= g; ++l) {
          at(-l) = p0 - static_cast<double>(l) * (p1 - p0);
          at(N + l) = pn + static_cast<double>(l) * (pn - pm);
        }
      }
    lo[a] = -g;
    hi[a] = N + g;
  }
  return b;
}

struct MultiBlockGrid {
  std::vector<Block> blocks;
  int parent_count = 0;
  std::vector<BoundarySpec> boundaries;

  std::size_t index_of(int id) const {
    for (std::size_t b = 0; b < blocks.size(); ++b)
      if (blocks[b].id == id) return b;
    throw GridError("no block with id " + std::to_string(id));
  }
  const Block& block(int id) const { return blocks[index_of(id)]; }
  std::size_t total_cells() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.cell_count();
    return n;
  }
};

// Image of an owner cell (interior or ghost) in the neighbor's index space.
inline Index3 map_to_neighbor(const BoundarySpec& s, const Block& owner, const Block& nbr, Index3 c) {
  const int d = axis_of(s.face);
  const int nd = axis_of(s.nbr_face);
  Index3 r{1, 1, 1};
  const int t = is_max_face(s.face) ? c[d] - owner.dims[d] : 1 - c[d];
  r[nd] = is_max_face(s.nbr_face) ? nbr.dims[nd] + 1 - t : t;
  for (int a = 0; a < 3; ++a) {
    if (a == d) continue;
    const int b = s.orient.axis[a];
    const int off = c[a] - s.cells.lo[a];
    r[b] = s.orient.flip[a] ? s.nbr_cells.hi[b] - off : s.nbr_cells.lo[b] + off;
  }
  return r;
}

// Transverse range of a face patch, widened over the ghost layers of axes
// handled in earlier exchange phases (axes < face axis) where the patch
// reaches the block edge. Filling faces axis by axis this way defines edge
// and corner ghosts without a separate averaging pass.
inline Box phase_range(const Block& b, Face face, const Box& cells) {
  Box r = cells;
  const int d = axis_of(face);
  for (int a = 0; a < d; ++a) {
    const int g = b.ghost(a);
    if (g == 0) continue;
    if (cells.lo[a] == 1) r.lo[a] = 1 - g;
    if (cells.hi[a] == b.dims[a]) r.hi[a] = b.dims[a] + g;
  }
  return r;
}

// Ghost cells of a face patch in phase order.
inline Box ghost_box(const Block& b, Face face, const Box& cells) {
  Box r = phase_range(b, face, cells);
  const int d = axis_of(face);
  const int g = b.ghost(d);
  if (is_max_face(face)) {
    r.lo[d] = b.dims[d] + 1;
    r.hi[d] = b.dims[d] + g;
  } else {
    r.lo[d] = 1 - g;
    r.hi[d] = 0;
  }
  return r;
}

// Data movement for one connected patch: the receiving block's ghost box and
// the donor box in the sending block's index space.
struct TransferRegion {
  Box dst;
  Box src;
};

inline TransferRegion transfer_region(const BoundarySpec& s, const Block& owner, const Block& nbr) {
  TransferRegion t;
  t.dst = ghost_box(owner, s.face, s.cells);
  const Index3 a = map_to_neighbor(s, owner, nbr, t.dst.lo);
  const Index3 b = map_to_neighbor(s, owner, nbr, t.dst.hi);
  for (int d = 0; d < 3; ++d) {
    t.src.lo[d] = std::min(a[d], b[d]);
    t.src.hi[d] = std::max(a[d], b[d]);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Metrics

struct BlockMetrics {
  Lattice cells;
  std::array<Lattice, 3> faces;
  std::array<std::vector<Vec3>, 3> normal;  // unit normal along +axis
  std::array<std::vector<double>, 3> area;
  std::vector<double> volume;
  std::vector<Vec3> centroid;
  // Green-Gauss weights on the face-centred diamond: [L, R, n0, n1, n2, n3].
  std::array<std::vector<std::array<Vec3, 6>>, 3> grad_weights;
  int space_dims = 3;

  // Face lattice index of the low face of cell c along axis a.
  std::size_t low_face(int a, int i, int j, int k) const {
    Index3 c{i, j, k};
    c[a] -= 1;
    return faces[a](c);
  }
  std::size_t high_face(int a, int i, int j, int k) const { return faces[a](i, j, k); }
};

namespace detail {

// Nodes of the face at node plane m along axis d, transverse cell (ca, cb),
// ordered counter-clockwise about +d.
inline std::array<Index3, 4> face_nodes(int d, Index3 c, bool two_d) {
  const int a = (d + 1) % 3;
  const int b = (d + 2) % 3;
  auto mk = [&](int da, int db) {
    Index3 n = c;
    n[a] = c[a] - 1 + da;
    n[b] = c[b] - 1 + db;
    if (two_d) n[2] = 0;
    return n;
  };
  return {mk(0, 0), mk(1, 0), mk(1, 1), mk(0, 1)};
}

// Integral of x . n dA over a bilinear patch, 2x2 Gauss (exact for the
// bi-quadratic integrand), coordinates relative to `origin`.
inline double bilinear_flux_of_position(const std::array<Vec3, 4>& p, Vec3 origin) {
  static constexpr double gp[2] = {0.5 - 0.5 / 1.7320508075688772, 0.5 + 0.5 / 1.7320508075688772};
  const Vec3 P00 = p[0] - origin, P10 = p[1] - origin, P11 = p[2] - origin, P01 = p[3] - origin;
  double sum = 0.0;
  for (double s : gp)
    for (double t : gp) {
      const Vec3 x = (1 - s) * (1 - t) * P00 + s * (1 - t) * P10 + s * t * P11 + (1 - s) * t * P01;
      const Vec3 xs = (1 - t) * (P10 - P00) + t * (P11 - P01);
      const Vec3 xt = (1 - s) * (P01 - P00) + s * (P11 - P10);
      sum += 0.25 * dot(x, cross(xs, xt));
    }
  return sum;
}

}  // namespace detail

inline BlockMetrics compute_metrics(const Block& b) {
  BlockMetrics m;
  m.space_dims = b.space_dims();
  m.cells = b.cell_lattice();
  const Lattice nl = b.node_lattice();
  auto node = [&](Index3 n) { return b.nodes[nl(n)]; };

  for (int d = 0; d < 3; ++d) {
    Lattice fl = m.cells;
    if (d < b.space_dims()) {
      fl.lo[d] = -b.ghost(d);
      fl.n[d] = b.dims[d] + 2 * b.ghost(d) + 1;
    }
    m.faces[d] = fl;
    m.normal[d].assign(fl.size(), Vec3{});
    m.area[d].assign(fl.size(), 0.0);
    m.grad_weights[d].assign(fl.size(), {});
    if (d >= b.space_dims()) continue;
    for (int k = fl.lo[2]; k < fl.lo[2] + fl.n[2]; ++k)
      for (int j = fl.lo[1]; j < fl.lo[1] + fl.n[1]; ++j)
        for (int i = fl.lo[0]; i < fl.lo[0] + fl.n[0]; ++i) {
          Vec3 A;
          if (b.two_d) {
            Vec3 p, q;
            if (d == 0) {
              p = node({i, j - 1, 0});
              q = node({i, j, 0});
              const Vec3 e = q - p;
              A = {e.y, -e.x, 0.0};
            } else {
              p = node({i - 1, j, 0});
              q = node({i, j, 0});
              const Vec3 e = q - p;
              A = {-e.y, e.x, 0.0};
            }
          } else {
            const auto fn = detail::face_nodes(d, {i, j, k}, false);
            A = 0.5 * cross(node(fn[2]) - node(fn[0]), node(fn[3]) - node(fn[1]));
          }
          const std::size_t f = fl(i, j, k);
          const double len = norm(A);
          m.area[d][f] = len;
          m.normal[d][f] = len > 0.0 ? (1.0 / len) * A : Vec3{};
        }
  }

  m.volume.assign(m.cells.size(), 0.0);
  m.centroid.assign(m.cells.size(), Vec3{});
  const Lattice& cl = m.cells;
  for (int k = cl.lo[2]; k < cl.lo[2] + cl.n[2]; ++k)
    for (int j = cl.lo[1]; j < cl.lo[1] + cl.n[1]; ++j)
      for (int i = cl.lo[0]; i < cl.lo[0] + cl.n[0]; ++i) {
        const std::size_t c = cl(i, j, k);
        double vol = 0.0;
        Vec3 cen;
        if (b.two_d) {
          const Vec3 p00 = node({i - 1, j - 1, 0}), p10 = node({i, j - 1, 0});
          const Vec3 p11 = node({i, j, 0}), p01 = node({i - 1, j, 0});
          const Vec3 d1 = p11 - p00, d2 = p01 - p10;
          vol = 0.5 * (d1.x * d2.y - d1.y * d2.x);
          cen = 0.25 * (p00 + p10 + p11 + p01);
        } else {
          const Vec3 origin = node({i - 1, j - 1, k - 1});
          for (int d = 0; d < 3; ++d) {
            Index3 hi{i, j, k};
            Index3 lo{i, j, k};
            lo[d] -= 1;
            std::array<Vec3, 4> ph, pl;
            const auto nh = detail::face_nodes(d, hi, false);
            const auto nlow = detail::face_nodes(d, lo, false);
            for (int q = 0; q < 4; ++q) {
              ph[q] = node(nh[q]);
              pl[q] = node(nlow[q]);
            }
            vol += detail::bilinear_flux_of_position(ph, origin) -
                   detail::bilinear_flux_of_position(pl, origin);
          }
          vol /= 3.0;
          for (int dk = 0; dk < 2; ++dk)
            for (int dj = 0; dj < 2; ++dj)
              for (int di = 0; di < 2; ++di) cen += node({i - 1 + di, j - 1 + dj, k - 1 + dk});
          cen = 0.125 * cen;
        }
        m.volume[c] = vol;
        m.centroid[c] = cen;
        const bool interior = i >= 1 && i <= b.dims[0] && j >= 1 && j <= b.dims[1] && k >= 1 &&
                              k <= b.dims[2];
        if (interior && !(vol > 0.0)) {
          std::ostringstream os;
          os << "inverted cell (" << i << "," << j << "," << k << ") in block " << b.id
             << ": volume " << vol;
          throw GridError(os.str());
        }
      }

  // Diamond stencils for the faces used by flux assembly.
  for (int d = 0; d < b.space_dims(); ++d) {
    Box faces = b.interior();
    faces.lo[d] = 0;
    for_each_cell(faces, [&](int i, int j, int k) {
      Index3 L{i, j, k};
      Index3 R{i, j, k};
      R[d] += 1;
      const Vec3 cL = m.centroid[cl(L)];
      const Vec3 cR = m.centroid[cl(R)];
      std::array<Vec3, 6> w{};
      if (b.two_d) {
        Index3 na{i, j, 0}, nb{i, j, 0};
        if (d == 0) {
          na[1] = j - 1;
        } else {
          na[0] = i - 1;
        }
        const std::array<Vec3, 4> poly{cL, node(na), cR, node(nb)};
        double area2 = 0.0;
        for (int q = 0; q < 4; ++q) {
          const Vec3 p = poly[q], r = poly[(q + 1) % 4];
          area2 += p.x * r.y - r.x * p.y;
        }
        const double A = 0.5 * area2;
        const std::array<int, 4> slot{0, 2, 1, 3};
        for (int q = 0; q < 4; ++q) {
          const Vec3 P = poly[(q + 3) % 4], Q = poly[(q + 1) % 4];
          const Vec3 e = Q - P;
          w[slot[q]] = (0.5 / A) * Vec3{e.y, -e.x, 0.0};
        }
      } else {
        const auto fn = detail::face_nodes(d, {i, j, k}, false);
        std::array<Vec3, 6> pts{cL, cR, node(fn[0]), node(fn[1]), node(fn[2]), node(fn[3])};
        const Vec3 origin = 0.5 * (cL + cR);
        for (auto& p : pts) p = p - origin;
        std::array<std::array<int, 3>, 8> tris{};
        for (int q = 0; q < 4; ++q) {
          tris[q] = {2 + q, 2 + (q + 1) % 4, 1};
          tris[4 + q] = {2 + (q + 1) % 4, 2 + q, 0};
        }
        double vol = 0.0;
        std::array<Vec3, 8> areas;
        for (int t = 0; t < 8; ++t) {
          const Vec3 x1 = pts[tris[t][0]], x2 = pts[tris[t][1]], x3 = pts[tris[t][2]];
          areas[t] = 0.5 * cross(x2 - x1, x3 - x1);
          vol += dot((1.0 / 3.0) * (x1 + x2 + x3), areas[t]) / 3.0;
        }
        for (int t = 0; t < 8; ++t)
          for (int v : tris[t]) w[v] += (1.0 / (3.0 * vol)) * areas[t];
      }
      m.grad_weights[d][m.faces[d](i, j, k)] = w;
    });
  }
  return m;
}

// Node indices used by the diamond stencil of face (d, i, j, k), matching the
// weight slots 2..5 (2D stencils use slots 2 and 3 only).
inline std::array<Index3, 4> diamond_nodes(int d, Index3 c, bool two_d) {
  if (two_d) {
    Index3 na{c[0], c[1], 0}, nb{c[0], c[1], 0};
    if (d == 0)
      na[1] -= 1;
    else
      na[0] -= 1;
    return {na, nb, nb, nb};
  }
  return detail::face_nodes(d, c, false);
}

// ---------------------------------------------------------------------------
// Boundary validation

inline void validate_boundaries(const MultiBlockGrid& g) {
  std::map<int, int> seen;
  for (const auto& b : g.blocks)
    if (seen[b.id]++) throw GridError("duplicate block id " + std::to_string(b.id));
  for (const auto& blk : g.blocks) {
    for (int f = 0; f < 2 * blk.space_dims(); ++f) {
      const Face face = static_cast<Face>(f);
      const Box fc = blk.face_cells(face);
      std::vector<int> cover(fc.count(), 0);
      const Lattice fl(fc.lo, {fc.extent(0), fc.extent(1), fc.extent(2)});
      for (const auto& s : g.boundaries) {
        if (s.owner != blk.id || s.face != face) continue;
        if (s.cells.empty() || intersect(s.cells, fc) != s.cells)
          throw GridError("boundary on block " + std::to_string(blk.id) + " face " +
                          std::string(to_string(face)) + " outside face range");
        for_each_cell(s.cells, [&](int i, int j, int k) { ++cover[fl(i, j, k)]; });
      }
      for (int c : cover)
        if (c != 1)
          throw GridError("face " + std::string(to_string(face)) + " of block " +
                          std::to_string(blk.id) + " not covered exactly once by boundaries");
    }
  }
  for (const auto& s : g.boundaries) {
    if (!s.connected) continue;
    const Block& owner = g.block(s.owner);
    const Block& nbr = g.block(s.neighbor);
    if (!s.orient.is_bijection()) throw GridError("orientation map is not a bijection");
    if (s.orient.axis[s.axis()] != axis_of(s.nbr_face))
      throw GridError("orientation must map face normal onto neighbor face normal");
    if (intersect(s.nbr_cells, nbr.face_cells(s.nbr_face)) != s.nbr_cells)
      throw GridError("neighbor range outside neighbor face on block " + std::to_string(nbr.id));
    for (int a = 0; a < 3; ++a)
      if (a != s.axis() && s.cells.extent(a) != s.nbr_cells.extent(s.orient.axis[a]))
        throw GridError("connected ranges differ in size between blocks " +
                        std::to_string(owner.id) + " and " + std::to_string(nbr.id));
    bool paired = false;
    for (const auto& p : g.boundaries)
      if (p.connected && p.owner == s.neighbor && p.face == s.nbr_face && p.cells == s.nbr_cells &&
          p.neighbor == s.owner && p.nbr_face == s.face && p.nbr_cells == s.cells &&
          p.orient == s.orient.inverse())
        paired = true;
    if (!paired)
      throw GridError("connected boundary on block " + std::to_string(owner.id) + " face " +
                      std::string(to_string(s.face)) + " has no matching partner");
  }
}

inline void add_physical_face(MultiBlockGrid& g, int block, Face f, BcType t) {
  BoundarySpec s;
  s.owner = block;
  s.face = f;
  s.cells = g.block(block).face_cells(f);
  s.type = t;
  g.boundaries.push_back(s);
}

// Adds a connected pair covering the full faces fa of block a and fb of block b.
inline void connect_faces(MultiBlockGrid& g, int a, Face fa, int b, Face fb, Orientation o = {}) {
  BoundarySpec s;
  s.owner = a;
  s.face = fa;
  s.cells = g.block(a).face_cells(fa);
  s.connected = true;
  s.neighbor = b;
  s.nbr_face = fb;
  s.nbr_cells = g.block(b).face_cells(fb);
  s.orient = o;
  BoundarySpec p;
  p.owner = b;
  p.face = fb;
  p.cells = s.nbr_cells;
  p.connected = true;
  p.neighbor = a;
  p.nbr_face = fa;
  p.nbr_cells = s.cells;
  p.orient = o.inverse();
  g.boundaries.push_back(s);
  g.boundaries.push_back(p);
}

// ---------------------------------------------------------------------------
// Grid file I/O
//
//   nblocks
//   id Ni Nj Nk            (Nk = 0 marks a 2D block; its node lines omit z)
//   x y z                  ((Ni+1)(Nj+1)(Nk+1) lines, i fastest)
//   ...
//   boundaries <n>         (optional)
//   bc   owner face lo0 lo1 lo2 hi0 hi1 hi2 type
//   conn owner face lo.. hi.. nbr nbr_face nlo.. nhi.. ax0 ax1 ax2 f0 f1 f2

inline void write_grid(const MultiBlockGrid& g, std::ostream& os) {
  os << g.blocks.size() << '\n';
  os << std::setprecision(17);
  for (const auto& b : g.blocks) {
    os << b.id << ' ' << b.dims[0] << ' ' << b.dims[1] << ' ' << (b.two_d ? 0 : b.dims[2]) << '\n';
    const int nk = b.two_d ? 0 : b.dims[2];
    for (int k = 0; k <= nk; ++k)
      for (int j = 0; j <= b.dims[1]; ++j)
        for (int i = 0; i <= b.dims[0]; ++i) {
          const Vec3 p = b.node(i, j, k);
          os << p.x << ' ' << p.y;
          if (!b.two_d) os << ' ' << p.z;
          os << '\n';
        }
  }
  if (g.boundaries.empty()) return;
  os << "boundaries " << g.boundaries.size() << '\n';
  auto box = [&](const Box& x) {
    os << x.lo[0] << ' ' << x.lo[1] << ' ' << x.lo[2] << ' ' << x.hi[0] << ' ' << x.hi[1] << ' '
       << x.hi[2];
  };
  for (const auto& s : g.boundaries) {
    os << (s.connected ? "conn " : "bc ") << s.owner << ' ' << to_string(s.face) << ' ';
    box(s.cells);
    if (!s.connected) {
      os << ' ' << to_string(s.type) << '\n';
      continue;
    }
    os << ' ' << s.neighbor << ' ' << to_string(s.nbr_face) << ' ';
    box(s.nbr_cells);
    for (int a : s.orient.axis) os << ' ' << a;
    for (bool f : s.orient.flip) os << ' ' << (f ? 1 : 0);
    os << '\n';
  }
}

inline MultiBlockGrid load_grid(std::istream& is) {
  int line_no = 0;
  std::string line;
  int current_block = -1;
  auto fail = [&](const std::string& what) -> GridError {
    std::ostringstream os;
    os << "grid parse error";
    if (current_block >= 0) os << " in block " << current_block;
    os << " at line " << line_no << ": " << what;
    return GridError(os.str());
  };
  auto next = [&]() -> std::optional<std::istringstream> {
    while (std::getline(is, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      return std::istringstream(line);
    }
    return std::nullopt;
  };

  MultiBlockGrid g;
  auto header = next();
  long nblocks = 0;
  if (!header || !(*header >> nblocks) || nblocks <= 0) throw fail("malformed header");
  for (long b = 0; b < nblocks; ++b) {
    auto bl = next();
    long id = 0, ni = 0, nj = 0, nk = 0;
    if (!bl || !(*bl >> id >> ni >> nj >> nk)) throw fail("malformed block header");
    current_block = static_cast<int>(id);
    if (ni <= 0 || nj <= 0 || nk < 0) throw fail("degenerate block");
    const bool two_d = nk == 0;
    const std::size_t count = static_cast<std::size_t>(ni + 1) * (nj + 1) * (nk + 1);
    std::vector<Vec3> pts;
    pts.reserve(count);
    for (std::size_t n = 0; n < count; ++n) {
      auto pl = next();
      Vec3 p;
      if (!pl || !(*pl >> p.x >> p.y) || (!two_d && !(*pl >> p.z)))
        throw fail("coordinate count mismatch at node offset " + std::to_string(n) + " of " +
                   std::to_string(count));
      pts.push_back(p);
    }
    g.blocks.push_back(make_block(static_cast<int>(id),
                                  {static_cast<int>(ni), static_cast<int>(nj), two_d ? 1 : static_cast<int>(nk)},
                                  two_d, pts));
  }
  current_block = -1;
  g.parent_count = static_cast<int>(g.blocks.size());

  auto bsec = next();
  if (bsec) {
    std::string kw;
    long n = 0;
    if (!(*bsec >> kw >> n) || kw != "boundaries") throw fail("expected 'boundaries <n>'");
    auto read_box = [&](std::istringstream& in, Box& x) {
      return static_cast<bool>(in >> x.lo[0] >> x.lo[1] >> x.lo[2] >> x.hi[0] >> x.hi[1] >> x.hi[2]);
    };
    for (long q = 0; q < n; ++q) {
      auto l = next();
      if (!l) throw fail("missing boundary line");
      BoundarySpec s;
      std::string face, type;
      if (!(*l >> kw >> s.owner >> face) || !read_box(*l, s.cells)) throw fail("malformed boundary");
      try {
        s.face = face_from_string(face);
        if (kw == "bc") {
          if (!(*l >> type)) throw fail("missing boundary type");
          s.type = bc_from_string(type);
        } else if (kw == "conn") {
          s.connected = true;
          std::string nf;
          if (!(*l >> s.neighbor >> nf) || !read_box(*l, s.nbr_cells)) throw fail("malformed conn");
          s.nbr_face = face_from_string(nf);
          for (int& a : s.orient.axis)
            if (!(*l >> a)) throw fail("malformed orientation");
          for (int a = 0; a < 3; ++a) {
            int f = 0;
            if (!(*l >> f)) throw fail("malformed orientation");
            s.orient.flip[a] = f != 0;
          }
        } else {
          throw fail("unknown boundary keyword '" + kw + "'");
        }
      } catch (const GridError&) {
        throw;
      } catch (const Error& e) {
        throw fail(e.what());
      }
      g.boundaries.push_back(s);
    }
  } else {
    for (const auto& b : g.blocks)
      for (int f = 0; f < 2 * b.space_dims(); ++f) add_physical_face(g, b.id, static_cast<Face>(f), BcType::farfield);
  }
  validate_boundaries(g);
  return g;
}

inline MultiBlockGrid load_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GridError("cannot open grid file '" + path + "'");
  return load_grid(in);
}

inline void write_grid(const MultiBlockGrid& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw GridError("cannot write grid file '" + path + "'");
  write_grid(g, out);
}

}  // namespace blockflow

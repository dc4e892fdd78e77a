#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "blockflow/core.hpp"
#include "blockflow/mesh.hpp"

namespace blockflow {

struct ChildInfo {
  int id = 0;
  int parent = 0;  // parent block id
  Index3 offset{0, 0, 0};
  Index3 dims{1, 1, 1};
  int rank = 0;
};

struct DecompositionPlan {
  MultiBlockGrid parents;
  MultiBlockGrid children;  // child blocks and their boundary specs
  std::vector<ChildInfo> info;
  int np = 1;
  bool aggregated = false;

  int rank_of(int child_id) const { return info[static_cast<std::size_t>(child_id)].rank; }
  std::vector<std::size_t> rank_loads() const {
    std::vector<std::size_t> load(static_cast<std::size_t>(np), 0);
    for (const auto& c : info)
      load[static_cast<std::size_t>(c.rank)] += static_cast<std::size_t>(c.dims[0]) * c.dims[1] * c.dims[2];
    return load;
  }
  double load_ratio() const {
    const auto l = rank_loads();
    const auto [mn, mx] = std::minmax_element(l.begin(), l.end());
    return *mn == 0 ? std::numeric_limits<double>::infinity() : static_cast<double>(*mx) / static_cast<double>(*mn);
  }
};

namespace detail {

// Sizes of p nearly equal parts of n; the first n % p parts are one larger.
inline std::vector<int> split_sizes(int n, int p) {
  std::vector<int> s(static_cast<std::size_t>(p), n / p);
  for (int q = 0; q < n % p; ++q) ++s[static_cast<std::size_t>(q)];
  return s;
}

// Axes that may be split, slowest first.
inline std::vector<int> splittable_axes(bool two_d, int split_dims) {
  std::vector<int> order = two_d ? std::vector<int>{1, 0} : std::vector<int>{2, 1, 0};
  if (split_dims < 1) split_dims = 1;
  if (static_cast<std::size_t>(split_dims) < order.size()) order.resize(static_cast<std::size_t>(split_dims));
  return order;
}

// Rank lattice (pi, pj, pk) for r pieces of a block minimising the cut
// surface; ties prefer more pieces along k, then j.
inline Index3 factorize(const Block& b, int r, int split_dims) {
  const auto axes = splittable_axes(b.two_d, split_dims);
  const int ghost = b.ghost_depth;
  bool found = false;
  Index3 best{1, 1, 1};
  std::tuple<double, int, int> best_key{};
  for (int pi = 1; pi <= r; ++pi) {
    if (r % pi) continue;
    for (int pj = 1; pj <= r / pi; ++pj) {
      if ((r / pi) % pj) continue;
      const int pk = r / pi / pj;
      const Index3 p{pi, pj, pk};
      bool ok = true;
      for (int a = 0; a < 3; ++a) {
        if (p[a] == 1) continue;
        if (std::find(axes.begin(), axes.end(), a) == axes.end()) ok = false;
        else if (b.dims[a] / p[a] < ghost) ok = false;
      }
      if (!ok) continue;
      double cut = 0.0;
      for (int a = 0; a < 3; ++a) {
        double face = 1.0;
        for (int t = 0; t < 3; ++t)
          if (t != a) face *= b.dims[t];
        cut += (p[a] - 1) * face;
      }
      const std::tuple<double, int, int> key{cut, -pk, -pj};
      if (!found || key < best_key) {
        found = true;
        best = p;
        best_key = key;
      }
    }
  }
  if (!found)
    throw DecompError("slice too thin: block " + std::to_string(b.id) + " cannot be split " + std::to_string(r) +
                      " ways with at least " + std::to_string(ghost) + " cells per piece");
  return best;
}

// Child block whose nodes (including ghost nodes) are a window of the
// parent's extended node lattice.
inline Block window_block(const Block& parent, int id, Index3 offset, Index3 dims) {
  Block c;
  c.id = id;
  c.dims = dims;
  c.two_d = parent.two_d;
  c.ghost_depth = parent.ghost_depth;
  const Lattice nl = c.node_lattice();
  c.nodes.assign(nl.size(), Vec3{});
  for (int k = nl.lo[2]; k < nl.lo[2] + nl.n[2]; ++k)
    for (int j = nl.lo[1]; j < nl.lo[1] + nl.n[1]; ++j)
      for (int i = nl.lo[0]; i < nl.lo[0] + nl.n[0]; ++i)
        c.nodes[nl(i, j, k)] = parent.node(i + offset[0], j + offset[1], parent.two_d ? 0 : k + offset[2]);
  return c;
}

inline Box shift(Box b, Index3 off, int sign) {
  for (int a = 0; a < 3; ++a) {
    b.lo[a] += sign * off[a];
    b.hi[a] += sign * off[a];
  }
  return b;
}

// Face-layer cells of `cells` (owner parent coords) mapped to the neighbor
// parent's face layer.
inline Box map_face_box(const BoundarySpec& s, const Block& owner, const Block& nbr, const Box& cells) {
  const int d = s.axis();
  Index3 lo = cells.lo, hi = cells.hi;
  const int ghost = is_max_face(s.face) ? owner.dims[d] + 1 : 0;
  lo[d] = hi[d] = ghost;
  const Index3 a = map_to_neighbor(s, owner, nbr, lo);
  const Index3 b = map_to_neighbor(s, owner, nbr, hi);
  Box r;
  for (int q = 0; q < 3; ++q) {
    r.lo[q] = std::min(a[q], b[q]);
    r.hi[q] = std::max(a[q], b[q]);
  }
  return r;
}

inline Box child_box(const ChildInfo& c) {
  Box b;
  for (int a = 0; a < 3; ++a) {
    b.lo[a] = c.offset[a] + 1;
    b.hi[a] = c.offset[a] + c.dims[a];
  }
  return b;
}

// Face-layer cells of child c on face f, in parent coordinates.
inline Box child_face_box(const ChildInfo& c, Face f) {
  Box b = child_box(c);
  const int a = axis_of(f);
  if (is_max_face(f))
    b.lo[a] = b.hi[a];
  else
    b.hi[a] = b.lo[a];
  return b;
}

}  // namespace detail

// Adds child blocks for `parent` split by lattice p; returns the new infos.
inline std::vector<ChildInfo> split_parent(DecompositionPlan& plan, const Block& parent, Index3 p, int first_rank) {
  std::array<std::vector<int>, 3> sizes;
  for (int a = 0; a < 3; ++a) sizes[a] = detail::split_sizes(parent.dims[a], p[a]);
  std::vector<ChildInfo> made;
  int rank = first_rank;
  Index3 off{0, 0, 0};
  for (int ck = 0; ck < p[2]; ++ck) {
    off[1] = 0;
    for (int cj = 0; cj < p[1]; ++cj) {
      off[0] = 0;
      for (int ci = 0; ci < p[0]; ++ci) {
        ChildInfo c;
        c.id = static_cast<int>(plan.info.size());
        c.parent = parent.id;
        c.offset = off;
        c.dims = {sizes[0][ci], sizes[1][cj], sizes[2][ck]};
        c.rank = rank++;
        plan.info.push_back(c);
        plan.children.blocks.push_back(detail::window_block(parent, c.id, c.offset, c.dims));
        made.push_back(c);
        off[0] += sizes[0][ci];
      }
      off[1] += sizes[1][cj];
    }
    off[2] += sizes[2][ck];
  }
  return made;
}

// Splits every parent boundary over the children and adds sibling links.
inline void decompose_boundaries(DecompositionPlan& plan) {
  const MultiBlockGrid& P = plan.parents;
  auto& out = plan.children.boundaries;
  out.clear();
  std::vector<std::vector<const ChildInfo*>> by_parent(P.blocks.size());
  for (const auto& c : plan.info) by_parent[P.index_of(c.parent)].push_back(&c);

  for (const auto& c : plan.info) {
    const Block& parent = P.block(c.parent);
    for (int f = 0; f < 2 * parent.space_dims(); ++f) {
      const Face face = static_cast<Face>(f);
      const int a = axis_of(face);
      const Box fbox = detail::child_face_box(c, face);
      const bool on_parent_face = is_max_face(face) ? fbox.hi[a] == parent.dims[a] : fbox.lo[a] == 1;
      if (!on_parent_face) {
        // Sibling across an internal cut.
        for (const ChildInfo* o : by_parent[P.index_of(c.parent)]) {
          const Face of = make_face(a, !is_max_face(face));
          Box ob = detail::child_face_box(*o, of);
          const int layer = is_max_face(face) ? fbox.hi[a] + 1 : fbox.lo[a] - 1;
          if (ob.lo[a] != layer) continue;
          Box probe = fbox;
          probe.lo[a] = probe.hi[a] = layer;
          const Box overlap = intersect(probe, ob);
          if (overlap.empty()) continue;
          BoundarySpec s;
          s.owner = c.id;
          s.face = face;
          Box mine = overlap;
          mine.lo[a] = mine.hi[a] = fbox.lo[a];
          s.cells = detail::shift(mine, c.offset, -1);
          s.connected = true;
          s.neighbor = o->id;
          s.nbr_face = of;
          s.nbr_cells = detail::shift(overlap, o->offset, -1);
          out.push_back(s);
        }
        continue;
      }
      for (const auto& ps : P.boundaries) {
        if (ps.owner != c.parent || ps.face != face) continue;
        const Box part = intersect(ps.cells, fbox);
        if (part.empty()) continue;
        if (!ps.connected) {
          BoundarySpec s = ps;
          s.owner = c.id;
          s.cells = detail::shift(part, c.offset, -1);
          out.push_back(s);
          continue;
        }
        const Block& nparent = P.block(ps.neighbor);
        const Box image = detail::map_face_box(ps, parent, nparent, part);
        // Inverse spec to map neighbor pieces back to this parent.
        BoundarySpec inv;
        inv.owner = ps.neighbor;
        inv.face = ps.nbr_face;
        inv.cells = ps.nbr_cells;
        inv.connected = true;
        inv.neighbor = ps.owner;
        inv.nbr_face = ps.face;
        inv.nbr_cells = ps.cells;
        inv.orient = ps.orient.inverse();
        for (const ChildInfo* o : by_parent[P.index_of(ps.neighbor)]) {
          const Box npiece = intersect(image, detail::child_face_box(*o, ps.nbr_face));
          if (npiece.empty()) continue;
          const Box opiece = detail::map_face_box(inv, nparent, parent, npiece);
          BoundarySpec s;
          s.owner = c.id;
          s.face = face;
          s.cells = detail::shift(opiece, c.offset, -1);
          s.connected = true;
          s.neighbor = o->id;
          s.nbr_face = ps.nbr_face;
          s.nbr_cells = detail::shift(npiece, o->offset, -1);
          s.orient = ps.orient;
          out.push_back(s);
        }
      }
    }
  }
  plan.children.parent_count = static_cast<int>(P.blocks.size());
  try {
    validate_boundaries(plan.children);
  } catch (const GridError& e) {
    throw DecompError(std::string("inconsistent boundary decomposition: ") + e.what());
  }
}

// Ranks per parent: each parent gets one, the rest go one at a time to the
// parent with the largest cells-per-rank (ties to the lower index).
inline std::vector<int> allot_ranks(const MultiBlockGrid& g, int np) {
  const std::size_t npb = g.blocks.size();
  std::vector<int> r(npb, 1);
  for (int extra = np - static_cast<int>(npb); extra > 0; --extra) {
    std::size_t best = 0;
    for (std::size_t p = 1; p < npb; ++p) {
      const double a = static_cast<double>(g.blocks[p].cell_count()) / r[p];
      const double b = static_cast<double>(g.blocks[best].cell_count()) / r[best];
      if (a > b) best = p;
    }
    ++r[best];
  }
  return r;
}

inline DecompositionPlan aggregate(const MultiBlockGrid& grid, int np, int split_dims = 3);

// Processor-clustered decomposition: every parent split over its own ranks.
inline DecompositionPlan decompose(const MultiBlockGrid& grid, int np, int split_dims = 3, bool aggregation = false) {
  if (np < 1) throw DecompError("np must be at least 1");
  if (aggregation) return aggregate(grid, np, split_dims);
  const int npb = static_cast<int>(grid.blocks.size());
  if (np < npb)
    throw DecompError("np (" + std::to_string(np) + ") is smaller than the number of parent blocks (" +
                      std::to_string(npb) + "); enable aggregation");
  DecompositionPlan plan;
  plan.parents = grid;
  plan.np = np;
  const auto share = allot_ranks(grid, np);
  int rank = 0;
  for (std::size_t p = 0; p < grid.blocks.size(); ++p) {
    const Index3 lat = detail::factorize(grid.blocks[p], share[p], split_dims);
    split_parent(plan, grid.blocks[p], lat, rank);
    rank += share[p];
  }
  decompose_boundaries(plan);
  return plan;
}

// Decomposition with an explicit rank lattice per parent; ranks follow
// parent order.
inline DecompositionPlan decompose_lattice(const MultiBlockGrid& grid, const std::vector<Index3>& lattices) {
  if (lattices.size() != grid.blocks.size()) throw DecompError("one rank lattice per parent block is required");
  DecompositionPlan plan;
  plan.parents = grid;
  int rank = 0;
  for (std::size_t p = 0; p < grid.blocks.size(); ++p) {
    const Index3 lat = lattices[p];
    const Block& b = grid.blocks[p];
    for (int a = 0; a < 3; ++a) {
      if (lat[a] < 1 || (a >= b.space_dims() && lat[a] != 1)) throw DecompError("invalid rank lattice");
      if (b.dims[a] / lat[a] < b.ghost_depth && lat[a] > 1)
        throw DecompError("slice too thin: block " + std::to_string(b.id) + " along axis " + std::to_string(a));
    }
    split_parent(plan, b, lat, rank);
    rank += lat[0] * lat[1] * lat[2];
  }
  plan.np = rank;
  decompose_boundaries(plan);
  return plan;
}

namespace detail {

struct UnitChoice {
  std::vector<int> units;  // pieces per parent
  std::vector<int> ranks;  // rank per unit, in parent-then-lattice order
  std::vector<std::size_t> loads;
  double ratio = 0.0;
  std::size_t max_load = 0;
};

// Largest-first assignment onto the least-loaded rank.
inline void assign_lpt(const std::vector<std::size_t>& sizes, int np, std::vector<int>& ranks,
                       std::vector<std::size_t>& loads) {
  std::vector<std::size_t> order(sizes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sizes[a] > sizes[b]; });
  loads.assign(static_cast<std::size_t>(np), 0);
  ranks.assign(sizes.size(), 0);
  for (std::size_t u : order) {
    const auto it = std::min_element(loads.begin(), loads.end());
    ranks[u] = static_cast<int>(it - loads.begin());
    *it += sizes[u];
  }
}

}  // namespace detail

// Over-decomposes large parents into units and packs units onto ranks.
inline DecompositionPlan aggregate(const MultiBlockGrid& grid, int np, int split_dims) {
  if (np < 1) throw DecompError("np must be at least 1");
  const std::size_t total = grid.total_cells();
  const double L = static_cast<double>(total) / np;

  auto evaluate = [&](const std::vector<int>& units) -> std::optional<detail::UnitChoice> {
    detail::UnitChoice ch;
    ch.units = units;
    std::vector<std::size_t> sizes;
    for (std::size_t p = 0; p < grid.blocks.size(); ++p) {
      Index3 lat;
      try {
        lat = detail::factorize(grid.blocks[p], units[p], split_dims);
      } catch (const DecompError&) {
        return std::nullopt;
      }
      std::array<std::vector<int>, 3> sz;
      for (int a = 0; a < 3; ++a) sz[a] = detail::split_sizes(grid.blocks[p].dims[a], lat[a]);
      for (int k : sz[2])
        for (int j : sz[1])
          for (int i : sz[0]) sizes.push_back(static_cast<std::size_t>(i) * j * k);
    }
    detail::assign_lpt(sizes, np, ch.ranks, ch.loads);
    const auto [mn, mx] = std::minmax_element(ch.loads.begin(), ch.loads.end());
    ch.max_load = *mx;
    ch.ratio = *mn == 0 ? std::numeric_limits<double>::infinity() : static_cast<double>(*mx) / *mn;
    return ch;
  };

  // Candidates: whole parents, then unit counts scaled by m = 1..4; the
  // smallest max load wins, ties broken by ratio and then by fewer units.
  std::vector<detail::UnitChoice> tried;
  if (const auto whole = evaluate(std::vector<int>(grid.blocks.size(), 1))) tried.push_back(*whole);
  for (int m = 1; m <= 4; ++m) {
    std::vector<int> units;
    for (const auto& b : grid.blocks) {
      const double c = static_cast<double>(b.cell_count());
      units.push_back(c <= L ? 1 : m * static_cast<int>(std::ceil(c / L - 1e-12)));
    }
    if (const auto ch = evaluate(units)) tried.push_back(*ch);
  }
  if (tried.empty()) throw DecompError("aggregation found no valid unit split");
  const auto chosen = std::min_element(tried.begin(), tried.end(), [](const auto& a, const auto& b) {
    return std::tie(a.max_load, a.ratio) < std::tie(b.max_load, b.ratio);
  });

  DecompositionPlan plan;
  plan.parents = grid;
  plan.np = np;
  plan.aggregated = true;
  std::size_t u = 0;
  for (std::size_t p = 0; p < grid.blocks.size(); ++p) {
    const Index3 lat = detail::factorize(grid.blocks[p], chosen->units[p], split_dims);
    const auto made = split_parent(plan, grid.blocks[p], lat, 0);
    for (const auto& c : made) plan.info[static_cast<std::size_t>(c.id)].rank = chosen->ranks[u++];
  }
  decompose_boundaries(plan);
  return plan;
}

// Reassigns ranks (e.g. to co-locate children) and revalidates.
inline void assign_ranks(DecompositionPlan& plan, const std::vector<int>& rank_of_child, int np) {
  if (rank_of_child.size() != plan.info.size()) throw DecompError("rank map size mismatch");
  plan.np = np;
  for (std::size_t c = 0; c < plan.info.size(); ++c) {
    if (rank_of_child[c] < 0 || rank_of_child[c] >= np) throw DecompError("rank out of range");
    plan.info[c].rank = rank_of_child[c];
  }
}

// Connectivity seen by each rank: neighbor rank, partner spec and tag for
// every connected child boundary.
struct Link {
  int spec = 0;          // index into plan.children.boundaries
  int partner_spec = 0;  // spec filling the opposite ghosts
  int owner_block = 0;
  int nbr_block = 0;
  int rank = 0;
  int nbr_rank = 0;
  int tag = 0;
  bool local = false;
};

inline std::vector<Link> relink_connected(const DecompositionPlan& plan) {
  const auto& B = plan.children.boundaries;
  std::vector<Link> links;
  for (std::size_t s = 0; s < B.size(); ++s) {
    if (!B[s].connected) continue;
    int partner = -1;
    for (std::size_t q = 0; q < B.size(); ++q) {
      const auto& p = B[q];
      if (p.connected && p.owner == B[s].neighbor && p.face == B[s].nbr_face && p.cells == B[s].nbr_cells &&
          p.neighbor == B[s].owner && p.nbr_face == B[s].face && p.nbr_cells == B[s].cells) {
        partner = static_cast<int>(q);
        break;
      }
    }
    if (partner < 0) throw DecompError("unmatched connected boundary " + std::to_string(s) + " after relink");
    Link l;
    l.spec = static_cast<int>(s);
    l.partner_spec = partner;
    l.owner_block = B[s].owner;
    l.nbr_block = B[s].neighbor;
    l.rank = plan.rank_of(B[s].owner);
    l.nbr_rank = plan.rank_of(B[s].neighbor);
    l.tag = static_cast<int>(s);
    l.local = l.rank == l.nbr_rank;
    links.push_back(l);
  }
  return links;
}

}  // namespace blockflow

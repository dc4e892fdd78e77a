#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "blockflow/cases.hpp"
#include "blockflow/mesh.hpp"

using namespace blockflow;

namespace {

// Volume of a trilinear hexahedron by 3-point Gauss quadrature of the
// Jacobian determinant, exact for this polynomial degree.
double gauss_hex_volume(const std::array<Vec3, 8>& p) {
  const double g[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  const double w[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  double vol = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c) {
        const double u = 0.5 * (g[a] + 1), v = 0.5 * (g[b] + 1), t = 0.5 * (g[c] + 1);
        auto P = [&](int i, int j, int k) { return p[static_cast<std::size_t>(i + 2 * j + 4 * k)]; };
        Vec3 du, dv, dt;
        for (int j = 0; j < 2; ++j)
          for (int k = 0; k < 2; ++k) {
            const double wj = j ? v : 1 - v, wk = k ? t : 1 - t;
            du = du + (wj * wk) * (P(1, j, k) - P(0, j, k));
          }
        for (int i = 0; i < 2; ++i)
          for (int k = 0; k < 2; ++k) {
            const double wi = i ? u : 1 - u, wk = k ? t : 1 - t;
            dv = dv + (wi * wk) * (P(i, 1, k) - P(i, 0, k));
          }
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j) {
            const double wi = i ? u : 1 - u, wj = j ? v : 1 - v;
            dt = dt + (wi * wj) * (P(i, j, 1) - P(i, j, 0));
          }
        vol += w[a] * w[b] * w[c] / 8.0 * dot(du, cross(dv, dt));
      }
  return vol;
}

}  // namespace

TEST(Lattice, IndexIsIFastest) {
  Lattice L({-2, -1, 0}, {5, 4, 3});
  std::size_t n = 0;
  for (int k = 0; k < 3; ++k)
    for (int j = -1; j < 3; ++j)
      for (int i = -2; i < 3; ++i) EXPECT_EQ(L(i, j, k), n++);
  EXPECT_EQ(L.size(), 60u);
}

TEST(Box, IntersectAndCount) {
  const Box a{{1, 1, 1}, {4, 4, 1}};
  const Box b{{3, 0, 1}, {8, 2, 1}};
  const Box c = intersect(a, b);
  EXPECT_EQ(c.lo, (Index3{3, 1, 1}));
  EXPECT_EQ(c.hi, (Index3{4, 2, 1}));
  EXPECT_EQ(c.count(), 4u);
  EXPECT_TRUE(intersect(a, Box{{5, 5, 1}, {6, 6, 1}}).empty());
}

TEST(Metrics, HexVolumeMatchesGaussQuadrature) {
  const CaseSetup c = make_case("multiblock_box_3d");
  for (const Block& b : c.grid.blocks) {
    const BlockMetrics m = compute_metrics(b);
    for (int k = 1; k <= b.dims[2]; k += 3)
      for (int j = 1; j <= b.dims[1]; j += 3)
        for (int i = 1; i <= b.dims[0]; i += 3) {
          std::array<Vec3, 8> p;
          for (int n = 0; n < 8; ++n) p[static_cast<std::size_t>(n)] = b.node(i - 1 + (n & 1), j - 1 + ((n >> 1) & 1), k - 1 + (n >> 2));
          const double ref = gauss_hex_volume(p);
          EXPECT_NEAR(m.volume[m.cells(i, j, k)], ref, 1e-13 * ref);
        }
  }
}

TEST(Metrics, InletAreaIsExact) {
  const CaseSetup c = make_case("inlet_ramp_2d");
  const BlockMetrics m = compute_metrics(c.grid.blocks[0]);
  double area = 0.0;
  for_each_cell(c.grid.blocks[0].interior(), [&](int i, int j, int k) { area += m.volume[m.cells(i, j, k)]; });
  // One minus the ramp: a triangle over [0.25, 0.75] and a strip over [0.75, 1].
  const double t = std::tan(std::acos(-1.0) / 6.0);
  EXPECT_NEAR(area, 1.0 - 0.25 * t, 1e-14);
}

TEST(Metrics, CellsAreClosed) {
  for (const std::string name : {"c_annulus_2d", "multiblock_box_3d"}) {
    const CaseSetup c = make_case(name);
    for (const Block& b : c.grid.blocks) {
      const BlockMetrics m = compute_metrics(b);
      for_each_cell(b.interior(), [&](int i, int j, int k) {
        Vec3 s;
        for (int d = 0; d < b.space_dims(); ++d) {
          const std::size_t lo = m.low_face(d, i, j, k), hi = m.high_face(d, i, j, k);
          s = s + m.area[d][hi] * m.normal[d][hi] - m.area[d][lo] * m.normal[d][lo];
        }
        EXPECT_LT(norm(s), 1e-14) << name << " cell " << i << "," << j << "," << k;
      });
    }
  }
}

TEST(Refinement, PreservesVolume) {
  for (const std::string name : {"inlet_ramp_2d", "multiblock_box_3d"}) {
    double v0 = 0.0, v2 = 0.0;
    for (int level : {0, 2}) {
      const CaseSetup c = make_case(name, level);
      double v = 0.0;
      for (const Block& b : c.grid.blocks) {
        const BlockMetrics m = compute_metrics(b);
        for_each_cell(b.interior(), [&](int i, int j, int k) { v += m.volume[m.cells(i, j, k)]; });
      }
      (level == 0 ? v0 : v2) = v;
    }
    EXPECT_NEAR(v0, v2, 1e-12 * v0) << name;
  }
}

// Geometric oracle: the ghost-layer-1 image of every face cell must share
// its four face nodes with the owner's face.
TEST(Connectivity, MappedCellsShareFaceNodes) {
  const CaseSetup c = make_case("multiblock_box_3d");
  for (const auto& s : c.grid.boundaries) {
    if (!s.connected) continue;
    const Block& a = c.grid.block(s.owner);
    const Block& b = c.grid.block(s.neighbor);
    const int d = s.axis();
    for_each_cell(s.cells, [&](int i, int j, int k) {
      Index3 ghost{i, j, k};
      ghost[d] += is_max_face(s.face) ? 1 : -1;
      const Index3 m = map_to_neighbor(s, a, b, ghost);
      std::set<std::tuple<long, long, long>> fa, fb;
      auto key = [](Vec3 p) {
        return std::tuple<long, long, long>{std::lround(p.x * 1e9), std::lround(p.y * 1e9), std::lround(p.z * 1e9)};
      };
      const Index3 c{i, j, k};
      const int t1 = (d + 1) % 3, t2 = (d + 2) % 3;
      for (int u = 0; u < 2; ++u)
        for (int v = 0; v < 2; ++v) {
          Index3 pa, pb;
          pa[d] = is_max_face(s.face) ? c[d] : c[d] - 1;
          pb[d] = is_max_face(s.nbr_face) ? m[d] : m[d] - 1;
          pa[t1] = c[t1] - 1 + u;
          pa[t2] = c[t2] - 1 + v;
          pb[t1] = m[t1] - 1 + u;
          pb[t2] = m[t2] - 1 + v;
          fa.insert(key(a.node(pa[0], pa[1], pa[2])));
          fb.insert(key(b.node(pb[0], pb[1], pb[2])));
        }
      EXPECT_EQ(fa, fb) << "spec owner " << s.owner << " cell " << i << "," << j << "," << k;
    });
  }
}

TEST(Connectivity, AnnulusSeamMapsAcrossCut) {
  const CaseSetup c = make_case("c_annulus_2d");
  const Block& b = c.grid.blocks[0];
  for (const auto& s : c.grid.boundaries) {
    if (!s.connected || s.face != Face::i_min) continue;
    for (int j = 1; j <= b.dims[1]; ++j) {
      EXPECT_EQ(map_to_neighbor(s, b, b, {0, j, 1}), (Index3{b.dims[0], j, 1}));
      EXPECT_EQ(map_to_neighbor(s, b, b, {-1, j, 1}), (Index3{b.dims[0] - 1, j, 1}));
    }
  }
}

TEST(Validation, UncoveredFaceIsRejected) {
  CaseSetup c = make_case("inlet_ramp_2d");
  c.grid.boundaries.pop_back();
  EXPECT_THROW(validate_boundaries(c.grid), GridError);
}

TEST(GridFile, RoundTripsBitwise) {
  const CaseSetup c = make_case("multiblock_box_3d");
  std::stringstream ss;
  write_grid(c.grid, ss);
  const MultiBlockGrid g = load_grid(ss);
  ASSERT_EQ(g.blocks.size(), c.grid.blocks.size());
  for (std::size_t b = 0; b < g.blocks.size(); ++b) EXPECT_EQ(g.blocks[b].nodes, c.grid.blocks[b].nodes);
  EXPECT_EQ(g.boundaries.size(), c.grid.boundaries.size());
}

TEST(GridFile, DegenerateBlockNamesTheBlock) {
  std::stringstream ss("1\n7 4 0 1\n");
  try {
    load_grid(ss);
    FAIL() << "expected an error";
  } catch (const GridError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate block"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("7"), std::string::npos);
  }
}

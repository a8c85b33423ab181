#include "escroom/error.hpp"
#include "escroom/navmesh.hpp"
#include "support.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace escroom;
using namespace testsupport;

namespace {

const NavMesh& flat_plane() {
  static const NavMesh mesh = bake_navmesh(plane(0, 0, 10, 10), AgentParams{}).mesh;
  return mesh;
}

// Two 4x4 rooms joined by a 1.2 m doorway in a 0.2 m wall at x in [4, 4.2].
std::vector<Triangle> two_rooms() {
  auto tris = plane(0, 0, 8.2, 4);
  append(tris, box(Vec3(4.0, 0, 0), Vec3(4.2, 2.5, 1.4)));
  append(tris, box(Vec3(4.0, 0, 2.6), Vec3(4.2, 2.5, 4)));
  return tris;
}

void expect_valid_mesh(const NavMesh& mesh) {
  const auto& polys = mesh.polygons();
  for (int p = 0; p < static_cast<int>(polys.size()); ++p) {
    auto pts = mesh.plan_polygon(p);
    ASSERT_GE(pts.size(), 3u);
    ASSERT_LE(pts.size(), 6u);
    EXPECT_GT(signed_area(pts), 0.0) << "polygon " << p << " not counter-clockwise";
    for (std::size_t i = 0; i < pts.size(); ++i)
      EXPECT_GE(cross2(pts[i], pts[(i + 1) % pts.size()], pts[(i + 2) % pts.size()]), -1e-9) << "polygon " << p;
    // planarity: every vertex lies on the plane of the first three
    const auto& vs = polys[p].verts;
    const auto& V = mesh.vertices();
    Vec3 n = (V[vs[1]] - V[vs[0]]).cross(V[vs[2]] - V[vs[0]]).normalized();
    for (int v : vs) EXPECT_LT(std::abs(n.dot(V[v] - V[vs[0]])), 1e-4);
  }
  for (const auto& l : mesh.links()) {
    bool back = false;
    for (const auto& r : mesh.links_of(l.neighbor))
      if (r.neighbor == l.poly) back = true;
    EXPECT_TRUE(back) << "link " << l.poly << "->" << l.neighbor << " has no reverse";
  }
}

}  // namespace

TEST(Bake, FlatPlaneAreaMatchesAnalyticErosion) {
  const auto& mesh = flat_plane();
  const double expected = std::pow(10.0 - 2 * 0.25, 2);
  EXPECT_NEAR(mesh.area(), expected, expected * 0.05);
  double mc = mc_area(mesh, -1, -1, 11, 11, 40000, 7);
  EXPECT_NEAR(mc, mesh.area(), expected * 0.02);
  expect_valid_mesh(mesh);
}

TEST(Bake, SteepTriangleHasNoWalkableSurface) {
  const double a = 60.0 * std::numbers::pi / 180.0;
  Triangle t{{Vec3(0, 0, 0), Vec3(0, 5 * std::sin(a), 5 * std::cos(a)), Vec3(5, 0, 0)}};
  if (t.normal().y() < 0) std::swap(t.v[1], t.v[2]);
  std::vector<Triangle> tris{t};
  try {
    bake_navmesh(tris, AgentParams{});
    FAIL() << "expected NoWalkableSurface";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoWalkableSurface);
  }
}

TEST(Bake, RejectsInvalidAgentParams) {
  AgentParams p;
  p.max_slope_deg = 90;
  EXPECT_THROW(bake_navmesh(plane(0, 0, 1, 1), p), Error);
  p = AgentParams{};
  p.radius = 0;
  EXPECT_THROW(bake_navmesh(plane(0, 0, 1, 1), p), Error);
}

TEST(Bake, DegenerateTrianglesWarnAndSkip) {
  auto tris = plane(0, 0, 10, 10);
  tris.push_back(Triangle{{Vec3(1, 0, 1), Vec3(1, 0, 1), Vec3(2, 0, 2)}});
  auto r = bake_navmesh(tris, AgentParams{});
  ASSERT_FALSE(r.warnings.empty());
  EXPECT_EQ(r.warnings.front(), "DegenerateTriangles(1)");
  EXPECT_NEAR(r.mesh.area(), flat_plane().area(), 1e-9);
}

TEST(Bake, ObstacleIsExcludedWithClearance) {
  auto tris = plane(0, 0, 10, 10);
  append(tris, box(Vec3(4, 0, 4), Vec3(6, 1, 6)));
  auto mesh = bake_navmesh(tris, AgentParams{}).mesh;
  expect_valid_mesh(mesh);
  // nothing within the agent radius of the box footprint at floor level
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(3.8, 6.2);
  for (int i = 0; i < 2000; ++i) {
    Vec3 p(u(rng), 0, u(rng));
    EXPECT_FALSE(mesh.locate(p, 0.05)) << p.transpose();
  }
  EXPECT_TRUE(mesh.locate(Vec3(2, 0, 2), 0.05));
}

TEST(Bake, ClimbableStepConnectsLevels) {
  auto tris = plane(0, 0, 6, 4);
  append(tris, box(Vec3(3, 0, 0), Vec3(6, 0.2, 4)));
  auto mesh = bake_navmesh(tris, AgentParams{}).mesh;
  auto comp = mesh.components();
  auto a = mesh.locate(Vec3(1.5, 0, 2), 0.05);
  auto b = mesh.locate(Vec3(4.5, 0.2, 2), 0.05);
  ASSERT_TRUE(a && b);
  EXPECT_EQ(comp[*a], comp[*b]);
  // away from the step edge the surface height is exact
  EXPECT_NEAR(mesh.height_at(*b, Vec2(4.5, 2)), 0.2, 1e-9);
  expect_valid_mesh(mesh);
}

TEST(Bake, LowCeilingIsNotWalkable) {
  auto tris = plane(0, 0, 10, 10);
  append(tris, box(Vec3(3, 1.0, 3), Vec3(7, 1.2, 7)));  // table 1 m high
  auto mesh = bake_navmesh(tris, AgentParams{}).mesh;
  EXPECT_FALSE(mesh.locate(Vec3(5, 0, 5), 0.05));
  EXPECT_TRUE(mesh.locate(Vec3(1, 0, 1), 0.05));
}

TEST(Bake, DisjointGeometryIsAdditive) {
  auto left = plane(0, 0, 4, 4);
  auto right = plane(6, 0, 10, 5);
  auto both = left;
  append(both, right);
  double a = bake_navmesh(left, AgentParams{}).mesh.area();
  double b = bake_navmesh(right, AgentParams{}).mesh.area();
  double ab = bake_navmesh(both, AgentParams{}).mesh.area();
  EXPECT_NEAR(ab, a + b, 0.05 * (a + b));
}

TEST(Bake, DoorwayJoinsRooms) {
  auto mesh = bake_navmesh(two_rooms(), AgentParams{}).mesh;
  expect_valid_mesh(mesh);
  auto comp = mesh.components();
  auto a = mesh.locate(Vec3(1, 0, 2), 0.05);
  auto b = mesh.locate(Vec3(7, 0, 2), 0.05);
  ASSERT_TRUE(a && b);
  EXPECT_EQ(comp[*a], comp[*b]);
}

TEST(Bake, NarrowGapIsClosed) {
  auto tris = plane(0, 0, 8.2, 4);
  append(tris, box(Vec3(4.0, 0, 0), Vec3(4.2, 2.5, 1.8)));
  append(tris, box(Vec3(4.0, 0, 2.2), Vec3(4.2, 2.5, 4)));  // 0.4 m gap < 2 * radius
  auto mesh = bake_navmesh(tris, AgentParams{}).mesh;
  auto comp = mesh.components();
  auto a = mesh.locate(Vec3(1, 0, 2), 0.05);
  auto b = mesh.locate(Vec3(7, 0, 2), 0.05);
  ASSERT_TRUE(a && b);
  EXPECT_NE(comp[*a], comp[*b]);
}

TEST(Bake, NoPolygonOverlap) {
  auto tris = two_rooms();
  append(tris, box(Vec3(1, 0, 1), Vec3(2, 0.8, 1.7)));
  auto mesh = bake_navmesh(tris, AgentParams{}).mesh;
  // sample: every point is inside at most one polygon interior
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> ux(0, 8.2), uz(0, 4);
  for (int i = 0; i < 20000; ++i) {
    Vec2 p(ux(rng), uz(rng));
    int inside = 0;
    for (int k = 0; k < static_cast<int>(mesh.polygons().size()); ++k)
      if (point_in_convex(mesh.plan_polygon(k), p, -1e-6)) ++inside;
    EXPECT_LE(inside, 1);
  }
}

TEST(Carve, EmptyHoleListIsIdentity) {
  const auto& mesh = flat_plane();
  NavMesh carved = carve_holes(mesh, {});
  EXPECT_TRUE(carved == mesh);
}

TEST(Carve, HoleCoveringEverythingEmptiesMesh) {
  std::vector<Hole> holes{{rect(-1, -1, 11, 11), "all"}};
  EXPECT_TRUE(carve_holes(flat_plane(), holes).empty());
}

TEST(Carve, CentredHoleRemovesItsArea) {
  std::vector<Hole> holes{{rect(4, 4, 6, 6), ".navmesh-hole"}};
  auto carved = carve_holes(flat_plane(), holes);
  expect_valid_mesh(carved);
  double removed = flat_plane().area() - carved.area();
  EXPECT_NEAR(removed, 4.0, 0.2);
  double mc = mc_area(carved, -1, -1, 11, 11, 40000, 5);
  EXPECT_NEAR(mc_area(flat_plane(), -1, -1, 11, 11, 40000, 5) - mc, 4.0, 0.2);
  for (int k = 0; k < static_cast<int>(carved.polygons().size()); ++k)
    EXPECT_FALSE(point_in_convex(carved.plan_polygon(k), Vec2(5, 5), -1e-6));
}

TEST(Carve, NonConvexHole) {
  std::vector<Vec2> ell{Vec2(2, 2), Vec2(6, 2), Vec2(6, 3), Vec2(3, 3), Vec2(3, 6), Vec2(2, 6)};
  std::vector<Hole> holes{{ell, "ell"}};
  auto carved = carve_holes(flat_plane(), holes);
  EXPECT_NEAR(flat_plane().area() - carved.area(), std::abs(signed_area(ell)), 1e-6);
  EXPECT_TRUE(carved.locate(Vec3(4.5, 0, 4.5), 1e-3));
  EXPECT_FALSE(carved.locate(Vec3(2.5, 0, 5), 1e-3));
}

TEST(ConstrainMove, InteriorMoveIsUnchanged) {
  Vec3 r = constrain_move(flat_plane(), Vec3(5, 0, 5), Vec3(6, 0, 5));
  EXPECT_NEAR((r - Vec3(6, 0, 5)).norm(), 0.0, 1e-12);
}

TEST(ConstrainMove, SlidesToBoundaryAlongSegment) {
  const auto& mesh = flat_plane();
  Vec3 prev(9, 0, 5), desired(12, 0, 5);
  Vec3 r = constrain_move(mesh, prev, desired);
  // oracle: first crossing of prev->desired with any boundary edge (edges without links)
  double best = 1.0;
  for (int p = 0; p < static_cast<int>(mesh.polygons().size()); ++p) {
    auto pts = mesh.plan_polygon(p);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      bool linked = false;
      for (const auto& l : mesh.links_of(p))
        if (l.edge == static_cast<int>(i)) linked = true;
      if (linked) continue;
      Vec2 a = pts[i], b = pts[(i + 1) % pts.size()];
      Vec2 s = plan(prev), d = plan(desired) - s;
      double den = cross2(Vec2::Zero(), d, b - a);
      if (std::abs(den) < 1e-12) continue;
      double t = cross2(Vec2::Zero(), a - s, b - a) / den;
      double u = cross2(Vec2::Zero(), a - s, d) / den;
      if (t >= 0 && t <= 1 && u >= 0 && u <= 1) best = std::min(best, t);
    }
  }
  Vec3 expected = prev + (desired - prev) * best;
  EXPECT_NEAR((r - expected).norm(), 0.0, 1e-9);
  EXPECT_NEAR(r.x(), 9.7, 1e-9);  // 3 cells of erosion from x = 10
}

TEST(ConstrainMove, StopsAtHoleEdge) {
  std::vector<Hole> holes{{rect(4, 4, 6, 6), "h"}};
  auto carved = carve_holes(flat_plane(), holes);
  Vec3 r = constrain_move(carved, Vec3(3, 0, 5), Vec3(5, 0, 5));
  EXPECT_NEAR((r - Vec3(4, 0, 5)).norm(), 0.0, 1e-9);
}

TEST(ConstrainMove, RejectsOffMeshPrev) {
  try {
    constrain_move(flat_plane(), Vec3(5, 0.5, 5), Vec3(6, 0, 5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::PrevOffMesh);
  }
}

TEST(ConstrainMove, RandomisedClosure) {
  auto tris = two_rooms();
  append(tris, box(Vec3(1, 0, 1), Vec3(2, 0.8, 1.7)));
  auto mesh = carve_holes(bake_navmesh(tris, AgentParams{}).mesh, std::vector<Hole>{{rect(6, 1, 7, 2), "h"}});
  std::mt19937 rng(1234);
  std::uniform_real_distribution<double> ux(-1, 9.2), uz(-1, 5), step(-1.5, 1.5);
  Vec3 pos(0.5, 0, 0.5);
  ASSERT_TRUE(mesh.locate(pos, kSnapTolerance));
  const int iterations = 100000;
  for (int i = 0; i < iterations; ++i) {
    Vec3 desired = (i % 10 == 0) ? Vec3(ux(rng), 0, uz(rng)) : pos + Vec3(step(rng), 0, step(rng));
    Vec3 next = constrain_move(mesh, pos, desired);
    auto poly = mesh.locate(next, kSnapTolerance);
    ASSERT_TRUE(poly) << "iteration " << i << " produced off-mesh " << next.transpose();
    // result lies on the movement segment
    Vec2 s = plan(pos), e = plan(desired), q = plan(next);
    ASSERT_LT(std::abs(cross2(s, e, q)), 1e-6 * std::max(1.0, (e - s).norm()));
    pos = next;
  }
}

TEST(FindPath, SamePointIsSingleWaypoint) {
  auto p = find_path(flat_plane(), Vec3(5, 0, 5), Vec3(5, 0, 5));
  ASSERT_TRUE(p);
  EXPECT_EQ(p->size(), 1u);
}

TEST(FindPath, StraightCorridor) {
  auto mesh = bake_navmesh(plane(0, 0, 20, 2), AgentParams{}).mesh;
  Vec3 a(1, 0, 1), b(19, 0, 1);
  auto p = find_path(mesh, a, b);
  ASSERT_TRUE(p);
  EXPECT_EQ(p->size(), 2u);
  EXPECT_NEAR(path_length(*p), 18.0, 0.18);
}

TEST(FindPath, UShapedObstacleMatchesGridOracle) {
  auto tris = plane(0, 0, 10, 10);
  append(tris, box(Vec3(3, 0, 3), Vec3(7, 2, 3.4)));
  append(tris, box(Vec3(3, 0, 3), Vec3(3.4, 2, 8)));
  append(tris, box(Vec3(6.6, 0, 3), Vec3(7, 2, 8)));
  auto mesh = bake_navmesh(tris, AgentParams{}).mesh;
  Vec3 a(5, 0, 5), b(5, 0, 1);
  auto p = find_path(mesh, a, b);
  ASSERT_TRUE(p);
  auto oracle = grid_shortest(mesh, a, b, 0.05, 0, 0, 10, 10);
  ASSERT_TRUE(oracle);
  EXPECT_LE(path_length(*p), 1.05 * *oracle);
  EXPECT_GE(path_length(*p), 0.95 * *oracle);
}

TEST(FindPath, RandomMapsWithinGridOracleBound) {
  std::mt19937 rng(2024);
  int maps = 0;
  for (int trial = 0; maps < 20 && trial < 200; ++trial) {
    auto mesh = bake_navmesh(random_obstacle_map(rng), AgentParams{}).mesh;
    Vec3 a(0.5, 0, 0.5), b(9.5, 0, 9.5);
    if (!mesh.locate(a, 1e-3) || !mesh.locate(b, 1e-3)) continue;
    auto p = find_path(mesh, a, b);
    auto oracle = grid_shortest(mesh, a, b, 0.05, 0, 0, 10, 10);
    ASSERT_EQ(p.has_value(), oracle.has_value()) << "map " << trial;
    if (!p) continue;
    ++maps;
    EXPECT_LE(path_length(*p), 1.05 * *oracle) << "map " << trial;
    // every waypoint on the mesh, and every leg stays on it
    for (std::size_t i = 0; i < p->size(); ++i) {
      ASSERT_TRUE(mesh.locate((*p)[i], 1e-3));
      if (i == 0) continue;
      for (int k = 1; k < 20; ++k) {
        Vec3 q = (*p)[i - 1] + ((*p)[i] - (*p)[i - 1]) * (k / 20.0);
        EXPECT_TRUE(mesh.locate(q, 1e-3)) << "map " << trial << " leg " << i;
      }
    }
    auto back = find_path(mesh, b, a);
    ASSERT_TRUE(back);
    EXPECT_NEAR(path_length(*back), path_length(*p), 1e-6);
  }
  EXPECT_EQ(maps, 20);
}

TEST(FindPath, OffMeshEndpointThrows) {
  try {
    find_path(flat_plane(), Vec3(5, 0, 5), Vec3(50, 0, 5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::PointOffMesh);
  }
}

TEST(Blockers, DoorwayBlockerDisconnectsRooms) {
  std::vector<BlockerFootprint> blockers{{"door", rect(3.8, 1.2, 4.4, 2.8)}};
  auto mesh = bake_navmesh(two_rooms(), AgentParams{}, BakeSettings{}, blockers).mesh;
  Vec3 a(1, 0, 2), b(7, 0, 2);
  auto open_path = find_path(mesh, a, b);
  ASSERT_TRUE(open_path);
  mesh.set_blocker("door", true);
  EXPECT_FALSE(find_path(mesh, a, b));
  mesh.set_blocker("door", true);
  EXPECT_FALSE(find_path(mesh, a, b));
  mesh.set_blocker("door", false);
  auto again = find_path(mesh, a, b);
  ASSERT_TRUE(again);
  ASSERT_EQ(again->size(), open_path->size());
  for (std::size_t i = 0; i < again->size(); ++i) EXPECT_EQ((*again)[i], (*open_path)[i]);
  EXPECT_THROW(mesh.set_blocker("nope", true), Error);
}

TEST(Blockers, ActiveBlockerStopsMovement) {
  std::vector<BlockerFootprint> blockers{{"door", rect(3.8, 1.2, 4.4, 2.8)}};
  auto mesh = bake_navmesh(two_rooms(), AgentParams{}, BakeSettings{}, blockers).mesh;
  mesh.set_blocker("door", true);
  Vec3 r = constrain_move(mesh, Vec3(3, 0, 2), Vec3(6, 0, 2));
  EXPECT_LT(r.x(), 3.8 + 0.1);
  mesh.set_blocker("door", false);
  r = constrain_move(mesh, Vec3(3, 0, 2), Vec3(6, 0, 2));
  EXPECT_NEAR(r.x(), 6, 1e-9);
}

TEST(Export, JsonRoundTrip) {
  std::vector<BlockerFootprint> blockers{{"door", rect(3.8, 1.2, 4.4, 2.8)}};
  auto mesh = bake_navmesh(two_rooms(), AgentParams{}, BakeSettings{}, blockers).mesh;
  auto j = mesh.to_json();
  EXPECT_EQ(j["version"], 1);
  EXPECT_EQ(j["polygons"].size(), mesh.polygons().size());
  EXPECT_FALSE(j["blockers"]["door"].empty());
  for (const auto& a : j["adjacency"]) EXPECT_EQ(a.size(), 3u);
  auto back = NavMesh::from_json(nlohmann::json::parse(j.dump()));
  EXPECT_TRUE(back == mesh);
  EXPECT_EQ(back.links().size(), mesh.links().size());
}

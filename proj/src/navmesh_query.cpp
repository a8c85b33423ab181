#include "escroom/error.hpp"
#include "escroom/navmesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <tuple>

namespace escroom {

namespace {

bool on_segment(const Vec2& p, const Vec2& a, const Vec2& b, double eps) {
  return (closest_point_on_segment(p, a, b) - p).norm() <= eps;
}

struct Exit {
  double t;
  int edge;
};

// Parametric exit of the line s + t*d from a counter-clockwise convex polygon.
std::vector<Exit> exits(std::span<const Vec2> poly, const Vec2& s, const Vec2& d) {
  std::vector<Exit> out;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    Vec2 e = b - a;
    Vec2 inward(-e.y(), e.x());
    double denom = inward.dot(d);
    if (denom >= -1e-15) continue;
    double num = inward.dot(s - a);
    out.push_back({-num / denom, static_cast<int>(i)});
  }
  std::sort(out.begin(), out.end(), [](const Exit& x, const Exit& y) { return x.t < y.t; });
  return out;
}

}  // namespace

Vec3 constrain_move(const NavMesh& mesh, const Vec3& prev, const Vec3& desired) {
  auto start = mesh.locate(prev, kSnapTolerance);
  if (!start) throw Error(Errc::PrevOffMesh, "previous position is not on the walkable mesh");
  const Vec2 s = plan(prev);
  const Vec2 e = plan(desired);
  const Vec2 d = e - s;
  int cur = *start;
  double t = 0.0;
  std::set<int> at_t{cur};
  const std::size_t guard = mesh.polygons().size() * 4 + 16;
  for (std::size_t iter = 0; iter < guard; ++iter) {
    auto pts = mesh.plan_polygon(cur);
    if (point_in_convex(pts, e, 1e-9)) return Vec3(e.x(), mesh.height_at(cur, e), e.y());
    auto ex = exits(pts, s, d);
    if (ex.empty()) break;
    double tmax = std::clamp(ex.front().t, t, 1.0);
    Vec2 crossing = s + d * tmax;
    int next = -1;
    for (const auto& x : ex) {
      if (x.t > ex.front().t + 1e-9) break;
      for (const auto& l : mesh.links_of(cur)) {
        if (l.edge != x.edge || !mesh.polygon_active(l.neighbor)) continue;
        if (!on_segment(crossing, l.a, l.b, 1e-7)) continue;
        if (tmax <= t + 1e-12 && at_t.count(l.neighbor)) continue;
        next = l.neighbor;
        break;
      }
      if (next >= 0) break;
    }
    if (next < 0) return Vec3(crossing.x(), mesh.height_at(cur, crossing), crossing.y());
    if (tmax > t + 1e-12) at_t.clear();
    t = tmax;
    at_t.insert(next);
    cur = next;
  }
  Vec2 p = s + d * t;
  return Vec3(p.x(), mesh.height_at(cur, p), p.y());
}

namespace {

std::optional<std::vector<Vec3>> find_path_ordered(const NavMesh& mesh, const Vec3& a, const Vec3& b) {
  const double tol = std::max(kSnapTolerance, mesh.max_climb());
  auto sa = mesh.locate(a, tol);
  if (!sa) throw Error(Errc::PointOffMesh, "path start is not on an active polygon");
  auto sb = mesh.locate(b, tol);
  if (!sb) throw Error(Errc::PointOffMesh, "path end is not on an active polygon");
  const Vec2 s = plan(a), e = plan(b);
  const Vec3 start(s.x(), mesh.height_at(*sa, s), s.y());
  const Vec3 goal(e.x(), mesh.height_at(*sb, e), e.y());
  if (s == e) return std::vector<Vec3>{start};
  if (*sa == *sb) return std::vector<Vec3>{start, goal};

  // Search nodes are points sampled along every portal (ends included, at most
  // kPortalSpacing apart). Polygons are convex, so any two points on the
  // boundary of one polygon see each other; dense samples keep the corridor
  // choice close to the true shortest route.
  constexpr double kPortalSpacing = 0.2;
  const auto& links = mesh.links();
  const int nlinks = static_cast<int>(links.size());
  std::vector<int> first(nlinks + 1, 0);
  for (int i = 0; i < nlinks; ++i) {
    double len = (links[i].b - links[i].a).norm();
    first[i + 1] = first[i] + 1 + std::max(1, static_cast<int>(std::ceil(len / kPortalSpacing)));
  }
  const int start_node = first[nlinks];
  const int goal_node = start_node + 1;
  std::vector<int> link_of(start_node);
  std::vector<Vec2> where(static_cast<std::size_t>(goal_node) + 1);
  for (int i = 0; i < nlinks; ++i) {
    const int count = first[i + 1] - first[i];
    for (int k = 0; k < count; ++k) {
      link_of[first[i] + k] = i;
      where[first[i] + k] = links[i].a + (links[i].b - links[i].a) * (static_cast<double>(k) / (count - 1));
    }
  }
  where[start_node] = s;
  where[goal_node] = e;
  auto poly_of_node = [&](int node) { return node == start_node ? *sa : links[link_of[node]].neighbor; };
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> g(static_cast<std::size_t>(goal_node) + 1, kInf);
  std::vector<int> parent(g.size(), -1);
  std::vector<bool> closed(g.size(), false);
  using Item = std::tuple<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  g[start_node] = 0.0;
  open.emplace((s - e).norm(), start_node);
  bool found = false;
  while (!open.empty()) {
    auto [f, cur] = open.top();
    open.pop();
    if (closed[cur]) continue;
    closed[cur] = true;
    if (cur == goal_node) {
      found = true;
      break;
    }
    const Vec2 p = where[cur];
    const int poly = poly_of_node(cur);
    auto relax = [&](int node) {
      double ng = g[cur] + (p - where[node]).norm();
      if (ng < g[node]) {
        g[node] = ng;
        parent[node] = cur;
        open.emplace(ng + (where[node] - e).norm(), node);
      }
    };
    if (poly == *sb) relax(goal_node);
    for (const auto& l : mesh.links_of(poly)) {
      if (!mesh.polygon_active(l.neighbor)) continue;
      int li = static_cast<int>(&l - links.data());
      for (int node = first[li]; node < first[li + 1]; ++node)
        if (!closed[node]) relax(node);
    }
  }
  if (!found) return std::nullopt;

  std::vector<const NavLink*> corridor;
  for (int node = parent[goal_node]; node != start_node; node = parent[node]) corridor.push_back(&links[link_of[node]]);
  std::reverse(corridor.begin(), corridor.end());

  // Portal i joins corridor poly i-1 to poly i; left/right as seen walking through.
  std::vector<Vec2> left{s}, right{s};
  std::vector<int> poly_of{*sa};
  for (const NavLink* l : corridor) {
    left.push_back(l->b);
    right.push_back(l->a);
    poly_of.push_back(l->neighbor);
  }
  left.push_back(e);
  right.push_back(e);
  poly_of.push_back(*sb);

  std::vector<std::pair<Vec2, int>> corners{{s, *sa}};
  Vec2 apex = s, fl = s, fr = s;
  int apex_i = 0, left_i = 0, right_i = 0;
  const int count = static_cast<int>(left.size());
  for (int i = 1; i < count; ++i) {
    const Vec2& nl = left[i];
    const Vec2& nr = right[i];
    if (cross2(apex, fr, nr) >= 0.0) {
      if (apex == fr || cross2(apex, fl, nr) < 0.0) {
        fr = nr;
        right_i = i;
      } else {
        apex = fl;
        apex_i = left_i;
        corners.emplace_back(apex, poly_of[apex_i]);
        fl = fr = apex;
        left_i = right_i = apex_i;
        i = apex_i;
        continue;
      }
    }
    if (cross2(apex, fl, nl) <= 0.0) {
      if (apex == fl || cross2(apex, fr, nl) > 0.0) {
        fl = nl;
        left_i = i;
      } else {
        apex = fr;
        apex_i = right_i;
        corners.emplace_back(apex, poly_of[apex_i]);
        fl = fr = apex;
        left_i = right_i = apex_i;
        i = apex_i;
        continue;
      }
    }
  }
  corners.emplace_back(e, *sb);

  std::vector<Vec3> path{start};
  for (std::size_t k = 1; k + 1 < corners.size(); ++k) {
    const auto& [p, poly] = corners[k];
    if ((p - plan(path.back())).norm() < 1e-12) continue;
    path.emplace_back(p.x(), mesh.height_at(poly, p), p.y());
  }
  if ((plan(path.back()) - e).norm() < 1e-12 && path.size() > 1) path.pop_back();
  path.push_back(goal);
  return path;
}

}  // namespace

std::optional<std::vector<Vec3>> find_path(const NavMesh& mesh, const Vec3& a, const Vec3& b) {
  auto key = [](const Vec3& v) { return std::make_tuple(v.x(), v.y(), v.z()); };
  if (key(b) < key(a)) {
    auto r = find_path_ordered(mesh, b, a);
    if (r) std::reverse(r->begin(), r->end());
    return r;
  }
  return find_path_ordered(mesh, a, b);
}

}  // namespace escroom

#include "escroom/navmesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

namespace escroom {

namespace {

struct Piece {
  std::vector<Vec3> pts;  // counter-clockwise in plan view
  int region;
  int blocker;
};

double plan_area(const std::vector<Vec3>& pts) {
  double a = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3& p = pts[i];
    const Vec3& q = pts[(i + 1) % pts.size()];
    a += p.x() * q.z() - q.x() * p.z();
  }
  return 0.5 * a;
}

// Keeps the part of a convex polygon where side(p) >= 0.
std::vector<Vec3> clip(const std::vector<Vec3>& in, const Vec2& a, const Vec2& b, double sign) {
  std::vector<Vec3> out;
  const std::size_t n = in.size();
  auto side = [&](const Vec3& p) { return sign * cross2(a, b, plan(p)); };
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& p = in[i];
    const Vec3& q = in[(i + 1) % n];
    double sp = side(p), sq = side(q);
    if (sp >= 0.0) out.push_back(p);
    if ((sp > 0.0 && sq < 0.0) || (sp < 0.0 && sq > 0.0)) {
      double t = sp / (sp - sq);
      out.push_back(p + (q - p) * t);
    }
  }
  return out;
}

std::vector<Vec3> tidy(std::vector<Vec3> pts) {
  for (bool changed = true; changed && pts.size() >= 3;) {
    changed = false;
    for (std::size_t i = 0; i < pts.size() && pts.size() >= 3; ++i) {
      const std::size_t n = pts.size();
      const Vec3& p = pts[(i + n - 1) % n];
      const Vec3& c = pts[i];
      const Vec3& q = pts[(i + 1) % n];
      if ((plan(c) - plan(p)).norm() < 1e-9 || std::abs(cross2(plan(p), plan(c), plan(q))) < 1e-12) {
        pts.erase(pts.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
      }
    }
  }
  return pts;
}

bool is_convex(const std::vector<Vec2>& poly) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i)
    if (cross2(poly[i], poly[(i + 1) % n], poly[(i + 2) % n]) < -1e-12) return false;
  return true;
}

std::vector<std::vector<Vec2>> convex_pieces(std::vector<Vec2> poly) {
  if (signed_area(poly) < 0.0) std::reverse(poly.begin(), poly.end());
  if (is_convex(poly)) return {poly};
  std::vector<std::vector<Vec2>> tris;
  std::vector<Vec2> rest = poly;
  while (rest.size() > 3) {
    const std::size_t n = rest.size();
    bool clipped = false;
    for (std::size_t k = 0; k < n && !clipped; ++k) {
      const Vec2& p = rest[(k + n - 1) % n];
      const Vec2& c = rest[k];
      const Vec2& q = rest[(k + 1) % n];
      if (cross2(p, c, q) <= 1e-12) continue;
      bool blocked = false;
      for (std::size_t m = 0; m < n && !blocked; ++m) {
        if (m == k || m == (k + 1) % n || m == (k + n - 1) % n) continue;
        const Vec2& v = rest[m];
        if (cross2(p, c, v) >= 0 && cross2(c, q, v) >= 0 && cross2(q, p, v) >= 0) blocked = true;
      }
      if (blocked) continue;
      tris.push_back({p, c, q});
      rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(k));
      clipped = true;
    }
    if (!clipped) break;
  }
  if (rest.size() == 3 && cross2(rest[0], rest[1], rest[2]) > 0) tris.push_back(rest);
  return tris;
}

std::vector<Piece> subtract(const std::vector<Piece>& polys, const std::vector<Vec2>& hole) {
  Vec2 hlo = hole[0], hhi = hole[0];
  for (const auto& p : hole) {
    hlo = hlo.cwiseMin(p);
    hhi = hhi.cwiseMax(p);
  }
  std::vector<Piece> out;
  for (const auto& poly : polys) {
    Vec2 lo = plan(poly.pts[0]), hi = lo;
    for (const auto& p : poly.pts) {
      lo = lo.cwiseMin(plan(p));
      hi = hi.cwiseMax(plan(p));
    }
    if (lo.x() >= hhi.x() || hi.x() <= hlo.x() || lo.y() >= hhi.y() || hi.y() <= hlo.y()) {
      out.push_back(poly);
      continue;
    }
    std::vector<Piece> pieces;
    std::vector<Vec3> remaining = poly.pts;
    for (std::size_t i = 0; i < hole.size() && !remaining.empty(); ++i) {
      const Vec2& a = hole[i];
      const Vec2& b = hole[(i + 1) % hole.size()];
      auto outside = tidy(clip(remaining, a, b, -1.0));
      if (outside.size() >= 3 && plan_area(outside) > 1e-10) pieces.push_back({outside, poly.region, poly.blocker});
      remaining = tidy(clip(remaining, a, b, 1.0));
      if (remaining.size() < 3 || plan_area(remaining) < 1e-12) remaining.clear();
    }
    if (remaining.empty()) {
      out.push_back(poly);  // no overlap with the hole interior
      continue;
    }
    for (auto& pc : pieces) out.push_back(std::move(pc));
  }
  return out;
}

void split_large(std::vector<Piece>& polys, std::size_t nvp) {
  std::vector<Piece> out;
  for (auto& p : polys) {
    if (p.pts.size() <= nvp) {
      out.push_back(std::move(p));
      continue;
    }
    std::size_t start = 1;
    while (start + 1 < p.pts.size()) {
      std::size_t end = std::min(p.pts.size() - 1, start + nvp - 2);
      Piece piece{{p.pts[0]}, p.region, p.blocker};
      for (std::size_t k = start; k <= end; ++k) piece.pts.push_back(p.pts[k]);
      out.push_back(std::move(piece));
      start = end;
    }
  }
  polys = std::move(out);
}

}  // namespace

NavMesh carve_holes(const NavMesh& mesh, std::span<const Hole> holes) {
  if (holes.empty()) return mesh;
  std::vector<Piece> polys;
  for (const auto& p : mesh.polygons()) {
    Piece piece{{}, p.region, p.blocker};
    for (int v : p.verts) piece.pts.push_back(mesh.vertices()[v]);
    polys.push_back(std::move(piece));
  }
  for (const auto& hole : holes) {
    if (hole.footprint.size() < 3 || std::abs(signed_area(hole.footprint)) < 1e-12) continue;
    for (const auto& piece : convex_pieces(hole.footprint)) polys = subtract(polys, piece);
  }
  split_large(polys, 6);

  std::vector<Vec3> verts;
  std::map<std::tuple<long long, long long, long long>, int> weld;
  std::vector<NavPolygon> out;
  for (const auto& p : polys) {
    NavPolygon np;
    np.region = p.region;
    np.blocker = p.blocker;
    for (const auto& v : p.pts) {
      auto key = std::make_tuple(std::llround(v.x() * 1e7), std::llround(v.z() * 1e7), std::llround(v.y() * 1e4));
      auto [it, inserted] = weld.emplace(key, static_cast<int>(verts.size()));
      if (inserted) verts.push_back(v);
      if (np.verts.empty() || np.verts.back() != it->second) np.verts.push_back(it->second);
    }
    while (np.verts.size() > 1 && np.verts.front() == np.verts.back()) np.verts.pop_back();
    if (np.verts.size() >= 3) out.push_back(std::move(np));
  }
  NavMesh result(std::move(verts), std::move(out), mesh.blocker_ids(), mesh.max_climb());
  for (const auto& id : mesh.blocker_ids()) result.set_blocker(id, mesh.blocker_active(id));
  return result;
}

}  // namespace escroom

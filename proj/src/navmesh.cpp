#include "escroom/error.hpp"
#include "escroom/navmesh.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace escroom {

namespace {

constexpr double kCollinearTol = 1e-5;

struct EdgeRef {
  int poly;
  int edge;
};

}  // namespace

void AgentParams::validate() const {
  auto bad = [](double v) { return !std::isfinite(v) || v <= 0.0; };
  if (bad(radius)) throw Error(Errc::InvalidAgentParams, "radius must be positive");
  if (bad(height)) throw Error(Errc::InvalidAgentParams, "height must be positive");
  if (!std::isfinite(max_climb) || max_climb < 0.0) throw Error(Errc::InvalidAgentParams, "max_climb must be >= 0");
  if (!std::isfinite(max_slope_deg) || max_slope_deg <= 0.0 || max_slope_deg >= 90.0)
    throw Error(Errc::InvalidAgentParams, "max_slope must be in (0, 90) degrees");
}

NavMesh::NavMesh(std::vector<Vec3> vertices, std::vector<NavPolygon> polygons, std::vector<std::string> blocker_ids,
                 double max_climb)
    : vertices_(std::move(vertices)),
      polygons_(std::move(polygons)),
      blocker_ids_(std::move(blocker_ids)),
      blocker_active_(blocker_ids_.size(), false),
      max_climb_(max_climb) {
  build_index();
  build_links();
}

std::span<const NavLink> NavMesh::links_of(int poly) const {
  if (poly < 0 || static_cast<std::size_t>(poly) + 1 >= link_start_.size()) return {};
  return std::span<const NavLink>(links_).subspan(link_start_[poly], link_start_[poly + 1] - link_start_[poly]);
}

std::vector<Vec2> NavMesh::plan_polygon(int poly) const {
  std::vector<Vec2> out;
  out.reserve(polygons_[poly].verts.size());
  for (int v : polygons_[poly].verts) out.push_back(plan(vertices_[v]));
  return out;
}

double NavMesh::polygon_area(int poly) const {
  auto pts = plan_polygon(poly);
  return std::abs(signed_area(pts));
}

double NavMesh::area(bool active_only) const {
  double total = 0.0;
  for (int i = 0; i < static_cast<int>(polygons_.size()); ++i) {
    if (active_only && !polygon_active(i)) continue;
    total += polygon_area(i);
  }
  return total;
}

bool NavMesh::polygon_active(int poly) const {
  int b = polygons_[poly].blocker;
  return b < 0 || !blocker_active_[b];
}

std::vector<int> NavMesh::blocker_polygons(std::string_view id) const {
  std::vector<int> out;
  auto it = std::find(blocker_ids_.begin(), blocker_ids_.end(), id);
  if (it == blocker_ids_.end()) return out;
  int b = static_cast<int>(it - blocker_ids_.begin());
  for (int i = 0; i < static_cast<int>(polygons_.size()); ++i)
    if (polygons_[i].blocker == b) out.push_back(i);
  return out;
}

bool NavMesh::blocker_active(std::string_view id) const {
  auto it = std::find(blocker_ids_.begin(), blocker_ids_.end(), id);
  if (it == blocker_ids_.end()) throw Error(Errc::UnknownBlocker, std::string(id));
  return blocker_active_[it - blocker_ids_.begin()];
}

void NavMesh::set_blocker(std::string_view id, bool active) {
  auto it = std::find(blocker_ids_.begin(), blocker_ids_.end(), id);
  if (it == blocker_ids_.end()) throw Error(Errc::UnknownBlocker, std::string(id));
  blocker_active_[it - blocker_ids_.begin()] = active;
}

void NavMesh::build_index() {
  index_.clear();
  index_w_ = index_h_ = 0;
  if (polygons_.empty()) return;
  Vec2 lo(std::numeric_limits<double>::max(), std::numeric_limits<double>::max());
  Vec2 hi = -lo;
  for (const auto& p : polygons_)
    for (int v : p.verts) {
      lo = lo.cwiseMin(plan(vertices_[v]));
      hi = hi.cwiseMax(plan(vertices_[v]));
    }
  index_cell_ = 1.0;
  index_origin_ = lo;
  index_w_ = std::max(1, static_cast<int>(std::floor((hi.x() - lo.x()) / index_cell_)) + 1);
  index_h_ = std::max(1, static_cast<int>(std::floor((hi.y() - lo.y()) / index_cell_)) + 1);
  index_.assign(static_cast<std::size_t>(index_w_) * index_h_, {});
  for (int i = 0; i < static_cast<int>(polygons_.size()); ++i) {
    Vec2 plo(std::numeric_limits<double>::max(), std::numeric_limits<double>::max());
    Vec2 phi = -plo;
    for (int v : polygons_[i].verts) {
      plo = plo.cwiseMin(plan(vertices_[v]));
      phi = phi.cwiseMax(plan(vertices_[v]));
    }
    int x0 = std::clamp(static_cast<int>(std::floor((plo.x() - lo.x() - 1e-6) / index_cell_)), 0, index_w_ - 1);
    int x1 = std::clamp(static_cast<int>(std::floor((phi.x() - lo.x() + 1e-6) / index_cell_)), 0, index_w_ - 1);
    int z0 = std::clamp(static_cast<int>(std::floor((plo.y() - lo.y() - 1e-6) / index_cell_)), 0, index_h_ - 1);
    int z1 = std::clamp(static_cast<int>(std::floor((phi.y() - lo.y() + 1e-6) / index_cell_)), 0, index_h_ - 1);
    for (int z = z0; z <= z1; ++z)
      for (int x = x0; x <= x1; ++x) index_[static_cast<std::size_t>(z) * index_w_ + x].push_back(i);
  }
}

std::vector<int> NavMesh::candidates(const Vec2& lo, const Vec2& hi) const {
  std::vector<int> out;
  if (index_.empty()) return out;
  int x0 = static_cast<int>(std::floor((lo.x() - index_origin_.x() - 1e-6) / index_cell_));
  int x1 = static_cast<int>(std::floor((hi.x() - index_origin_.x() + 1e-6) / index_cell_));
  int z0 = static_cast<int>(std::floor((lo.y() - index_origin_.y() - 1e-6) / index_cell_));
  int z1 = static_cast<int>(std::floor((hi.y() - index_origin_.y() + 1e-6) / index_cell_));
  x0 = std::max(x0, 0);
  z0 = std::max(z0, 0);
  x1 = std::min(x1, index_w_ - 1);
  z1 = std::min(z1, index_h_ - 1);
  for (int z = z0; z <= z1; ++z)
    for (int x = x0; x <= x1; ++x) {
      const auto& cell = index_[static_cast<std::size_t>(z) * index_w_ + x];
      out.insert(out.end(), cell.begin(), cell.end());
    }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void NavMesh::build_links() {
  links_.clear();
  const int npolys = static_cast<int>(polygons_.size());
  std::vector<std::vector<NavLink>> per_poly(npolys);

  // Bucket edges by the index cells their bounding box touches.
  std::vector<std::vector<EdgeRef>> buckets(index_.size());
  auto cell_range = [&](const Vec2& a, const Vec2& b, auto&& fn) {
    Vec2 lo = a.cwiseMin(b), hi = a.cwiseMax(b);
    int x0 = std::clamp(static_cast<int>(std::floor((lo.x() - index_origin_.x() - 1e-6) / index_cell_)), 0, index_w_ - 1);
    int x1 = std::clamp(static_cast<int>(std::floor((hi.x() - index_origin_.x() + 1e-6) / index_cell_)), 0, index_w_ - 1);
    int z0 = std::clamp(static_cast<int>(std::floor((lo.y() - index_origin_.y() - 1e-6) / index_cell_)), 0, index_h_ - 1);
    int z1 = std::clamp(static_cast<int>(std::floor((hi.y() - index_origin_.y() + 1e-6) / index_cell_)), 0, index_h_ - 1);
    for (int z = z0; z <= z1; ++z)
      for (int x = x0; x <= x1; ++x) fn(static_cast<std::size_t>(z) * index_w_ + x);
  };
  for (int p = 0; p < npolys; ++p) {
    const auto& vs = polygons_[p].verts;
    for (int e = 0; e < static_cast<int>(vs.size()); ++e) {
      Vec2 a = plan(vertices_[vs[e]]);
      Vec2 b = plan(vertices_[vs[(e + 1) % vs.size()]]);
      cell_range(a, b, [&](std::size_t c) { buckets[c].push_back({p, e}); });
    }
  }

  std::set<std::pair<std::pair<int, int>, std::pair<int, int>>> done;
  for (const auto& bucket : buckets) {
    for (std::size_t i = 0; i < bucket.size(); ++i) {
      for (std::size_t j = i + 1; j < bucket.size(); ++j) {
        EdgeRef e1 = bucket[i], e2 = bucket[j];
        if (e1.poly == e2.poly) continue;
        if (std::make_pair(e1.poly, e1.edge) > std::make_pair(e2.poly, e2.edge)) std::swap(e1, e2);
        auto key = std::make_pair(std::make_pair(e1.poly, e1.edge), std::make_pair(e2.poly, e2.edge));
        if (done.count(key)) continue;
        done.insert(key);

        const auto& v1 = polygons_[e1.poly].verts;
        const auto& v2 = polygons_[e2.poly].verts;
        const Vec3& A3 = vertices_[v1[e1.edge]];
        const Vec3& B3 = vertices_[v1[(e1.edge + 1) % v1.size()]];
        const Vec3& C3 = vertices_[v2[e2.edge]];
        const Vec3& D3 = vertices_[v2[(e2.edge + 1) % v2.size()]];
        Vec2 A = plan(A3), B = plan(B3), C = plan(C3), D = plan(D3);
        Vec2 ab = B - A;
        double len = ab.norm();
        if (len < 1e-9) continue;
        Vec2 dir = ab / len;
        auto off = [&](const Vec2& p) { return std::abs(dir.x() * (p.y() - A.y()) - dir.y() * (p.x() - A.x())); };
        if (off(C) > kCollinearTol || off(D) > kCollinearTol) continue;
        if ((D - C).dot(dir) >= 0.0) continue;  // shared edges run in opposite directions
        double tc = (C - A).dot(dir), td = (D - A).dot(dir);
        double t0 = std::max(0.0, std::min(tc, td));
        double t1 = std::min(len, std::max(tc, td));
        if (t1 - t0 < 1e-5) continue;
        // vertical agreement at both overlap endpoints
        auto y_on = [](const Vec3& p, const Vec3& q, double t, double l) { return p.y() + (q.y() - p.y()) * (t / l); };
        double len2 = (D - C).norm();
        auto y2 = [&](double t) {
          Vec2 pt = A + dir * t;
          double s = (pt - C).norm();
          return y_on(C3, D3, s, len2);
        };
        if (std::abs(y_on(A3, B3, t0, len) - y2(t0)) > max_climb_ + 1e-6) continue;
        if (std::abs(y_on(A3, B3, t1, len) - y2(t1)) > max_climb_ + 1e-6) continue;
        Vec2 p0 = A + dir * t0, p1 = A + dir * t1;
        per_poly[e1.poly].push_back({e1.poly, e1.edge, e2.poly, p0, p1});
        per_poly[e2.poly].push_back({e2.poly, e2.edge, e1.poly, p1, p0});
      }
    }
  }

  link_start_.assign(npolys + 1, 0);
  for (int p = 0; p < npolys; ++p) {
    auto& v = per_poly[p];
    std::sort(v.begin(), v.end(), [](const NavLink& x, const NavLink& y) {
      return std::tie(x.edge, x.neighbor) < std::tie(y.edge, y.neighbor);
    });
    link_start_[p] = links_.size();
    links_.insert(links_.end(), v.begin(), v.end());
  }
  link_start_[npolys] = links_.size();
}

double NavMesh::height_at(int poly, const Vec2& p) const {
  const auto& vs = polygons_[poly].verts;
  const Vec3& o = vertices_[vs[0]];
  double best_score = -std::numeric_limits<double>::max();
  double best_y = o.y();
  for (std::size_t i = 1; i + 1 < vs.size(); ++i) {
    const Vec3& b = vertices_[vs[i]];
    const Vec3& c = vertices_[vs[i + 1]];
    Vec2 a2 = plan(o), b2 = plan(b), c2 = plan(c);
    double d = cross2(a2, b2, c2);
    if (std::abs(d) < 1e-14) continue;
    double w1 = cross2(p, b2, c2) / d;
    double w2 = cross2(a2, p, c2) / d;
    double w3 = 1.0 - w1 - w2;
    double score = std::min({w1, w2, w3});
    if (score > best_score) {
      best_score = score;
      best_y = w1 * o.y() + w2 * b.y() + w3 * c.y();
    }
    if (score >= 0.0) break;
  }
  return best_y;
}

std::optional<int> NavMesh::locate(const Vec3& p, double vertical_tol, bool active_only) const {
  Vec2 q = plan(p);
  std::optional<int> best;
  double best_dy = std::numeric_limits<double>::max();
  for (int poly : candidates(q, q)) {
    if (active_only && !polygon_active(poly)) continue;
    auto pts = plan_polygon(poly);
    if (!point_in_convex(pts, q, 1e-6)) continue;
    double dy = std::abs(height_at(poly, q) - p.y());
    if (dy <= vertical_tol && dy < best_dy) {
      best_dy = dy;
      best = poly;
    }
  }
  return best;
}

std::optional<std::pair<int, Vec3>> NavMesh::closest_point(const Vec3& p, bool active_only) const {
  Vec2 q = plan(p);
  std::optional<std::pair<int, Vec3>> best;
  double best_d = std::numeric_limits<double>::max();
  for (int poly = 0; poly < static_cast<int>(polygons_.size()); ++poly) {
    if (active_only && !polygon_active(poly)) continue;
    auto pts = plan_polygon(poly);
    Vec2 c = q;
    if (!point_in_convex(pts, q, 0.0)) {
      double bd = std::numeric_limits<double>::max();
      for (std::size_t i = 0; i < pts.size(); ++i) {
        Vec2 s = closest_point_on_segment(q, pts[i], pts[(i + 1) % pts.size()]);
        double d = (s - q).squaredNorm();
        if (d < bd) {
          bd = d;
          c = s;
        }
      }
    }
    Vec3 surf(c.x(), height_at(poly, c), c.y());
    double d = (surf - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = std::make_pair(poly, surf);
    }
  }
  return best;
}

std::vector<int> NavMesh::components() const {
  const int n = static_cast<int>(polygons_.size());
  std::vector<int> comp(n, -1);
  int next = 0;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0 || !polygon_active(s)) continue;
    std::vector<int> stack{s};
    comp[s] = next;
    while (!stack.empty()) {
      int p = stack.back();
      stack.pop_back();
      for (const auto& l : links_of(p)) {
        if (comp[l.neighbor] >= 0 || !polygon_active(l.neighbor)) continue;
        comp[l.neighbor] = next;
        stack.push_back(l.neighbor);
      }
    }
    ++next;
  }
  return comp;
}

nlohmann::json NavMesh::to_json() const {
  using nlohmann::json;
  json verts = json::array();
  for (const auto& v : vertices_) verts.push_back({v.x(), v.y(), v.z()});
  json polys = json::array();
  json regions = json::array();
  for (const auto& p : polygons_) {
    polys.push_back(p.verts);
    regions.push_back(p.region);
  }
  json adjacency = json::array();
  std::set<std::tuple<int, int, int>> seen;
  for (const auto& l : links_)
    if (seen.insert({l.poly, l.edge, l.neighbor}).second) adjacency.push_back({l.poly, l.edge, l.neighbor});
  json blockers = json::object();
  for (std::size_t b = 0; b < blocker_ids_.size(); ++b) blockers[blocker_ids_[b]] = blocker_polygons(blocker_ids_[b]);
  return json{{"version", 1},         {"vertices", verts}, {"polygons", polys},
              {"adjacency", adjacency}, {"regions", regions}, {"blockers", blockers}};
}

NavMesh NavMesh::from_json(const nlohmann::json& j, double max_climb) {
  try {
    if (j.at("version").get<int>() != 1) throw Error(Errc::Io, "unsupported navmesh version");
    std::vector<Vec3> verts;
    for (const auto& v : j.at("vertices")) verts.emplace_back(v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>());
    std::vector<NavPolygon> polys;
    const auto& regions = j.at("regions");
    for (std::size_t i = 0; i < j.at("polygons").size(); ++i) {
      NavPolygon p;
      p.verts = j["polygons"][i].get<std::vector<int>>();
      for (int v : p.verts)
        if (v < 0 || v >= static_cast<int>(verts.size())) throw Error(Errc::Io, "vertex index out of range");
      p.region = i < regions.size() ? regions[i].get<int>() : 0;
      polys.push_back(std::move(p));
    }
    std::vector<std::string> ids;
    for (auto it = j.at("blockers").begin(); it != j.at("blockers").end(); ++it) {
      int b = static_cast<int>(ids.size());
      ids.push_back(it.key());
      for (int p : it.value().get<std::vector<int>>()) {
        if (p < 0 || p >= static_cast<int>(polys.size())) throw Error(Errc::Io, "blocker polygon out of range");
        polys[p].blocker = b;
      }
    }
    return NavMesh(std::move(verts), std::move(polys), std::move(ids), max_climb);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Io, std::string("malformed navmesh json: ") + e.what());
  }
}

bool NavMesh::operator==(const NavMesh& o) const {
  if (vertices_ != o.vertices_ || blocker_ids_ != o.blocker_ids_ || blocker_active_ != o.blocker_active_) return false;
  if (polygons_.size() != o.polygons_.size()) return false;
  for (std::size_t i = 0; i < polygons_.size(); ++i) {
    const auto& a = polygons_[i];
    const auto& b = o.polygons_[i];
    if (a.verts != b.verts || a.region != b.region || a.blocker != b.blocker) return false;
  }
  return true;
}

double path_length(std::span<const Vec3> path) {
  double total = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) total += (path[i] - path[i - 1]).norm();
  return total;
}

}  // namespace escroom

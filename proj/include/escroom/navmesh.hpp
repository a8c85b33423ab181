#pragma once

#include "escroom/geometry.hpp"

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace escroom {

struct AgentParams {
  double radius = 0.25;
  double height = 1.6;
  double max_climb = 0.3;
  double max_slope_deg = 45.0;

  void validate() const;  // throws InvalidAgentParams
};

struct BakeSettings {
  double cell_size = 0.1;
  double cell_height = 0.1;
  double edge_error = 0.05;
  int max_verts_per_poly = 6;
  /// Disconnected walkable islands smaller than this are dropped (m^2).
  double min_island_area = 0.04;
};

/// Plan-view footprint registered at bake time and toggled at runtime.
struct BlockerFootprint {
  std::string id;
  std::vector<Vec2> footprint;
};

struct Hole {
  std::vector<Vec2> footprint;  // plan view, simple polygon
  std::string source;
};

/// Shared boundary between two polygons. `a`→`b` runs along `edge` of `poly`
/// in that polygon's winding order.
struct NavLink {
  int poly = -1;
  int edge = -1;
  int neighbor = -1;
  Vec2 a;
  Vec2 b;
};

struct NavPolygon {
  std::vector<int> verts;  // counter-clockwise in (x, z)
  int region = 0;
  int blocker = -1;  // index into blocker_ids(), -1 when none
};

class NavMesh {
 public:
  NavMesh() = default;
  /// Builds adjacency and the spatial index from raw parts.
  NavMesh(std::vector<Vec3> vertices, std::vector<NavPolygon> polygons, std::vector<std::string> blocker_ids,
          double max_climb = 0.3);

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<NavPolygon>& polygons() const { return polygons_; }
  const std::vector<NavLink>& links() const { return links_; }
  std::span<const NavLink> links_of(int poly) const;
  const std::vector<std::string>& blocker_ids() const { return blocker_ids_; }
  std::vector<int> blocker_polygons(std::string_view id) const;
  bool blocker_active(std::string_view id) const;
  double max_climb() const { return max_climb_; }

  bool empty() const { return polygons_.empty(); }
  bool polygon_active(int poly) const;
  std::vector<Vec2> plan_polygon(int poly) const;
  double polygon_area(int poly) const;
  double area(bool active_only = true) const;

  /// Throws UnknownBlocker. Idempotent.
  void set_blocker(std::string_view id, bool active);

  /// Polygon whose plan-view footprint contains `p` with the surface within
  /// `vertical_tol` of p.y; the closest surface wins.
  std::optional<int> locate(const Vec3& p, double vertical_tol, bool active_only = true) const;
  double height_at(int poly, const Vec2& p) const;
  /// Nearest point on the (active) mesh in plan view, preferring surfaces near p.y.
  std::optional<std::pair<int, Vec3>> closest_point(const Vec3& p, bool active_only = true) const;

  /// Connected component label per polygon over active polygons (-1 when inactive).
  std::vector<int> components() const;

  nlohmann::json to_json() const;
  static NavMesh from_json(const nlohmann::json& j, double max_climb = 0.3);

  bool operator==(const NavMesh& other) const;

 private:
  void build_links();
  void build_index();
  std::vector<int> candidates(const Vec2& lo, const Vec2& hi) const;

  std::vector<Vec3> vertices_;
  std::vector<NavPolygon> polygons_;
  std::vector<std::string> blocker_ids_;
  std::vector<bool> blocker_active_;
  std::vector<NavLink> links_;
  std::vector<std::size_t> link_start_;  // per polygon, into links_ (size = polys + 1)
  double max_climb_ = 0.3;

  // uniform plan-view grid of polygon ids
  Vec2 index_origin_ = Vec2::Zero();
  double index_cell_ = 1.0;
  int index_w_ = 0;
  int index_h_ = 0;
  std::vector<std::vector<int>> index_;
};

struct BakeResult {
  NavMesh mesh;
  std::vector<std::string> warnings;
  std::size_t walkable_cells = 0;
};

/// Voxel pipeline: rasterize, slope/clearance/ledge filters, erosion, monotone
/// regions, contour simplification, convex polygons, adjacency.
/// Throws NoWalkableSurface when nothing survives.
BakeResult bake_navmesh(std::span<const Triangle> triangles, const AgentParams& params,
                        const BakeSettings& settings = {}, std::span<const BlockerFootprint> blockers = {});

NavMesh carve_holes(const NavMesh& mesh, std::span<const Hole> holes);

/// Slides `desired` back along prev→desired to the walkable boundary.
/// Throws PrevOffMesh when prev is not on an active polygon.
Vec3 constrain_move(const NavMesh& mesh, const Vec3& prev, const Vec3& desired);

/// A* over polygon adjacency followed by funnel smoothing. nullopt when the
/// endpoints lie in different connected components; PointOffMesh when an
/// endpoint does not snap to an active polygon.
std::optional<std::vector<Vec3>> find_path(const NavMesh& mesh, const Vec3& a, const Vec3& b);

double path_length(std::span<const Vec3> path);

/// Snap tolerance used for path endpoints and spawn points.
inline constexpr double kSnapTolerance = 1e-3;

}  // namespace escroom

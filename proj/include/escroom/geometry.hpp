#pragma once

#include <Eigen/Geometry>

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace escroom {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Transform = Eigen::Affine3d;

struct Triangle {
  std::array<Vec3, 3> v;

  Vec3 normal() const;  // unit normal, zero for degenerate triangles
  double area() const;
};

struct Pose {
  Vec3 position = Vec3::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();

  Transform to_transform() const;
  static Pose from_transform(const Transform& t);
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // normalized
};

/// Plan-view projection (x, z) of a y-up point.
inline Vec2 plan(const Vec3& p) { return {p.x(), p.z()}; }

/// Twice the signed area of (a, b, c); positive when counter-clockwise in (x, z).
inline double cross2(const Vec2& a, const Vec2& b, const Vec2& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

double signed_area(std::span<const Vec2> poly);

/// Inclusive point-in-polygon test in plan view. `eps` widens the boundary.
bool point_in_convex(std::span<const Vec2> poly, const Vec2& p, double eps = 1e-6);
bool point_in_polygon(std::span<const Vec2> poly, const Vec2& p);

Vec2 closest_point_on_segment(const Vec2& p, const Vec2& a, const Vec2& b);

/// Parses A-Frame style "x y z" vectors; returns nullopt on malformed input.
std::optional<Vec3> parse_vec3(std::string_view text);

/// Rotation from A-Frame "x y z" degrees (YXZ intrinsic order).
Eigen::Quaterniond rotation_from_degrees(const Vec3& degrees);

}  // namespace escroom

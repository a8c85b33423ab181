#include "escroom/error.hpp"
#include "escroom/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

namespace escroom {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::UnbalancedTag: return "UnbalancedTag";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::MalformedAttribute: return "MalformedAttribute";
    case Errc::EmptyKey: return "EmptyKey";
    case Errc::InvalidSelector: return "InvalidSelector";
    case Errc::UnknownRoom: return "UnknownRoom";
    case Errc::DuplicateStateName: return "DuplicateStateName";
    case Errc::MissingType: return "MissingType";
    case Errc::InvalidStateName: return "InvalidStateName";
    case Errc::MissingStateKey: return "MissingStateKey";
    case Errc::UnknownStatePath: return "UnknownStatePath";
    case Errc::NoWalkableSurface: return "NoWalkableSurface";
    case Errc::InvalidAgentParams: return "InvalidAgentParams";
    case Errc::PrevOffMesh: return "PrevOffMesh";
    case Errc::PointOffMesh: return "PointOffMesh";
    case Errc::UnknownBlocker: return "UnknownBlocker";
    case Errc::MalformedGltf: return "MalformedGltf";
    case Errc::UnsupportedExtensionRequired: return "UnsupportedExtensionRequired";
    case Errc::UnknownNode: return "UnknownNode";
    case Errc::UnsupportedElement: return "UnsupportedElement";
    case Errc::PanelTooNarrow: return "PanelTooNarrow";
    case Errc::MissingSpawn: return "MissingSpawn";
    case Errc::PuzzleWithoutPosition: return "PuzzleWithoutPosition";
    case Errc::MissingAsset: return "MissingAsset";
    case Errc::InvalidScript: return "InvalidScript";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

namespace {

std::string format_error(Errc code, const std::string& detail, int line) {
  std::string out(to_string(code));
  if (line > 0) out += " (line " + std::to_string(line) + ")";
  if (!detail.empty()) out += ": " + detail;
  return out;
}

}  // namespace

Error::Error(Errc code, std::string detail, int line)
    : std::runtime_error(format_error(code, detail, line)),
      code_(code),
      line_(line),
      detail_(std::move(detail)) {}

Vec3 Triangle::normal() const {
  Vec3 n = (v[1] - v[0]).cross(v[2] - v[0]);
  double len = n.norm();
  if (len < 1e-12) return Vec3::Zero();
  return n / len;
}

double Triangle::area() const { return 0.5 * (v[1] - v[0]).cross(v[2] - v[0]).norm(); }

Transform Pose::to_transform() const {
  Transform t = Transform::Identity();
  t.translate(position);
  t.rotate(orientation);
  return t;
}

Pose Pose::from_transform(const Transform& t) {
  Pose p;
  p.position = t.translation();
  Eigen::Matrix3d rot;
  Eigen::Matrix3d scale;
  t.computeRotationScaling(&rot, &scale);
  p.orientation = Eigen::Quaterniond(rot).normalized();
  return p;
}

double signed_area(std::span<const Vec2> poly) {
  double a = 0.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % n];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

bool point_in_convex(std::span<const Vec2> poly, const Vec2& p, double eps) {
  if (poly.size() < 3) return false;
  const double orient = signed_area(poly) >= 0.0 ? 1.0 : -1.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    Vec2 e = b - a;
    double len = e.norm();
    if (len < 1e-12) continue;
    // signed distance of p from the edge line, positive inside
    double d = orient * (e.x() * (p.y() - a.y()) - e.y() * (p.x() - a.x())) / len;
    if (d < -eps) return false;
  }
  return true;
}

bool point_in_polygon(std::span<const Vec2> poly, const Vec2& p) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      double x = (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x();
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

Vec2 closest_point_on_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  Vec2 ab = b - a;
  double len2 = ab.squaredNorm();
  if (len2 < 1e-24) return a;
  double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return a + t * ab;
}

std::optional<Vec3> parse_vec3(std::string_view text) {
  Vec3 out = Vec3::Zero();
  int count = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == ',')) ++i;
    if (i >= text.size()) break;
    if (count == 3) return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data() + i, text.data() + text.size(), v);
    if (ec != std::errc{}) return std::nullopt;
    out[count++] = v;
    i = static_cast<std::size_t>(ptr - text.data());
  }
  if (count != 3) return std::nullopt;
  return out;
}

Eigen::Quaterniond rotation_from_degrees(const Vec3& degrees) {
  const double k = std::numbers::pi / 180.0;
  Eigen::AngleAxisd ry(degrees.y() * k, Vec3::UnitY());
  Eigen::AngleAxisd rx(degrees.x() * k, Vec3::UnitX());
  Eigen::AngleAxisd rz(degrees.z() * k, Vec3::UnitZ());
  return Eigen::Quaterniond(ry * rx * rz);
}

}  // namespace escroom

#pragma once

#include "escroom/geometry.hpp"
#include "escroom/navmesh.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <queue>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace testsupport {

using escroom::Triangle;
using escroom::Vec2;
using escroom::Vec3;

// Two triangles, wound so the normal points along +y.
inline std::vector<Triangle> plane(double x0, double z0, double x1, double z1, double y = 0.0) {
  Vec3 a(x0, y, z0), b(x0, y, z1), c(x1, y, z1), d(x1, y, z0);
  return {Triangle{{a, b, c}}, Triangle{{a, c, d}}};
}

inline void quad(std::vector<Triangle>& out, const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d,
                 const Vec3& outward) {
  Triangle t1{{a, b, c}}, t2{{a, c, d}};
  if (t1.normal().dot(outward) < 0) {
    std::swap(t1.v[1], t1.v[2]);
    std::swap(t2.v[1], t2.v[2]);
  }
  out.push_back(t1);
  out.push_back(t2);
}

inline std::vector<Triangle> box(const Vec3& lo, const Vec3& hi) {
  std::vector<Triangle> out;
  auto P = [&](int x, int y, int z) { return Vec3(x ? hi.x() : lo.x(), y ? hi.y() : lo.y(), z ? hi.z() : lo.z()); };
  quad(out, P(0, 1, 0), P(1, 1, 0), P(1, 1, 1), P(0, 1, 1), Vec3::UnitY());
  quad(out, P(0, 0, 0), P(1, 0, 0), P(1, 0, 1), P(0, 0, 1), -Vec3::UnitY());
  quad(out, P(0, 0, 0), P(0, 1, 0), P(0, 1, 1), P(0, 0, 1), -Vec3::UnitX());
  quad(out, P(1, 0, 0), P(1, 1, 0), P(1, 1, 1), P(1, 0, 1), Vec3::UnitX());
  quad(out, P(0, 0, 0), P(1, 0, 0), P(1, 1, 0), P(0, 1, 0), -Vec3::UnitZ());
  quad(out, P(0, 0, 1), P(1, 0, 1), P(1, 1, 1), P(0, 1, 1), Vec3::UnitZ());
  return out;
}

inline void append(std::vector<Triangle>& to, const std::vector<Triangle>& from) {
  to.insert(to.end(), from.begin(), from.end());
}

inline std::vector<Vec2> rect(double x0, double z0, double x1, double z1) {
  return {Vec2(x0, z0), Vec2(x1, z0), Vec2(x1, z1), Vec2(x0, z1)};
}

// 10x10 m floor with `boxes` random 1.5 m high obstacles.
inline std::vector<Triangle> random_obstacle_map(std::mt19937& rng, int boxes = 5) {
  std::uniform_real_distribution<double> pos(1, 9), size(0.4, 2.0);
  auto tris = plane(0, 0, 10, 10);
  for (int k = 0; k < boxes; ++k) {
    double x = pos(rng), z = pos(rng);
    double w = size(rng), d = size(rng);
    append(tris, box(Vec3(x, 0, z), Vec3(x + w, 1.5, z + d)));
  }
  return tris;
}

// Monte-Carlo estimate of the active mesh area over a bounding rectangle.
inline double mc_area(const escroom::NavMesh& mesh, double x0, double z0, double x1, double z1, int samples,
                      unsigned seed, double y = 0.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> ux(x0, x1), uz(z0, z1);
  int hits = 0;
  for (int i = 0; i < samples; ++i) {
    if (mesh.locate(Vec3(ux(rng), y, uz(rng)), 0.5)) ++hits;
  }
  return (x1 - x0) * (z1 - z0) * hits / samples;
}

// Shortest path on a fine grid of on-mesh sample points. Moves reach the 32
// nearest lattice directions; every half-step lattice point along a move must
// be on the mesh.
inline std::optional<double> grid_shortest(const escroom::NavMesh& mesh, const Vec3& a, const Vec3& b, double step,
                                           double x0, double z0, double x1, double z1) {
  const int fw = static_cast<int>(std::ceil((x1 - x0) / step)) * 2 + 1;
  const int fh = static_cast<int>(std::ceil((z1 - z0) / step)) * 2 + 1;
  std::vector<char> fine(static_cast<std::size_t>(fw) * fh, 0);
  for (int z = 0; z < fh; ++z)
    for (int x = 0; x < fw; ++x)
      fine[static_cast<std::size_t>(z) * fw + x] =
          mesh.locate(Vec3(x0 + x * step / 2, a.y(), z0 + z * step / 2), 0.5) ? 1 : 0;
  auto fine_ok = [&](int x, int z) {
    return x >= 0 && z >= 0 && x < fw && z < fh && fine[static_cast<std::size_t>(z) * fw + x];
  };
  const int w = (fw + 1) / 2, h = (fh + 1) / 2;
  auto ok = [&](int x, int z) { return fine_ok(2 * x, 2 * z); };
  auto cell = [&](const Vec3& p) {
    return std::make_pair(static_cast<int>(std::lround((p.x() - x0) / step)),
                          static_cast<int>(std::lround((p.z() - z0) / step)));
  };
  auto [sx, sz] = cell(a);
  auto [tx, tz] = cell(b);
  std::vector<std::pair<int, int>> moves;
  for (int dx = -3; dx <= 3; ++dx)
    for (int dz = -3; dz <= 3; ++dz)
      if ((dx || dz) && std::gcd(std::abs(dx), std::abs(dz)) == 1) moves.emplace_back(dx, dz);
  std::vector<double> dist(static_cast<std::size_t>(w) * h, 1e300);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  if (!ok(sx, sz) || !ok(tx, tz)) return std::nullopt;
  dist[static_cast<std::size_t>(sz) * w + sx] = 0;
  open.emplace(0.0, sz * w + sx);
  while (!open.empty()) {
    auto [d, id] = open.top();
    open.pop();
    if (d > dist[id]) continue;
    int x = id % w, z = id / w;
    if (x == tx && z == tz) {
      double tail = (Vec2(x0 + x * step, z0 + z * step) - Vec2(b.x(), b.z())).norm();
      double head = (Vec2(x0 + sx * step, z0 + sz * step) - Vec2(a.x(), a.z())).norm();
      return d + tail + head;
    }
    for (auto [dx, dz] : moves) {
      int nx = x + dx, nz = z + dz;
      if (!ok(nx, nz)) continue;
      int n = std::max(std::abs(dx), std::abs(dz)) * 4;
      bool clear = true;
      for (int k = 1; k < n && clear; ++k) {
        double fx = 2.0 * x + 2.0 * dx * k / n, fz = 2.0 * z + 2.0 * dz * k / n;
        clear = fine_ok(static_cast<int>(std::floor(fx)), static_cast<int>(std::floor(fz))) &&
                fine_ok(static_cast<int>(std::ceil(fx)), static_cast<int>(std::ceil(fz)));
      }
      if (!clear) continue;
      double nd = d + std::hypot(dx, dz) * step;
      int nid = nz * w + nx;
      if (nd < dist[nid]) {
        dist[nid] = nd;
        open.emplace(nd, nid);
      }
    }
  }
  return std::nullopt;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace testsupport

#include "escroom/error.hpp"
#include "escroom/navmesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <tuple>

namespace escroom {

namespace {

constexpr int kOpen = std::numeric_limits<int>::max() / 4;
constexpr int kDx[4] = {-1, 0, 1, 0};
constexpr int kDz[4] = {0, 1, 0, -1};
constexpr int kNullNeighbor = -2;

struct Span {
  int smin;
  int smax;
  bool walkable;
  double surface;  // world y of the walkable top
};

struct Heightfield {
  int w = 0;
  int h = 0;
  Vec3 bmin;
  double cs = 0.1;
  double ch = 0.1;
  std::vector<std::vector<Span>> cols;

  std::vector<Span>& col(int x, int z) { return cols[static_cast<std::size_t>(z) * w + x]; }
};

struct Cell {
  int x, z;
  int y;    // floor, in cell units
  int top;  // ceiling, in cell units
  double surface;
  int con[4] = {-1, -1, -1, -1};
  int area = 1;  // 0 null, 1 walkable, 2+k blocker k
  int reg = 0;
};

struct Compact {
  int w = 0;
  int h = 0;
  std::vector<Cell> cells;
  std::vector<std::pair<int, int>> columns;  // (first, count) per column

  const std::pair<int, int>& column(int x, int z) const { return columns[static_cast<std::size_t>(z) * w + x]; }
};

int cells_floor(double v) { return static_cast<int>(std::floor(v + 1e-9)); }
int cells_ceil(double v) { return static_cast<int>(std::ceil(v - 1e-9)); }

void add_span(std::vector<Span>& col, Span s, int merge_thr) {
  std::vector<Span> out;
  out.reserve(col.size() + 1);
  for (const Span& c : col) {
    if (c.smin > s.smax || c.smax < s.smin) {
      out.push_back(c);
      continue;
    }
    int top = std::max(s.smax, c.smax);
    bool sw = s.walkable && top - s.smax <= merge_thr;
    bool cw = c.walkable && top - c.smax <= merge_thr;
    double surface;
    if (sw && cw) surface = std::max(s.surface, c.surface);
    else if (sw) surface = s.surface;
    else if (cw) surface = c.surface;
    else surface = c.smax > s.smax ? c.surface : s.surface;
    s.smin = std::min(s.smin, c.smin);
    s.smax = top;
    s.walkable = sw || cw;
    s.surface = surface;
  }
  auto pos = std::lower_bound(out.begin(), out.end(), s, [](const Span& a, const Span& b) { return a.smin < b.smin; });
  out.insert(pos, s);
  col = std::move(out);
}

using Poly3 = std::vector<Vec3>;

void divide(const Poly3& in, double offset, int axis, Poly3& below, Poly3& above) {
  below.clear();
  above.clear();
  const std::size_t n = in.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = offset - in[i][axis];
  for (std::size_t i = 0, j = n - 1; i < n; j = i, ++i) {
    bool ina = d[j] >= 0.0;
    bool inb = d[i] >= 0.0;
    if (ina != inb) {
      double s = d[j] / (d[j] - d[i]);
      Vec3 p = in[j] + (in[i] - in[j]) * s;
      below.push_back(p);
      above.push_back(p);
    }
    if (d[i] > 0.0) {
      below.push_back(in[i]);
    } else if (d[i] < 0.0) {
      above.push_back(in[i]);
    } else {
      below.push_back(in[i]);
      above.push_back(in[i]);
    }
  }
}

void rasterize(Heightfield& hf, const Triangle& tri, bool walkable, int merge_thr) {
  Vec3 tmin = tri.v[0].cwiseMin(tri.v[1]).cwiseMin(tri.v[2]);
  Vec3 tmax = tri.v[0].cwiseMax(tri.v[1]).cwiseMax(tri.v[2]);
  int z0 = std::clamp(static_cast<int>(std::floor((tmin.z() - hf.bmin.z()) / hf.cs)), 0, hf.h - 1);
  int z1 = std::clamp(static_cast<int>(std::floor((tmax.z() - hf.bmin.z()) / hf.cs)), 0, hf.h - 1);
  Poly3 in{tri.v[0], tri.v[1], tri.v[2]};
  Poly3 row, rest, cell, row_rest;
  for (int z = z0; z <= z1; ++z) {
    double cz = hf.bmin.z() + (z + 1) * hf.cs;
    divide(in, cz, 2, row, rest);
    std::swap(in, rest);
    if (row.size() < 3) continue;
    double minx = row[0].x(), maxx = row[0].x();
    for (const auto& p : row) {
      minx = std::min(minx, p.x());
      maxx = std::max(maxx, p.x());
    }
    int x0 = std::clamp(static_cast<int>(std::floor((minx - hf.bmin.x()) / hf.cs)), 0, hf.w - 1);
    int x1 = std::clamp(static_cast<int>(std::floor((maxx - hf.bmin.x()) / hf.cs)), 0, hf.w - 1);
    for (int x = x0; x <= x1; ++x) {
      double cx = hf.bmin.x() + (x + 1) * hf.cs;
      divide(row, cx, 0, cell, row_rest);
      std::swap(row, row_rest);
      if (cell.size() < 3) continue;
      double ymin = cell[0].y(), ymax = cell[0].y();
      for (const auto& p : cell) {
        ymin = std::min(ymin, p.y());
        ymax = std::max(ymax, p.y());
      }
      int smin = std::max(0, static_cast<int>(std::floor((ymin - hf.bmin.y()) / hf.ch)));
      int smax = std::max(smin + 1, static_cast<int>(std::ceil((ymax - hf.bmin.y()) / hf.ch)));
      add_span(hf.col(x, z), Span{smin, smax, walkable, ymax}, merge_thr);
    }
  }
}

// Marks unwalkable spans walkable when they sit at most `climb` above a
// walkable span in the same column (curbs, stair nosings).
void filter_low_hanging(Heightfield& hf, int climb) {
  for (auto& col : hf.cols) {
    bool prev_walkable = false;
    int prev_top = 0;
    for (auto& s : col) {
      bool was = s.walkable;
      if (!s.walkable && prev_walkable && s.smax - prev_top <= climb) s.walkable = true;
      prev_walkable = was;
      prev_top = s.smax;
    }
  }
}

// Neighbours outside the grid or with empty columns carry no information;
// the erosion step already keeps the agent away from those borders.
void filter_ledges(Heightfield& hf, int climb, int height) {
  std::vector<std::vector<bool>> ledge(hf.cols.size());
  for (int z = 0; z < hf.h; ++z) {
    for (int x = 0; x < hf.w; ++x) {
      auto& col = hf.col(x, z);
      auto& marks = ledge[static_cast<std::size_t>(z) * hf.w + x];
      marks.assign(col.size(), false);
      for (std::size_t si = 0; si < col.size(); ++si) {
        const Span& s = col[si];
        if (!s.walkable) continue;
        int bot = s.smax;
        int top = si + 1 < col.size() ? col[si + 1].smin : kOpen;
        int minh = kOpen;
        int asmin = bot, asmax = bot;
        for (int dir = 0; dir < 4; ++dir) {
          int nx = x + kDx[dir], nz = z + kDz[dir];
          if (nx < 0 || nz < 0 || nx >= hf.w || nz >= hf.h) continue;
          const auto& ncol = hf.col(nx, nz);
          if (ncol.empty()) continue;
          {
            int nbot = -climb;
            int ntop = ncol.front().smin;
            if (std::min(top, ntop) - std::max(bot, nbot) > height) minh = std::min(minh, nbot - bot);
          }
          for (std::size_t ni = 0; ni < ncol.size(); ++ni) {
            int nbot = ncol[ni].smax;
            int ntop = ni + 1 < ncol.size() ? ncol[ni + 1].smin : kOpen;
            if (std::min(top, ntop) - std::max(bot, nbot) > height) {
              minh = std::min(minh, nbot - bot);
              if (std::abs(nbot - bot) <= climb) {
                asmin = std::min(asmin, nbot);
                asmax = std::max(asmax, nbot);
              }
            }
          }
        }
        if (minh < -climb || asmax - asmin > climb) marks[si] = true;
      }
    }
  }
  for (std::size_t c = 0; c < hf.cols.size(); ++c)
    for (std::size_t si = 0; si < hf.cols[c].size(); ++si)
      if (ledge[c][si]) hf.cols[c][si].walkable = false;
}

void filter_low_clearance(Heightfield& hf, int height) {
  for (auto& col : hf.cols) {
    for (std::size_t si = 0; si < col.size(); ++si) {
      int top = si + 1 < col.size() ? col[si + 1].smin : kOpen;
      if (top - col[si].smax < height) col[si].walkable = false;
    }
  }
}

Compact build_compact(Heightfield& hf, int climb, int height) {
  Compact chf;
  chf.w = hf.w;
  chf.h = hf.h;
  chf.columns.assign(hf.cols.size(), {0, 0});
  for (int z = 0; z < hf.h; ++z) {
    for (int x = 0; x < hf.w; ++x) {
      const auto& col = hf.col(x, z);
      int first = static_cast<int>(chf.cells.size());
      for (std::size_t si = 0; si < col.size(); ++si) {
        if (!col[si].walkable) continue;
        Cell c;
        c.x = x;
        c.z = z;
        c.y = col[si].smax;
        c.top = si + 1 < col.size() ? col[si + 1].smin : kOpen;
        c.surface = col[si].surface;
        chf.cells.push_back(c);
      }
      chf.columns[static_cast<std::size_t>(z) * hf.w + x] = {first, static_cast<int>(chf.cells.size()) - first};
    }
  }
  for (auto& c : chf.cells) {
    for (int dir = 0; dir < 4; ++dir) {
      int nx = c.x + kDx[dir], nz = c.z + kDz[dir];
      if (nx < 0 || nz < 0 || nx >= chf.w || nz >= chf.h) continue;
      auto [first, count] = chf.column(nx, nz);
      for (int k = first; k < first + count; ++k) {
        const Cell& n = chf.cells[k];
        int bot = std::max(c.y, n.y);
        int top = std::min(c.top, n.top);
        if (top - bot >= height && std::abs(n.y - c.y) <= climb) {
          c.con[dir] = k;
          break;
        }
      }
    }
  }
  return chf;
}

void erode(Compact& chf, int radius_cells) {
  const int n = static_cast<int>(chf.cells.size());
  std::vector<int> dist(n, 255);
  for (int i = 0; i < n; ++i) {
    const Cell& c = chf.cells[i];
    int connected = 0;
    for (int dir = 0; dir < 4; ++dir)
      if (c.con[dir] >= 0 && chf.cells[c.con[dir]].area != 0) ++connected;
    if (c.area == 0 || connected != 4) dist[i] = 0;
  }
  auto relax = [&](int i, int via, int cost) {
    if (via >= 0) dist[i] = std::min(dist[i], dist[via] + cost);
  };
  for (int z = 0; z < chf.h; ++z) {
    for (int x = 0; x < chf.w; ++x) {
      auto [first, count] = chf.column(x, z);
      for (int i = first; i < first + count; ++i) {
        const Cell& c = chf.cells[i];
        if (c.con[0] >= 0) {
          relax(i, c.con[0], 2);
          relax(i, chf.cells[c.con[0]].con[3], 3);
        }
        if (c.con[3] >= 0) {
          relax(i, c.con[3], 2);
          relax(i, chf.cells[c.con[3]].con[2], 3);
        }
      }
    }
  }
  for (int z = chf.h - 1; z >= 0; --z) {
    for (int x = chf.w - 1; x >= 0; --x) {
      auto [first, count] = chf.column(x, z);
      for (int i = first; i < first + count; ++i) {
        const Cell& c = chf.cells[i];
        if (c.con[2] >= 0) {
          relax(i, c.con[2], 2);
          relax(i, chf.cells[c.con[2]].con[1], 3);
        }
        if (c.con[1] >= 0) {
          relax(i, c.con[1], 2);
          relax(i, chf.cells[c.con[1]].con[0], 3);
        }
      }
    }
  }
  const int thr = radius_cells * 2;
  for (int i = 0; i < n; ++i)
    if (dist[i] < thr) chf.cells[i].area = 0;
}

std::size_t drop_small_islands(Compact& chf, std::size_t min_cells) {
  const int n = static_cast<int>(chf.cells.size());
  std::vector<int> comp(n, -1);
  std::size_t remaining = 0;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0 || chf.cells[s].area == 0) continue;
    std::vector<int> members{s};
    comp[s] = s;
    for (std::size_t k = 0; k < members.size(); ++k) {
      const Cell& c = chf.cells[members[k]];
      for (int dir = 0; dir < 4; ++dir) {
        int ni = c.con[dir];
        if (ni < 0 || comp[ni] >= 0 || chf.cells[ni].area == 0) continue;
        comp[ni] = s;
        members.push_back(ni);
      }
    }
    if (members.size() < min_cells) {
      for (int m : members) chf.cells[m].area = 0;
    } else {
      remaining += members.size();
    }
  }
  return remaining;
}

// Row sweeps: a run keeps the region above it when it is that region's only
// continuation in the row, otherwise it opens a new region.
int build_regions_monotone(Compact& chf, double max_step) {
  auto joins = [&](const Cell& a, const Cell& b) {
    return a.area == b.area && std::abs(a.surface - b.surface) <= max_step;
  };
  const int n = static_cast<int>(chf.cells.size());
  std::vector<int> src(n, 0);
  struct Sweep {
    int rid = 0;
    int id = 0;
    int ns = 0;
    int nei = 0;
  };
  std::vector<Sweep> sweeps(static_cast<std::size_t>(chf.w) * 4 + 8);
  std::vector<int> prev(16, 0);
  int id = 1;
  for (int z = 0; z < chf.h; ++z) {
    int rid = 1;
    std::fill(prev.begin(), prev.end(), 0);
    for (int x = 0; x < chf.w; ++x) {
      auto [first, count] = chf.column(x, z);
      for (int i = first; i < first + count; ++i) {
        const Cell& c = chf.cells[i];
        if (c.area == 0) continue;
        int previd = 0;
        if (c.con[0] >= 0) {
          int ai = c.con[0];
          if (joins(chf.cells[ai], c) && src[ai] > 0) previd = src[ai];
        }
        if (!previd) {
          previd = rid++;
          if (static_cast<std::size_t>(previd) >= sweeps.size()) sweeps.resize(sweeps.size() * 2);
          sweeps[previd] = Sweep{previd, 0, 0, 0};
        }
        src[i] = previd;
        if (c.con[3] >= 0) {
          int ai = c.con[3];
          if (src[ai] > 0 && joins(chf.cells[ai], c)) {
            int nr = src[ai];
            Sweep& sw = sweeps[previd];
            if (sw.nei == 0 || sw.nei == nr) {
              sw.nei = nr;
              sw.ns++;
              if (static_cast<std::size_t>(nr) >= prev.size()) prev.resize(nr * 2 + 1, 0);
              prev[nr]++;
            } else {
              sw.nei = kNullNeighbor;
            }
          }
        }
      }
    }
    for (int i = 1; i < rid; ++i) {
      Sweep& sw = sweeps[i];
      if (sw.nei > 0 && static_cast<std::size_t>(sw.nei) < prev.size() && prev[sw.nei] == sw.ns) {
        sw.id = sw.nei;
      } else {
        sw.id = id++;
      }
    }
    if (static_cast<std::size_t>(id) >= prev.size()) prev.resize(id * 2 + 1, 0);
    for (int x = 0; x < chf.w; ++x) {
      auto [first, count] = chf.column(x, z);
      for (int i = first; i < first + count; ++i)
        if (src[i] > 0 && src[i] < rid) src[i] = sweeps[src[i]].id;
    }
  }
  for (int i = 0; i < n; ++i) chf.cells[i].reg = src[i];
  return id - 1;
}

struct RawPoint {
  int x, z;
  double y;
  int reg;  // region across the edge ending at this point, 0 for walls
  bool area_border;
};

double corner_height(const Compact& chf, int i, int dir) {
  const Cell& c = chf.cells[i];
  double h = c.surface;
  auto take = [&](int k) {
    if (k >= 0 && chf.cells[k].reg == c.reg && chf.cells[k].area != 0) h = std::max(h, chf.cells[k].surface);
  };
  int dirp = (dir + 1) & 3;
  if (c.con[dir] >= 0) {
    take(c.con[dir]);
    take(chf.cells[c.con[dir]].con[dirp]);
  }
  if (c.con[dirp] >= 0) {
    take(c.con[dirp]);
    take(chf.cells[c.con[dirp]].con[dir]);
  }
  return h;
}

std::vector<RawPoint> walk_contour(const Compact& chf, int i, std::vector<std::uint8_t>& flags) {
  std::vector<RawPoint> pts;
  int dir = 0;
  while (!(flags[i] & (1 << dir))) ++dir;
  const int start_dir = dir;
  const int start_i = i;
  const int area = chf.cells[i].area;
  for (int iter = 0; iter < 400000; ++iter) {
    const Cell& c = chf.cells[i];
    if (flags[i] & (1 << dir)) {
      int px = c.x, pz = c.z;
      switch (dir) {
        case 0: pz += 1; break;
        case 1: px += 1; pz += 1; break;
        case 2: px += 1; break;
        default: break;
      }
      int r = 0;
      bool border = false;
      if (c.con[dir] >= 0) {
        const Cell& nb = chf.cells[c.con[dir]];
        r = nb.area != 0 ? nb.reg : 0;
        border = nb.area != 0 && nb.area != area;
      }
      pts.push_back({px, pz, corner_height(chf, i, dir), r, border});
      flags[i] &= static_cast<std::uint8_t>(~(1 << dir));
      dir = (dir + 1) & 3;
    } else {
      i = c.con[dir];
      dir = (dir + 3) & 3;
    }
    if (i == start_i && dir == start_dir) break;
  }
  return pts;
}

double dist_pt_seg_sq(double x, double z, double px, double pz, double qx, double qz) {
  double dx = qx - px, dz = qz - pz;
  double d = dx * dx + dz * dz;
  double t = d > 0 ? ((x - px) * dx + (z - pz) * dz) / d : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  dx = px + t * dx - x;
  dz = pz + t * dz - z;
  return dx * dx + dz * dz;
}

// Returns indices into `raw` of the simplified outline.
std::vector<int> simplify_contour(const std::vector<RawPoint>& raw, double max_error) {
  const int pn = static_cast<int>(raw.size());
  std::vector<int> simp;
  bool has_connections = false;
  for (const auto& p : raw)
    if (p.reg != 0) has_connections = true;
  if (has_connections) {
    for (int i = 0; i < pn; ++i) {
      int ii = (i + 1) % pn;
      if (raw[i].reg != raw[ii].reg || raw[i].area_border != raw[ii].area_border) simp.push_back(i);
    }
  }
  if (simp.empty()) {
    int ll = 0, ur = 0;
    for (int i = 1; i < pn; ++i) {
      const auto& p = raw[i];
      if (p.x < raw[ll].x || (p.x == raw[ll].x && p.z < raw[ll].z)) ll = i;
      if (p.x > raw[ur].x || (p.x == raw[ur].x && p.z > raw[ur].z)) ur = i;
    }
    simp.push_back(ll);
    if (ur != ll) simp.push_back(ur);
    std::sort(simp.begin(), simp.end());
  }
  const double max_sq = max_error * max_error;
  for (std::size_t i = 0; i < simp.size();) {
    std::size_t ii = (i + 1) % simp.size();
    int ai = simp[i], bi = simp[ii];
    int ax = raw[ai].x, az = raw[ai].z, bx = raw[bi].x, bz = raw[bi].z;
    int ci, cinc, endi;
    if (bx > ax || (bx == ax && bz > az)) {
      cinc = 1;
      ci = (ai + cinc) % pn;
      endi = bi;
    } else {
      cinc = pn - 1;
      ci = (bi + cinc) % pn;
      endi = ai;
      std::swap(ax, bx);
      std::swap(az, bz);
    }
    double maxd = 0.0;
    int maxi = -1;
    if (raw[ci].reg == 0 || raw[ci].area_border) {
      while (ci != endi) {
        double d = dist_pt_seg_sq(raw[ci].x, raw[ci].z, ax, az, bx, bz);
        if (d > maxd) {
          maxd = d;
          maxi = ci;
        }
        ci = (ci + cinc) % pn;
      }
    }
    if (maxi != -1 && maxd > max_sq) {
      simp.insert(simp.begin() + static_cast<std::ptrdiff_t>(i) + 1, maxi);
    } else {
      ++i;
    }
  }
  // drop zero-length segments
  std::vector<int> out;
  for (int idx : simp) {
    if (!out.empty() && raw[out.back()].x == raw[idx].x && raw[out.back()].z == raw[idx].z) continue;
    out.push_back(idx);
  }
  while (out.size() > 1 && raw[out.front()].x == raw[out.back()].x && raw[out.front()].z == raw[out.back()].z)
    out.pop_back();
  return out;
}

struct IPt {
  std::int64_t x, z;
};

std::int64_t icross(const IPt& a, const IPt& b, const IPt& c) {
  return (b.x - a.x) * (c.z - a.z) - (b.z - a.z) * (c.x - a.x);
}

bool same(const IPt& a, const IPt& b) { return a.x == b.x && a.z == b.z; }

// Ear clipping on exact integer coordinates, counter-clockwise input.
// Returns triangles as indices into `pts`; empty when the outline is not simple.
std::vector<std::array<int, 3>> triangulate(const std::vector<IPt>& pts) {
  std::vector<int> idx(pts.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::vector<std::array<int, 3>> tris;
  while (idx.size() > 3) {
    const std::size_t n = idx.size();
    int best = -1;
    std::int64_t best_len = std::numeric_limits<std::int64_t>::max();
    for (std::size_t k = 0; k < n; ++k) {
      const IPt& p = pts[idx[(k + n - 1) % n]];
      const IPt& c = pts[idx[k]];
      const IPt& q = pts[idx[(k + 1) % n]];
      if (icross(p, c, q) <= 0) continue;
      bool blocked = false;
      for (std::size_t m = 0; m < n && !blocked; ++m) {
        const IPt& v = pts[idx[m]];
        if (same(v, p) || same(v, c) || same(v, q)) continue;
        if (icross(p, c, v) >= 0 && icross(c, q, v) >= 0 && icross(q, p, v) >= 0) blocked = true;
      }
      if (blocked) continue;
      std::int64_t len = (q.x - p.x) * (q.x - p.x) + (q.z - p.z) * (q.z - p.z);
      if (len < best_len) {
        best_len = len;
        best = static_cast<int>(k);
      }
    }
    if (best < 0) {
      // collinear leftovers carry no area
      bool removed = false;
      for (std::size_t k = 0; k < n; ++k) {
        if (icross(pts[idx[(k + n - 1) % n]], pts[idx[k]], pts[idx[(k + 1) % n]]) == 0) {
          idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(k));
          removed = true;
          break;
        }
      }
      if (!removed) return {};
      continue;
    }
    tris.push_back({idx[(best + n - 1) % n], idx[best], idx[(best + 1) % n]});
    idx.erase(idx.begin() + best);
  }
  if (idx.size() == 3 && icross(pts[idx[0]], pts[idx[1]], pts[idx[2]]) > 0) tris.push_back({idx[0], idx[1], idx[2]});
  return tris;
}

bool planar(const std::vector<int>& poly, const std::vector<IPt>& pts, const std::vector<double>& heights, double cs) {
  const IPt& o = pts[poly[0]];
  for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
    const IPt& a = pts[poly[i]];
    const IPt& b = pts[poly[i + 1]];
    Vec3 u(cs * static_cast<double>(a.x - o.x), heights[poly[i]] - heights[poly[0]], cs * static_cast<double>(a.z - o.z));
    Vec3 v(cs * static_cast<double>(b.x - o.x), heights[poly[i + 1]] - heights[poly[0]],
           cs * static_cast<double>(b.z - o.z));
    Vec3 n = u.cross(v);
    if (n.norm() < 1e-12) continue;
    n.normalize();
    for (int k : poly) {
      const IPt& q = pts[k];
      Vec3 w(cs * static_cast<double>(q.x - o.x), heights[k] - heights[poly[0]], cs * static_cast<double>(q.z - o.z));
      if (std::abs(n.dot(w)) > 1e-4) return false;
    }
    return true;
  }
  return true;
}

bool strictly_convex(const std::vector<int>& poly, const std::vector<IPt>& pts) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i)
    if (icross(pts[poly[(i + n - 1) % n]], pts[poly[i]], pts[poly[(i + 1) % n]]) <= 0) return false;
  return true;
}

// Greedy merge of adjacent polygons, longest shared edge first.
std::vector<std::vector<int>> merge_convex(const std::vector<std::array<int, 3>>& tris, const std::vector<IPt>& pts,
                                           const std::vector<double>& heights, double cs, int nvp) {
  std::vector<std::vector<int>> polys;
  for (const auto& t : tris) polys.push_back({t[0], t[1], t[2]});
  for (;;) {
    std::int64_t best_len = -1;
    std::size_t bi = 0, bj = 0;
    std::vector<int> best_poly;
    for (std::size_t i = 0; i < polys.size(); ++i) {
      for (std::size_t j = i + 1; j < polys.size(); ++j) {
        const auto& a = polys[i];
        const auto& b = polys[j];
        if (static_cast<int>(a.size() + b.size()) - 2 > nvp) continue;
        for (std::size_t ea = 0; ea < a.size(); ++ea) {
          int u = a[ea], v = a[(ea + 1) % a.size()];
          for (std::size_t eb = 0; eb < b.size(); ++eb) {
            if (b[eb] != v || b[(eb + 1) % b.size()] != u) continue;
            std::int64_t len = (pts[v].x - pts[u].x) * (pts[v].x - pts[u].x) + (pts[v].z - pts[u].z) * (pts[v].z - pts[u].z);
            if (len <= best_len) continue;
            std::vector<int> merged;
            for (std::size_t k = 0; k < a.size() - 1; ++k) merged.push_back(a[(ea + 1 + k) % a.size()]);
            for (std::size_t k = 0; k < b.size() - 1; ++k) merged.push_back(b[(eb + 1 + k) % b.size()]);
            if (!strictly_convex(merged, pts) || !planar(merged, pts, heights, cs)) continue;
            best_len = len;
            bi = i;
            bj = j;
            best_poly = std::move(merged);
          }
        }
      }
    }
    if (best_len < 0) break;
    polys[bi] = std::move(best_poly);
    polys.erase(polys.begin() + static_cast<std::ptrdiff_t>(bj));
  }
  return polys;
}

// Walkable source triangles bucketed in plan view for exact height sampling.
class SurfaceSampler {
 public:
  SurfaceSampler(std::span<const Triangle> tris, double cos_slope) {
    for (const auto& t : tris)
      if (t.normal().y() >= cos_slope) tris_.push_back(&t);
    if (tris_.empty()) return;
    Vec2 lo(std::numeric_limits<double>::max(), std::numeric_limits<double>::max());
    Vec2 hi = -lo;
    for (const auto* t : tris_)
      for (const auto& v : t->v) {
        lo = lo.cwiseMin(plan(v));
        hi = hi.cwiseMax(plan(v));
      }
    origin_ = lo;
    w_ = static_cast<int>((hi.x() - lo.x()) / cell_) + 1;
    h_ = static_cast<int>((hi.y() - lo.y()) / cell_) + 1;
    grid_.resize(static_cast<std::size_t>(w_) * h_);
    for (int k = 0; k < static_cast<int>(tris_.size()); ++k) {
      Vec2 tlo = plan(tris_[k]->v[0]).cwiseMin(plan(tris_[k]->v[1])).cwiseMin(plan(tris_[k]->v[2]));
      Vec2 thi = plan(tris_[k]->v[0]).cwiseMax(plan(tris_[k]->v[1])).cwiseMax(plan(tris_[k]->v[2]));
      for (int z = cell_index(tlo.y() - 1e-6, origin_.y(), h_); z <= cell_index(thi.y() + 1e-6, origin_.y(), h_); ++z)
        for (int x = cell_index(tlo.x() - 1e-6, origin_.x(), w_); x <= cell_index(thi.x() + 1e-6, origin_.x(), w_); ++x)
          grid_[static_cast<std::size_t>(z) * w_ + x].push_back(k);
    }
  }

  double sample(double x, double z, double ref, double tol) const {
    if (tris_.empty()) return ref;
    Vec2 p(x, z);
    int gx = cell_index(x, origin_.x(), w_), gz = cell_index(z, origin_.y(), h_);
    double best = ref;
    double best_d = tol;
    for (int k : grid_[static_cast<std::size_t>(gz) * w_ + gx]) {
      const Triangle& t = *tris_[k];
      Vec2 a = plan(t.v[0]), b = plan(t.v[1]), c = plan(t.v[2]);
      double d = cross2(a, b, c);
      if (std::abs(d) < 1e-14) continue;
      double w1 = cross2(p, b, c) / d, w2 = cross2(a, p, c) / d, w3 = 1.0 - w1 - w2;
      if (w1 < -1e-9 || w2 < -1e-9 || w3 < -1e-9) continue;
      double y = w1 * t.v[0].y() + w2 * t.v[1].y() + w3 * t.v[2].y();
      if (std::abs(y - ref) <= best_d) {
        best_d = std::abs(y - ref);
        best = y;
      }
    }
    return best;
  }

 private:
  int cell_index(double v, double o, int n) const {
    return std::clamp(static_cast<int>(std::floor((v - o) / cell_)), 0, n - 1);
  }

  std::vector<const Triangle*> tris_;
  Vec2 origin_ = Vec2::Zero();
  double cell_ = 1.0;
  int w_ = 0;
  int h_ = 0;
  std::vector<std::vector<int>> grid_;
};

}  // namespace

BakeResult bake_navmesh(std::span<const Triangle> triangles, const AgentParams& params, const BakeSettings& settings,
                        std::span<const BlockerFootprint> blockers) {
  params.validate();
  if (!(settings.cell_size > 0) || !(settings.cell_height > 0) || !(settings.edge_error >= 0) ||
      settings.max_verts_per_poly < 3)
    throw Error(Errc::InvalidAgentParams, "invalid bake settings");
  BakeResult result;

  std::vector<Triangle> tris;
  std::size_t degenerate = 0;
  for (const auto& t : triangles) {
    bool finite = true;
    for (const auto& v : t.v) finite = finite && v.allFinite();
    if (!finite || t.area() < 1e-12) {
      ++degenerate;
      continue;
    }
    tris.push_back(t);
  }
  if (degenerate > 0) result.warnings.push_back("DegenerateTriangles(" + std::to_string(degenerate) + ")");
  if (tris.empty()) throw Error(Errc::NoWalkableSurface, "no usable triangles");

  const double cs = settings.cell_size, ch = settings.cell_height;
  const double cos_slope = std::cos(params.max_slope_deg * std::numbers::pi / 180.0);
  const int climb = cells_floor(params.max_climb / ch);
  const int height = cells_ceil(params.height / ch);
  const int radius = cells_ceil(params.radius / cs);

  Heightfield hf;
  hf.cs = cs;
  hf.ch = ch;
  Vec3 bmin = tris[0].v[0], bmax = tris[0].v[0];
  for (const auto& t : tris)
    for (const auto& v : t.v) {
      bmin = bmin.cwiseMin(v);
      bmax = bmax.cwiseMax(v);
    }
  hf.bmin = bmin;
  hf.w = std::max(1, cells_ceil((bmax.x() - bmin.x()) / cs));
  hf.h = std::max(1, cells_ceil((bmax.z() - bmin.z()) / cs));
  hf.cols.resize(static_cast<std::size_t>(hf.w) * hf.h);

  bool any_walkable = false;
  for (const auto& t : tris) {
    bool walkable = t.normal().y() >= cos_slope;
    any_walkable = any_walkable || walkable;
    rasterize(hf, t, walkable, climb);
  }
  if (!any_walkable) throw Error(Errc::NoWalkableSurface, "every triangle exceeds the slope limit");

  filter_low_hanging(hf, climb);
  filter_ledges(hf, climb, height);
  filter_low_clearance(hf, height);

  Compact chf = build_compact(hf, climb, height);
  erode(chf, radius);

  std::vector<std::string> ids;
  for (const auto& b : blockers) ids.push_back(b.id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<std::size_t> blocker_cells(ids.size(), 0);
  for (const auto& b : blockers) {
    if (b.footprint.size() < 3) continue;
    int bi = static_cast<int>(std::lower_bound(ids.begin(), ids.end(), b.id) - ids.begin());
    for (auto& c : chf.cells) {
      if (c.area == 0) continue;
      Vec2 center(bmin.x() + (c.x + 0.5) * cs, bmin.z() + (c.z + 0.5) * cs);
      if (point_in_polygon(b.footprint, center)) c.area = 2 + bi;
    }
  }
  for (const auto& c : chf.cells)
    if (c.area >= 2) ++blocker_cells[c.area - 2];

  std::size_t min_cells = static_cast<std::size_t>(std::ceil(settings.min_island_area / (cs * cs) - 1e-9));
  result.walkable_cells = drop_small_islands(chf, min_cells);
  if (result.walkable_cells == 0) throw Error(Errc::NoWalkableSurface, "no walkable cells after filtering");
  for (std::size_t b = 0; b < ids.size(); ++b)
    if (blocker_cells[b] == 0) result.warnings.push_back("blocker '" + ids[b] + "' covers no walkable cells");

  // A surface jump steeper than the slope limit between neighbours is a step,
  // and steps separate regions so polygons stay planar.
  build_regions_monotone(chf, cs * std::tan(params.max_slope_deg * std::numbers::pi / 180.0) + 1e-6);

  const int n = static_cast<int>(chf.cells.size());
  std::vector<std::uint8_t> flags(n, 0);
  for (int i = 0; i < n; ++i) {
    const Cell& c = chf.cells[i];
    if (c.area == 0 || c.reg == 0) continue;
    std::uint8_t same = 0;
    for (int dir = 0; dir < 4; ++dir) {
      int ni = c.con[dir];
      if (ni >= 0 && chf.cells[ni].area != 0 && chf.cells[ni].reg == c.reg) same |= static_cast<std::uint8_t>(1 << dir);
    }
    flags[i] = same ^ 0xF;
  }

  SurfaceSampler sampler(tris, cos_slope);
  std::vector<Vec3> vertices;
  std::map<std::tuple<std::int64_t, std::int64_t, std::int64_t>, int> weld;
  std::vector<NavPolygon> polygons;
  std::size_t skipped = 0;
  const double max_error = settings.edge_error / cs;

  for (int i = 0; i < n; ++i) {
    while (flags[i] != 0) {
      const Cell& c = chf.cells[i];
      auto raw = walk_contour(chf, i, flags);
      auto simp = simplify_contour(raw, max_error);
      if (simp.size() < 3) {
        ++skipped;
        continue;
      }
      std::vector<IPt> pts;
      std::vector<double> heights;
      for (int idx : simp) {
        pts.push_back({raw[idx].x, raw[idx].z});
        heights.push_back(raw[idx].y);
      }
      std::int64_t area2 = 0;
      for (std::size_t k = 0; k < pts.size(); ++k) {
        const IPt& p = pts[k];
        const IPt& q = pts[(k + 1) % pts.size()];
        area2 += p.x * q.z - q.x * p.z;
      }
      if (area2 >= 0) {
        ++skipped;  // traced outlines run clockwise; anything else is a hole or degenerate
        continue;
      }
      std::reverse(pts.begin(), pts.end());
      std::reverse(heights.begin(), heights.end());
      for (std::size_t k = 0; k < pts.size(); ++k) {
        double wx = bmin.x() + static_cast<double>(pts[k].x) * cs;
        double wz = bmin.z() + static_cast<double>(pts[k].z) * cs;
        heights[k] = sampler.sample(wx, wz, heights[k], ch + params.max_climb);
      }
      // drop collinear vertices
      for (bool changed = true; changed && pts.size() > 3;) {
        changed = false;
        for (std::size_t k = 0; k < pts.size() && pts.size() > 3; ++k) {
          const std::size_t m = pts.size();
          const IPt& a = pts[(k + m - 1) % m];
          const IPt& b = pts[k];
          const IPt& d = pts[(k + 1) % m];
          bool between = (b.x - a.x) * (d.x - b.x) + (b.z - a.z) * (d.z - b.z) > 0;
          double ha = heights[(k + m - 1) % m], hb = heights[k], hd = heights[(k + 1) % m];
          double span = std::hypot(double(d.x - a.x), double(d.z - a.z));
          double along = std::hypot(double(b.x - a.x), double(b.z - a.z));
          bool level = span > 0 && std::abs(ha + (hd - ha) * (along / span) - hb) <= 1e-4;
          if (icross(a, b, d) == 0 && between && level) {
            pts.erase(pts.begin() + static_cast<std::ptrdiff_t>(k));
            heights.erase(heights.begin() + static_cast<std::ptrdiff_t>(k));
            changed = true;
          }
        }
      }
      auto tris_local = triangulate(pts);
      if (tris_local.empty()) {
        ++skipped;
        continue;
      }
      auto local_polys = merge_convex(tris_local, pts, heights, cs, settings.max_verts_per_poly);
      std::vector<int> global(pts.size());
      for (std::size_t k = 0; k < pts.size(); ++k) {
        double wx = bmin.x() + static_cast<double>(pts[k].x) * cs;
        double wz = bmin.z() + static_cast<double>(pts[k].z) * cs;
        double y = heights[k];
        auto key = std::make_tuple(pts[k].x, pts[k].z, static_cast<std::int64_t>(std::llround(y * 1e4)));
        auto [it, inserted] = weld.emplace(key, static_cast<int>(vertices.size()));
        if (inserted) vertices.emplace_back(wx, y, wz);
        global[k] = it->second;
      }
      for (const auto& lp : local_polys) {
        NavPolygon poly;
        for (int v : lp) poly.verts.push_back(global[v]);
        poly.region = c.reg;
        poly.blocker = c.area >= 2 ? c.area - 2 : -1;
        polygons.push_back(std::move(poly));
      }
    }
  }
  if (skipped > 0) result.warnings.push_back("skipped " + std::to_string(skipped) + " degenerate contour(s)");
  if (polygons.empty()) throw Error(Errc::NoWalkableSurface, "no polygons produced");
  result.mesh = NavMesh(std::move(vertices), std::move(polygons), std::move(ids), params.max_climb);
  return result;
}

}  // namespace escroom

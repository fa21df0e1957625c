// Copyright (c) 2026 The retrace Authors
// SPDX-License-Identifier: Apache-2.0
//
// Chart segmentation, least-squares conformal parameterization and shelf
// packing. Charts are grown per edge-connected component under a face
// normal cone constraint and re-split with a tighter cone until every
// chart is a topological disk; each disk is flattened by minimizing the
// least-squares Cauchy-Riemann residual with two pinned boundary
// vertices, then all charts are packed into one [0,1]^2 atlas.

#pragma once

#include <algorithm>
#include <map>
#include <queue>
#include <unordered_map>
#include <vector>

#include "retrace/math.hpp"
#include "retrace/mesh.hpp"

namespace retrace {

struct Chart {
  std::vector<int> triangles;   // mesh triangle ids
  std::vector<int> vertices;    // mesh vertex ids, local order
  std::vector<Vec2> coords;     // per local vertex, filled by lscm_parameterize
  int pin_a = -1, pin_b = -1;   // local vertex indices
  Vec2 pin_a_pos{0, 0}, pin_b_pos{1, 0};
};

struct ChartPlacement {
  double scale = 1.0;   // chart coords -> uv
  Vec2 offset{0, 0};
  Vec2 box_min{0, 0};   // final uv bounding box
  Vec2 box_max{0, 0};
};

struct Atlas {
  int resolution = 0;
  int padding = 0;
  std::vector<ChartPlacement> charts;

  // Chart owning a texel, or -1 for gutter texels. Boxes expanded by half
  // the padding stay disjoint, so the assignment is unambiguous.
  int chart_of_texel(int x, int y) const {
    double half_pad = 0.5 * padding / resolution;
    double u = (x + 0.5) / resolution;
    double v = (y + 0.5) / resolution;
    for (size_t c = 0; c < charts.size(); ++c) {
      const ChartPlacement& p = charts[c];
      if (u >= p.box_min.x - half_pad && u <= p.box_max.x + half_pad &&
          v >= p.box_min.y - half_pad && v <= p.box_max.y + half_pad)
        return int(c);
    }
    return -1;
  }
};

inline Footprint texel_footprint(const Atlas& atlas, const Vec2& uv, bool* clamped = nullptr) {
  return bilinear_footprint_clamped(uv.x, uv.y, atlas.resolution, atlas.resolution, clamped);
}

namespace detail {

struct ChartTopology {
  bool manifold = true;
  int vertex_count = 0;
  int edge_count = 0;
  int face_count = 0;
  std::vector<int> boundary_loop;  // mesh vertex ids in traversal order
  bool single_loop = false;

  bool disk() const {
    return manifold && single_loop && !boundary_loop.empty() &&
           vertex_count - edge_count + face_count == 1;
  }
};

inline ChartTopology analyze_chart(const TriangleMesh& mesh, const std::vector<int>& faces) {
  ChartTopology topo;
  topo.face_count = int(faces.size());
  std::map<std::pair<int, int>, int> edge_faces;
  std::map<int, bool> seen_vertex;
  for (int t : faces) {
    const auto& tri = mesh.triangles[t];
    for (int k = 0; k < 3; ++k) {
      seen_vertex[tri[k]] = true;
      int a = tri[k], b = tri[(k + 1) % 3];
      edge_faces[{std::min(a, b), std::max(a, b)}]++;
    }
  }
  topo.vertex_count = int(seen_vertex.size());
  topo.edge_count = int(edge_faces.size());

  std::map<int, std::vector<int>> boundary_adj;  // vertex -> neighbors via boundary edges
  int boundary_edges = 0;
  for (const auto& [edge, count] : edge_faces) {
    if (count > 2) topo.manifold = false;
    if (count == 1) {
      ++boundary_edges;
      boundary_adj[edge.first].push_back(edge.second);
      boundary_adj[edge.second].push_back(edge.first);
    }
  }
  if (!topo.manifold || boundary_edges == 0) return topo;
  for (const auto& [v, nbrs] : boundary_adj)
    if (nbrs.size() != 2) return topo;  // pinched boundary

  // walk the loop from the smallest boundary vertex
  int start = boundary_adj.begin()->first;
  int prev = -1, cur = start;
  do {
    topo.boundary_loop.push_back(cur);
    const auto& nbrs = boundary_adj[cur];
    int next = (nbrs[0] == prev) ? nbrs[1] : nbrs[0];
    prev = cur;
    cur = next;
  } while (cur != start && int(topo.boundary_loop.size()) <= boundary_edges);
  topo.single_loop = cur == start && int(topo.boundary_loop.size()) == boundary_edges;
  return topo;
}

// Partition faces by BFS growth constrained to a normal cone around each
// seed face. Deterministic: seeds and queue order follow triangle ids.
inline std::vector<std::vector<int>> cone_growth(const TriangleMesh& mesh,
                                                 const std::vector<int>& faces,
                                                 double cos_cone) {
  std::map<std::pair<int, int>, std::vector<int>> edge_to_faces;
  for (int t : faces) {
    const auto& tri = mesh.triangles[t];
    for (int k = 0; k < 3; ++k) {
      int a = tri[k], b = tri[(k + 1) % 3];
      edge_to_faces[{std::min(a, b), std::max(a, b)}].push_back(t);
    }
  }
  std::unordered_map<int, int> assignment;
  std::vector<std::vector<int>> groups;
  for (int seed : faces) {
    if (assignment.count(seed)) continue;
    Vec3 seed_normal = mesh.geometric_normal(seed);
    std::vector<int> group;
    std::queue<int> queue;
    queue.push(seed);
    assignment[seed] = int(groups.size());
    while (!queue.empty()) {
      int t = queue.front();
      queue.pop();
      group.push_back(t);
      const auto& tri = mesh.triangles[t];
      for (int k = 0; k < 3; ++k) {
        int a = tri[k], b = tri[(k + 1) % 3];
        for (int nb : edge_to_faces[{std::min(a, b), std::max(a, b)}]) {
          if (assignment.count(nb)) continue;
          if (dot(mesh.geometric_normal(nb), seed_normal) < cos_cone) continue;
          assignment[nb] = int(groups.size());
          queue.push(nb);
        }
      }
    }
    std::sort(group.begin(), group.end());
    groups.push_back(std::move(group));
  }
  return groups;
}

inline void split_into_disks(const TriangleMesh& mesh, std::vector<int> faces, double cone_deg,
                             std::vector<std::vector<int>>& out) {
  if (faces.size() == 1) {
    out.push_back(std::move(faces));
    return;
  }
  auto groups = cone_growth(mesh, faces, std::cos(radians(cone_deg)));
  for (auto& group : groups) {
    if (analyze_chart(mesh, group).disk())
      out.push_back(std::move(group));
    else if (cone_deg < 1.0)
      for (int t : group) out.push_back({t});  // single faces are always disks
    else
      split_into_disks(mesh, std::move(group), cone_deg * 0.5, out);
  }
}

}  // namespace detail

// Splits the mesh into disk-topology charts: edge-connected components
// first, then normal-cone growth, recursively tightening the cone where
// a grown region is not a disk. Every triangle lands in exactly one chart.
inline std::vector<Chart> segment_charts(const TriangleMesh& mesh, double max_normal_cone_deg = 120.0) {
  std::vector<int> labels;
  int n_components = connected_components(mesh, labels);
  std::vector<std::vector<int>> components(n_components);
  for (int t = 0; t < mesh.triangle_count(); ++t) components[labels[t]].push_back(t);

  std::vector<std::vector<int>> face_sets;
  for (auto& comp : components) {
    if (detail::analyze_chart(mesh, comp).disk())
      face_sets.push_back(std::move(comp));
    else
      detail::split_into_disks(mesh, std::move(comp), max_normal_cone_deg, face_sets);
  }

  std::vector<Chart> charts;
  charts.reserve(face_sets.size());
  for (auto& faces : face_sets) {
    Chart chart;
    chart.triangles = std::move(faces);
    std::map<int, int> local;
    for (int t : chart.triangles)
      for (int k = 0; k < 3; ++k) local.emplace(mesh.triangles[t][k], 0);
    chart.vertices.reserve(local.size());
    for (auto& [v, idx] : local) {
      idx = int(chart.vertices.size());
      chart.vertices.push_back(v);
    }
    charts.push_back(std::move(chart));
  }
  return charts;
}

namespace detail {

// Sparse least-squares system rows: energy = sum of squared row residuals.
struct SparseRows {
  struct Entry {
    int col;
    double val;
  };
  std::vector<std::vector<Entry>> rows;
  std::vector<double> rhs;

  int n_cols = 0;

  void apply(const std::vector<double>& x, std::vector<double>& out) const {
    out.assign(rows.size(), 0.0);
    for (size_t r = 0; r < rows.size(); ++r) {
      double acc = 0.0;
      for (const Entry& e : rows[r]) acc += e.val * x[e.col];
      out[r] = acc;
    }
  }
  void apply_transpose(const std::vector<double>& y, std::vector<double>& out) const {
    out.assign(n_cols, 0.0);
    for (size_t r = 0; r < rows.size(); ++r)
      for (const Entry& e : rows[r]) out[e.col] += e.val * y[r];
  }
};

// Per-triangle projection into its own plane; orientation follows the face
// normal so positively oriented triangles keep positive 2D area.
inline void project_triangle(const TriangleMesh& mesh, int t, Vec2 p[3]) {
  const auto& tri = mesh.triangles[t];
  const Vec3& a = mesh.positions[tri[0]];
  const Vec3& b = mesh.positions[tri[1]];
  const Vec3& c = mesh.positions[tri[2]];
  Vec3 x = normalize(b - a);
  Vec3 n = normalize(cross(b - a, c - a));
  Vec3 y = cross(n, x);
  p[0] = {0, 0};
  p[1] = {length(b - a), 0};
  p[2] = {dot(c - a, x), dot(c - a, y)};
}

inline SparseRows build_lscm_system(const TriangleMesh& mesh, const Chart& chart,
                                    const std::vector<int>& col_of_vertex, int n_free,
                                    const Vec2& pin_a_pos, const Vec2& pin_b_pos, int pin_a,
                                    int pin_b) {
  SparseRows sys;
  sys.n_cols = 2 * n_free;
  sys.rows.reserve(chart.triangles.size() * 2);
  sys.rhs.reserve(chart.triangles.size() * 2);

  std::unordered_map<int, int> local_of_vertex;
  for (size_t i = 0; i < chart.vertices.size(); ++i) local_of_vertex[chart.vertices[i]] = int(i);

  for (int t : chart.triangles) {
    Vec2 p[3];
    project_triangle(mesh, t, p);
    double area = 0.5 * cross(p[1] - p[0], p[2] - p[0]);
    if (area <= 0.0) throw Error("lscm: triangle " + std::to_string(t) + " degenerate after projection");
    double w = 1.0 / (2.0 * std::sqrt(area));

    // Row pair per triangle: (sum dy_i u_i + dx_i v_i, sum -dx_i u_i + dy_i v_i),
    // d_i the opposite edge, scaled so the squared residual is the conformal energy.
    std::vector<SparseRows::Entry> row1, row2;
    double rhs1 = 0.0, rhs2 = 0.0;
    for (int k = 0; k < 3; ++k) {
      Vec2 d = p[(k + 2) % 3] - p[(k + 1) % 3];
      double dy = d.y * w, dx = d.x * w;
      int local = local_of_vertex[mesh.triangles[t][k]];
      int col = col_of_vertex[local];
      if (col >= 0) {
        row1.push_back({2 * col, dy});
        row1.push_back({2 * col + 1, dx});
        row2.push_back({2 * col, -dx});
        row2.push_back({2 * col + 1, dy});
      } else {
        Vec2 pin = (local == pin_a) ? pin_a_pos : pin_b_pos;
        rhs1 -= dy * pin.x + dx * pin.y;
        rhs2 -= -dx * pin.x + dy * pin.y;
      }
    }
    sys.rows.push_back(std::move(row1));
    sys.rhs.push_back(rhs1);
    sys.rows.push_back(std::move(row2));
    sys.rhs.push_back(rhs2);
  }
  return sys;
}

// Conjugate gradient on the normal equations with Jacobi preconditioning.
inline std::vector<double> solve_normal_equations(const SparseRows& sys, double tol,
                                                  const std::string& label) {
  const int n = sys.n_cols;
  std::vector<double> x(n, 0.0);
  if (n == 0) return x;

  std::vector<double> diag(n, 0.0);
  for (const auto& row : sys.rows)
    for (const auto& e : row) diag[e.col] += e.val * e.val;
  for (double& d : diag)
    if (d <= 0.0) d = 1.0;

  std::vector<double> r = sys.rhs;          // b - A x, x = 0
  std::vector<double> s(n), z(n), p(n), q;
  sys.apply_transpose(r, s);
  double rhs_norm = 0.0;
  for (double v : s) rhs_norm += v * v;
  if (rhs_norm == 0.0) return x;
  for (int i = 0; i < n; ++i) z[i] = s[i] / diag[i];
  p = z;
  double sz = 0.0;
  for (int i = 0; i < n; ++i) sz += s[i] * z[i];

  const int max_iter = std::max(2000, 20 * n);
  for (int it = 0; it < max_iter; ++it) {
    sys.apply(p, q);
    double qq = 0.0;
    for (double v : q) qq += v * v;
    if (!(qq > 0.0) || !std::isfinite(qq))
      throw Error("lscm: singular system while parameterizing " + label);
    double alpha = sz / qq;
    for (int i = 0; i < n; ++i) x[i] += alpha * p[i];
    for (size_t i = 0; i < r.size(); ++i) r[i] -= alpha * q[i];
    sys.apply_transpose(r, s);
    double s_norm = 0.0;
    for (double v : s) s_norm += v * v;
    if (s_norm <= tol * tol * rhs_norm) break;
    double sz_new = 0.0;
    for (int i = 0; i < n; ++i) {
      z[i] = s[i] / diag[i];
      sz_new += s[i] * z[i];
    }
    double beta = sz_new / sz;
    sz = sz_new;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  return x;
}

}  // namespace detail

// Conformal (Cauchy-Riemann residual) energy of a chart's current coords.
inline double chart_conformal_energy(const TriangleMesh& mesh, const Chart& chart,
                                     const std::vector<Vec2>& coords) {
  std::unordered_map<int, int> local_of_vertex;
  for (size_t i = 0; i < chart.vertices.size(); ++i) local_of_vertex[chart.vertices[i]] = int(i);
  double energy = 0.0;
  for (int t : chart.triangles) {
    Vec2 p[3];
    detail::project_triangle(mesh, t, p);
    double area = 0.5 * cross(p[1] - p[0], p[2] - p[0]);
    double r1 = 0.0, r2 = 0.0;
    for (int k = 0; k < 3; ++k) {
      Vec2 d = p[(k + 2) % 3] - p[(k + 1) % 3];
      const Vec2& uv = coords[local_of_vertex[mesh.triangles[t][k]]];
      r1 += d.y * uv.x + d.x * uv.y;
      r2 += -d.x * uv.x + d.y * uv.y;
    }
    energy += (r1 * r1 + r2 * r2) / (4.0 * area);
  }
  return energy;
}

// Flattens a disk chart by least squares. Pins the two boundary vertices
// with maximal separation along the boundary loop at (0,0) and (1,0).
inline void lscm_parameterize(const TriangleMesh& mesh, Chart& chart, double tol = 1e-10) {
  auto topo = detail::analyze_chart(mesh, chart.triangles);
  std::string label = "chart with " + std::to_string(chart.triangles.size()) + " triangles (first id " +
                      std::to_string(chart.triangles.empty() ? -1 : chart.triangles[0]) + ")";
  if (!topo.disk()) throw Error("lscm: " + label + " is not a disk");

  // boundary-geodesic pin selection
  const auto& loop = topo.boundary_loop;
  const int nb = int(loop.size());
  std::vector<double> cumulative(nb + 1, 0.0);
  for (int i = 0; i < nb; ++i)
    cumulative[i + 1] =
        cumulative[i] + length(mesh.positions[loop[(i + 1) % nb]] - mesh.positions[loop[i]]);
  double perimeter = cumulative[nb];
  int best_i = 0, best_j = 1;
  double best_sep = -1.0;
  for (int i = 0; i < nb; ++i) {
    for (int j = i + 1; j < nb; ++j) {
      double forward = cumulative[j] - cumulative[i];
      double sep = std::min(forward, perimeter - forward);
      if (sep > best_sep) {
        best_sep = sep;
        best_i = i;
        best_j = j;
      }
    }
  }

  std::unordered_map<int, int> local_of_vertex;
  for (size_t i = 0; i < chart.vertices.size(); ++i) local_of_vertex[chart.vertices[i]] = int(i);
  chart.pin_a = local_of_vertex[loop[best_i]];
  chart.pin_b = local_of_vertex[loop[best_j]];
  chart.pin_a_pos = {0, 0};
  chart.pin_b_pos = {1, 0};

  const int n_vertices = int(chart.vertices.size());
  std::vector<int> col_of_vertex(n_vertices);
  int n_free = 0;
  for (int i = 0; i < n_vertices; ++i)
    col_of_vertex[i] = (i == chart.pin_a || i == chart.pin_b) ? -1 : n_free++;

  auto sys = detail::build_lscm_system(mesh, chart, col_of_vertex, n_free, chart.pin_a_pos,
                                       chart.pin_b_pos, chart.pin_a, chart.pin_b);
  auto x = detail::solve_normal_equations(sys, tol, label);

  chart.coords.assign(n_vertices, Vec2());
  for (int i = 0; i < n_vertices; ++i) {
    if (i == chart.pin_a)
      chart.coords[i] = chart.pin_a_pos;
    else if (i == chart.pin_b)
      chart.coords[i] = chart.pin_b_pos;
    else
      chart.coords[i] = {x[2 * col_of_vertex[i]], x[2 * col_of_vertex[i] + 1]};
  }
  for (const Vec2& c : chart.coords)
    if (!std::isfinite(c.x) || !std::isfinite(c.y))
      throw Error("lscm: non-finite solution for " + label);
}

// Packs parameterized charts into [0,1]^2. Charts are first rescaled so 2D
// area matches 3D area (area-proportional texel budget), then a single
// global scale is maximized under a shelf layout with `padding` texels of
// separation. Writes final per-corner UVs and chart ids into the mesh.
inline Atlas pack_atlas(const TriangleMesh& mesh_in, std::vector<Chart>& charts, int resolution,
                        int padding, TriangleMesh* out_mesh = nullptr) {
  if (charts.empty()) throw Error("pack_atlas: no charts");
  struct Entry {
    int chart;
    double norm_scale;  // chart coords -> area-normalized coords
    Vec2 lo, hi;        // normalized bbox
    double area;        // normalized bbox area
    Vec2 place;         // shelf position of box min corner, texels
  };
  std::vector<Entry> entries(charts.size());
  for (size_t c = 0; c < charts.size(); ++c) {
    const Chart& chart = charts[c];
    if (chart.coords.empty()) throw Error("pack_atlas: chart not parameterized");
    std::unordered_map<int, int> local_of_vertex;
    for (size_t i = 0; i < chart.vertices.size(); ++i)
      local_of_vertex[chart.vertices[i]] = int(i);
    double area2d = 0.0, area3d = 0.0;
    for (int t : chart.triangles) {
      const auto& tri = mesh_in.triangles[t];
      Vec2 q0 = chart.coords[local_of_vertex[tri[0]]];
      Vec2 q1 = chart.coords[local_of_vertex[tri[1]]];
      Vec2 q2 = chart.coords[local_of_vertex[tri[2]]];
      area2d += 0.5 * std::abs(cross(q1 - q0, q2 - q0));
      area3d += mesh_in.triangle_area(t);
    }
    Entry& e = entries[c];
    e.chart = int(c);
    e.norm_scale = area2d > 0.0 ? std::sqrt(area3d / area2d) : 1.0;
    e.lo = {kInf, kInf};
    e.hi = {-kInf, -kInf};
    for (const Vec2& q : chart.coords) {
      e.lo = {std::min(e.lo.x, q.x * e.norm_scale), std::min(e.lo.y, q.y * e.norm_scale)};
      e.hi = {std::max(e.hi.x, q.x * e.norm_scale), std::max(e.hi.y, q.y * e.norm_scale)};
    }
    e.area = (e.hi.x - e.lo.x) * (e.hi.y - e.lo.y);
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.area > b.area || (a.area == b.area && a.chart < b.chart);
  });

  const double usable = resolution - padding;  // box span when margins are padding/2 per side
  if (usable <= 0) throw Error("pack_atlas: padding exceeds resolution");

  // shelf layout at scale s (normalized coords -> texels); returns fit
  auto try_pack = [&](double s, bool store) {
    double shelf_x = 0.0, shelf_y = 0.0, shelf_h = 0.0;
    for (Entry& e : entries) {
      double w = (e.hi.x - e.lo.x) * s;
      double h = (e.hi.y - e.lo.y) * s;
      if (w > usable || h > usable) return false;
      if (shelf_x + w > usable + 1e-12) {  // next shelf
        shelf_y += shelf_h + padding;
        shelf_x = 0.0;
        shelf_h = 0.0;
      }
      if (shelf_y + h > usable + 1e-12) return false;
      if (store) e.place = {shelf_x + padding * 0.5, shelf_y + padding * 0.5};
      shelf_x += w + padding;
      shelf_h = std::max(shelf_h, h);
    }
    return true;
  };

  // largest feasible uniform scale via bisection
  double lo = 0.0, hi = usable;
  if (!try_pack(hi, false)) {
    while (!try_pack(hi, false)) {
      hi *= 0.5;
      if (hi < 1e-9)
        throw Error("pack_atlas: charts cannot fit at resolution " + std::to_string(resolution) +
                    "; increase --resolution or reduce padding");
    }
    lo = hi;
    hi *= 2.0;
  } else {
    lo = hi;
  }
  for (int it = 0; it < 60 && lo < hi; ++it) {
    double mid = 0.5 * (lo + hi);
    if (try_pack(mid, false))
      lo = mid;
    else
      hi = mid;
  }
  double scale = lo;
  if (!try_pack(scale, true)) throw Error("pack_atlas: internal packing failure");

  Atlas atlas;
  atlas.resolution = resolution;
  atlas.padding = padding;
  atlas.charts.resize(charts.size());
  for (const Entry& e : entries) {
    ChartPlacement& p = atlas.charts[e.chart];
    p.scale = e.norm_scale * scale / resolution;
    p.offset = {(e.place.x - e.lo.x * scale) / resolution, (e.place.y - e.lo.y * scale) / resolution};
    p.box_min = {e.place.x / resolution, e.place.y / resolution};
    p.box_max = {(e.place.x + (e.hi.x - e.lo.x) * scale) / resolution,
                 (e.place.y + (e.hi.y - e.lo.y) * scale) / resolution};
  }

  if (out_mesh) {
    *out_mesh = mesh_in;
    out_mesh->uvs.assign(size_t(mesh_in.triangle_count()) * 3, Vec2());
    out_mesh->chart_ids.assign(mesh_in.triangle_count(), -1);
    for (size_t c = 0; c < charts.size(); ++c) {
      const Chart& chart = charts[c];
      const ChartPlacement& p = atlas.charts[c];
      std::unordered_map<int, int> local_of_vertex;
      for (size_t i = 0; i < chart.vertices.size(); ++i)
        local_of_vertex[chart.vertices[i]] = int(i);
      for (int t : chart.triangles) {
        out_mesh->chart_ids[t] = int(c);
        for (int k = 0; k < 3; ++k) {
          Vec2 q = chart.coords[local_of_vertex[mesh_in.triangles[t][k]]];
          out_mesh->uvs[size_t(t) * 3 + k] = {q.x * p.scale + p.offset.x,
                                              q.y * p.scale + p.offset.y};
        }
      }
    }
  }
  return atlas;
}

// Surface sample behind each texel: the triangle whose UV footprint covers
// the texel center, with its interpolated position and normal. Used for
// baking ground-truth maps and for visibility oracles.
struct TexelSurface {
  int triangle = -1;
  Vec3 position;
  Vec3 normal;
};

inline Grid<TexelSurface> rasterize_atlas(const TriangleMesh& mesh, int resolution) {
  Grid<TexelSurface> grid(resolution, resolution);
  if (!mesh.has_uvs()) throw Error("rasterize_atlas: mesh has no UVs");
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    Vec2 a = mesh.uvs[size_t(t) * 3];
    Vec2 b = mesh.uvs[size_t(t) * 3 + 1];
    Vec2 c = mesh.uvs[size_t(t) * 3 + 2];
    double denom = cross(b - a, c - a);
    if (denom == 0.0) continue;
    double min_u = std::min({a.x, b.x, c.x}), max_u = std::max({a.x, b.x, c.x});
    double min_v = std::min({a.y, b.y, c.y}), max_v = std::max({a.y, b.y, c.y});
    int x0 = std::clamp(int(std::floor(min_u * resolution - 0.5)), 0, resolution - 1);
    int x1 = std::clamp(int(std::ceil(max_u * resolution + 0.5)), 0, resolution - 1);
    int y0 = std::clamp(int(std::floor(min_v * resolution - 0.5)), 0, resolution - 1);
    int y1 = std::clamp(int(std::ceil(max_v * resolution + 0.5)), 0, resolution - 1);
    const auto& tri = mesh.triangles[t];
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (grid.at(x, y).triangle >= 0) continue;  // first triangle wins
        Vec2 p{(x + 0.5) / resolution, (y + 0.5) / resolution};
        double w1 = cross(p - a, c - a) / denom;
        double w2 = cross(b - a, p - a) / denom;
        double w0 = 1.0 - w1 - w2;
        if (w0 < -1e-9 || w1 < -1e-9 || w2 < -1e-9) continue;
        TexelSurface& s = grid.at(x, y);
        s.triangle = t;
        s.position = mesh.positions[tri[0]] * w0 + mesh.positions[tri[1]] * w1 +
                     mesh.positions[tri[2]] * w2;
        s.normal = normalize(mesh.normals[tri[0]] * w0 + mesh.normals[tri[1]] * w1 +
                             mesh.normals[tri[2]] * w2);
      }
    }
  }
  return grid;
}

}  // namespace retrace

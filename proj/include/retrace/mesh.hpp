// Copyright (c) 2026 The retrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "retrace/image.hpp"
#include "retrace/math.hpp"

namespace retrace {

// Indexed triangle geometry with per-vertex normals. Per-corner UVs and
// per-triangle chart ids appear after atlas baking (see atlas.hpp).
struct TriangleMesh {
  std::vector<Vec3> positions;
  std::vector<std::array<int, 3>> triangles;
  std::vector<Vec3> normals;        // per vertex, unit length
  std::vector<Vec2> uvs;            // per corner (3 per triangle), empty before baking
  std::vector<int> chart_ids;       // per triangle, empty before baking

  int vertex_count() const { return int(positions.size()); }
  int triangle_count() const { return int(triangles.size()); }
  bool has_uvs() const { return !uvs.empty(); }

  Vec3 triangle_cross(int t) const {
    const auto& tri = triangles[t];
    return cross(positions[tri[1]] - positions[tri[0]], positions[tri[2]] - positions[tri[0]]);
  }
  double triangle_area(int t) const { return 0.5 * length(triangle_cross(t)); }
  Vec3 geometric_normal(int t) const { return normalize(triangle_cross(t)); }

  Vec3 bbox_min() const {
    Vec3 lo(kInf, kInf, kInf);
    for (const Vec3& p : positions) lo = min(lo, p);
    return lo;
  }
  Vec3 bbox_max() const {
    Vec3 hi(-kInf, -kInf, -kInf);
    for (const Vec3& p : positions) hi = max(hi, p);
    return hi;
  }
  double scene_scale() const { return length(bbox_max() - bbox_min()); }
};

struct CleanupReport {
  int removed_repeated_index = 0;
  int removed_zero_area = 0;
  int removed() const { return removed_repeated_index + removed_zero_area; }
};

// Drops triangles with a repeated vertex index or with near-zero area
// (cross-product magnitude below 1e-12 x longest edge squared, so the
// test is scale-relative). Unreferenced vertices are kept.
inline CleanupReport dissolve_degenerates(TriangleMesh& mesh) {
  CleanupReport report;
  std::vector<std::array<int, 3>> kept;
  kept.reserve(mesh.triangles.size());
  for (const auto& tri : mesh.triangles) {
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
      report.removed_repeated_index++;
      continue;
    }
    const Vec3& a = mesh.positions[tri[0]];
    const Vec3& b = mesh.positions[tri[1]];
    const Vec3& c = mesh.positions[tri[2]];
    double e = std::max({length_squared(b - a), length_squared(c - b), length_squared(a - c)});
    if (length(cross(b - a, c - a)) < 1e-12 * e) {
      report.removed_zero_area++;
      continue;
    }
    kept.push_back(tri);
  }
  mesh.triangles.swap(kept);
  return report;
}

// Area-weighted vertex normals from face geometry.
inline void compute_vertex_normals(TriangleMesh& mesh) {
  mesh.normals.assign(mesh.positions.size(), Vec3());
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    Vec3 c = mesh.triangle_cross(t);  // magnitude = 2 x area
    for (int k = 0; k < 3; ++k) mesh.normals[mesh.triangles[t][k]] += c;
  }
  for (size_t v = 0; v < mesh.normals.size(); ++v) {
    double len = length(mesh.normals[v]);
    if (len > 1e-20) {
      mesh.normals[v] = mesh.normals[v] / len;
    } else {
      mesh.normals[v] = {0, 0, 1};  // unreferenced or fully cancelled vertex
    }
  }
}

// Labels triangles by edge-connected component; returns component count.
inline int connected_components(const TriangleMesh& mesh, std::vector<int>& label) {
  const int n = mesh.triangle_count();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };

  std::unordered_map<uint64_t, int> edge_owner;
  edge_owner.reserve(size_t(n) * 3);
  for (int t = 0; t < n; ++t) {
    for (int k = 0; k < 3; ++k) {
      int a = mesh.triangles[t][k];
      int b = mesh.triangles[t][(k + 1) % 3];
      uint64_t key = (uint64_t(std::min(a, b)) << 32) | uint64_t(std::max(a, b));
      auto [it, inserted] = edge_owner.emplace(key, t);
      if (!inserted) {
        int ra = find(it->second), rb = find(t);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
      }
    }
  }

  label.assign(n, -1);
  int count = 0;
  std::unordered_map<int, int> root_to_label;
  for (int t = 0; t < n; ++t) {
    int r = find(t);
    auto [it, inserted] = root_to_label.emplace(r, count);
    if (inserted) ++count;
    label[t] = it->second;
  }
  return count;
}

struct LoadResult {
  TriangleMesh mesh;
  CleanupReport cleanup;
  int components = 0;
  std::string summary;
};

// Wavefront OBJ loader. Accepts v/vn/vt/f records, fan-triangulates
// polygons, resolves negative indices, and runs the degenerate dissolve.
// Materials and all other records are ignored.
inline LoadResult load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(path + ": cannot open");

  TriangleMesh mesh;
  std::vector<Vec3> file_normals;
  std::vector<Vec2> file_uvs;
  // per-corner indices into file_normals / file_uvs (-1 when absent)
  std::vector<std::array<int, 3>> corner_normal;
  std::vector<std::array<int, 3>> corner_uv;

  auto parse_error = [&](int line_no, const std::string& msg) {
    throw Error(path + ":" + std::to_string(line_no) + ": " + msg);
  };

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      Vec3 p;
      if (!(ss >> p.x >> p.y >> p.z)) parse_error(line_no, "malformed vertex record");
      mesh.positions.push_back(p);
    } else if (tag == "vn") {
      Vec3 nrm;
      if (!(ss >> nrm.x >> nrm.y >> nrm.z)) parse_error(line_no, "malformed normal record");
      file_normals.push_back(nrm);
    } else if (tag == "vt") {
      Vec2 t;
      if (!(ss >> t.x >> t.y)) parse_error(line_no, "malformed texcoord record");
      file_uvs.push_back(t);
    } else if (tag == "f") {
      struct Corner {
        int v, vt, vn;
      };
      std::vector<Corner> corners;
      std::string word;
      while (ss >> word) {
        Corner c{0, 0, 0};
        int fields[3] = {0, 0, 0};
        bool has[3] = {false, false, false};
        size_t pos = 0;
        for (int field = 0; field < 3 && pos <= word.size(); ++field) {
          size_t next = word.find('/', pos);
          std::string tok = word.substr(pos, next == std::string::npos ? next : next - pos);
          if (!tok.empty()) {
            try {
              fields[field] = std::stoi(tok);
              has[field] = true;
            } catch (...) {
              parse_error(line_no, "malformed face corner '" + word + "'");
            }
          }
          if (next == std::string::npos) break;
          pos = next + 1;
        }
        auto resolve = [&](int idx, int count, const char* what) {
          int r = idx > 0 ? idx - 1 : count + idx;
          if (r < 0 || r >= count) parse_error(line_no, std::string(what) + " index out of range");
          return r;
        };
        if (!has[0]) parse_error(line_no, "face corner missing vertex index");
        c.v = resolve(fields[0], int(mesh.positions.size()), "vertex");
        c.vt = has[1] ? resolve(fields[1], int(file_uvs.size()), "texcoord") : -1;
        c.vn = has[2] ? resolve(fields[2], int(file_normals.size()), "normal") : -1;
        corners.push_back(c);
      }
      if (corners.size() < 3) parse_error(line_no, "face with fewer than 3 corners");
      for (size_t k = 2; k < corners.size(); ++k) {
        mesh.triangles.push_back({corners[0].v, corners[k - 1].v, corners[k].v});
        corner_normal.push_back({corners[0].vn, corners[k - 1].vn, corners[k].vn});
        corner_uv.push_back({corners[0].vt, corners[k - 1].vt, corners[k].vt});
      }
    }
  }
  if (mesh.positions.empty() || mesh.triangles.empty())
    throw Error(path + ": no geometry found");

  LoadResult result;
  result.cleanup = [&] {
    // dissolve, keeping corner attribute arrays aligned
    CleanupReport report;
    std::vector<std::array<int, 3>> tri, cn, cu;
    for (size_t t = 0; t < mesh.triangles.size(); ++t) {
      const auto& x = mesh.triangles[t];
      bool repeated = x[0] == x[1] || x[1] == x[2] || x[0] == x[2];
      bool zero_area = false;
      if (!repeated) {
        const Vec3& a = mesh.positions[x[0]];
        const Vec3& b = mesh.positions[x[1]];
        const Vec3& c = mesh.positions[x[2]];
        double e = std::max({length_squared(b - a), length_squared(c - b), length_squared(a - c)});
        zero_area = length(cross(b - a, c - a)) < 1e-12 * e;
      }
      if (repeated) {
        report.removed_repeated_index++;
      } else if (zero_area) {
        report.removed_zero_area++;
      } else {
        tri.push_back(x);
        cn.push_back(corner_normal[t]);
        cu.push_back(corner_uv[t]);
      }
    }
    mesh.triangles.swap(tri);
    corner_normal.swap(cn);
    corner_uv.swap(cu);
    return report;
  }();
  if (mesh.triangles.empty())
    throw Error(path + ": mesh is empty after degenerate dissolve");

  // Per-vertex normals: average referenced file normals when every corner
  // carries one, otherwise recompute from faces.
  bool all_corners_have_normals = true;
  for (const auto& cn : corner_normal)
    for (int k = 0; k < 3; ++k)
      if (cn[k] < 0) all_corners_have_normals = false;
  if (all_corners_have_normals && !file_normals.empty()) {
    mesh.normals.assign(mesh.positions.size(), Vec3());
    for (size_t t = 0; t < mesh.triangles.size(); ++t)
      for (int k = 0; k < 3; ++k)
        mesh.normals[mesh.triangles[t][k]] += file_normals[corner_normal[t][k]];
    for (auto& nrm : mesh.normals) {
      double len = length(nrm);
      nrm = len > 1e-20 ? nrm / len : Vec3(0, 0, 1);
    }
  } else {
    compute_vertex_normals(mesh);
  }

  // Per-corner UVs only when the file provides them everywhere.
  bool all_corners_have_uvs = !file_uvs.empty();
  for (const auto& cu : corner_uv)
    for (int k = 0; k < 3; ++k)
      if (cu[k] < 0) all_corners_have_uvs = false;
  if (all_corners_have_uvs) {
    mesh.uvs.reserve(mesh.triangles.size() * 3);
    for (const auto& cu : corner_uv)
      for (int k = 0; k < 3; ++k) mesh.uvs.push_back(file_uvs[cu[k]]);
  }

  std::vector<int> labels;
  result.components = connected_components(mesh, labels);

  std::ostringstream summary;
  summary << path << ": " << mesh.triangle_count() << " triangles, " << mesh.vertex_count()
          << " vertices, " << result.components << " components, removed "
          << result.cleanup.removed() << " degenerate (" << result.cleanup.removed_zero_area
          << " zero-area, " << result.cleanup.removed_repeated_index << " repeated-index)";
  result.summary = summary.str();
  result.mesh = std::move(mesh);
  return result;
}

inline TriangleMesh load_mesh(const std::string& path) { return load_obj(path).mesh; }

inline void save_obj(const std::string& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw Error(path + ": cannot open for writing");
  out.precision(12);
  for (const Vec3& p : mesh.positions) out << "v " << p.x << " " << p.y << " " << p.z << "\n";
  for (const Vec3& n : mesh.normals) out << "vn " << n.x << " " << n.y << " " << n.z << "\n";
  for (const Vec2& t : mesh.uvs) out << "vt " << t.x << " " << t.y << "\n";
  const bool uvs = mesh.has_uvs();
  for (size_t t = 0; t < mesh.triangles.size(); ++t) {
    out << "f";
    for (int k = 0; k < 3; ++k) {
      int v = mesh.triangles[t][k] + 1;
      if (uvs)
        out << " " << v << "/" << (3 * t + size_t(k) + 1) << "/" << v;
      else
        out << " " << v << "//" << v;
    }
    out << "\n";
  }
  if (!out) throw Error(path + ": write failed");
}

}  // namespace retrace

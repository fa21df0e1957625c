// Copyright (c) 2026 The retrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "retrace/math.hpp"
#include "retrace/mesh.hpp"

namespace retrace {

struct Ray {
  Vec3 origin;
  Vec3 dir;  // unit length
  double t_min = 1e-9;
  double t_max = kInf;
};

struct Hit {
  int triangle = -1;
  double t = kInf;
  double b0 = 0, b1 = 0, b2 = 0;  // barycentric weights of the triangle's corners
  Vec3 geometric_normal;
  Vec3 shading_normal;  // interpolated vertex normal, unnormalized until shading_frame
  Vec2 uv;
  Vec3 position;
};

namespace detail {

struct TriPrecomp {
  Vec3 a, e1, e2;  // vertex 0 and the two edges from it
};

// Moller-Trumbore, double precision, no backface culling. The same
// predicate backs both traversal and the brute-force oracle; ties on t
// resolve to the lower triangle id so the two agree exactly.
inline bool intersect_triangle(const TriPrecomp& tri, const Ray& ray, double& t, double& u,
                               double& v) {
  const Vec3& e1 = tri.e1;
  const Vec3& e2 = tri.e2;
  Vec3 p = cross(ray.dir, e2);
  double det = dot(e1, p);
  if (det == 0.0) return false;
  double inv_det = 1.0 / det;
  Vec3 s = ray.origin - tri.a;
  u = dot(s, p) * inv_det;
  if (u < 0.0 || u > 1.0) return false;
  Vec3 q = cross(s, e1);
  v = dot(ray.dir, q) * inv_det;
  if (v < 0.0 || u + v > 1.0) return false;
  t = dot(e2, q) * inv_det;
  return t > ray.t_min && t < ray.t_max;
}

inline bool intersect_triangle(const Vec3& a, const Vec3& b, const Vec3& c, const Ray& ray,
                               double& t, double& u, double& v) {
  Vec3 e1 = b - a, e2 = c - a;
  Vec3 p = cross(ray.dir, e2);
  double det = dot(e1, p);
  if (det == 0.0) return false;
  double inv_det = 1.0 / det;
  Vec3 s = ray.origin - a;
  u = dot(s, p) * inv_det;
  if (u < 0.0 || u > 1.0) return false;
  Vec3 q = cross(s, e1);
  v = dot(ray.dir, q) * inv_det;
  if (v < 0.0 || u + v > 1.0) return false;
  t = dot(e2, q) * inv_det;
  return t > ray.t_min && t < ray.t_max;
}

struct Box {
  Vec3 lo{kInf, kInf, kInf};
  Vec3 hi{-kInf, -kInf, -kInf};

  void grow(const Vec3& p) {
    lo = min(lo, p);
    hi = max(hi, p);
  }
  void grow(const Box& b) {
    lo = min(lo, b.lo);
    hi = max(hi, b.hi);
  }
  Vec3 extent() const { return hi - lo; }
  double half_area() const {
    Vec3 e = extent();
    return e.x * e.y + e.y * e.z + e.z * e.x;
  }
  // entry distance, or +inf on miss
  double entry(const Vec3& origin, const Vec3& inv_dir, double t_max) const {
    double t0 = (lo.x - origin.x) * inv_dir.x;
    double t1 = (hi.x - origin.x) * inv_dir.x;
    double tnear = std::min(t0, t1), tfar = std::max(t0, t1);
    t0 = (lo.y - origin.y) * inv_dir.y;
    t1 = (hi.y - origin.y) * inv_dir.y;
    tnear = std::max(tnear, std::min(t0, t1));
    tfar = std::min(tfar, std::max(t0, t1));
    t0 = (lo.z - origin.z) * inv_dir.z;
    t1 = (hi.z - origin.z) * inv_dir.z;
    tnear = std::max(tnear, std::min(t0, t1));
    tfar = std::min(tfar, std::max(t0, t1));
    return (tnear <= tfar && tfar > 0.0 && tnear < t_max) ? tnear : kInf;
  }
};

}  // namespace detail

// Binned-SAH BVH over the mesh triangles. Immutable and safely shared
// across render threads once built.
class Bvh {
 public:
  Bvh() = default;
  explicit Bvh(const TriangleMesh& mesh) : mesh_(&mesh) { build(); }

  const TriangleMesh& mesh() const { return *mesh_; }

  // Nearest hit in (t_min, t_max), identical to testing every triangle.
  std::optional<Hit> intersect(const Ray& ray) const {
    int tri = -1;
    double best_t = ray.t_max, best_u = 0, best_v = 0;
    walk(ray, [&](int candidate, double t, double u, double v) {
      if (t < best_t || (t == best_t && (tri < 0 || candidate < tri))) {
        best_t = t;
        best_u = u;
        best_v = v;
        tri = candidate;
      }
    });
    if (tri < 0) return std::nullopt;
    return make_hit(ray, tri, best_t, best_u, best_v);
  }

  // Any-hit visibility query.
  bool occluded(const Ray& ray) const {
    if (nodes_.empty()) return false;
    Vec3 inv_dir{1.0 / ray.dir.x, 1.0 / ray.dir.y, 1.0 / ray.dir.z};
    int stack[128];
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
      const Node& node = nodes_[stack[--sp]];
      if (node.box.entry(ray.origin, inv_dir, ray.t_max) == kInf) continue;
      if (node.count > 0) {
        for (int i = node.left; i < node.left + node.count; ++i) {
          const auto& idx = mesh_->triangles[order_[i]];
          double t, u, v;
          if (detail::intersect_triangle(mesh_->positions[idx[0]], mesh_->positions[idx[1]],
                                         mesh_->positions[idx[2]], ray, t, u, v))
            return true;
        }
      } else {
        stack[sp++] = node.right;
        stack[sp++] = node.left;
      }
    }
    return false;
  }

  std::optional<Hit> intersect_brute_force(const Ray& ray) const {
    int tri = -1;
    double best_t = ray.t_max, best_u = 0, best_v = 0;
    for (int i = 0; i < mesh_->triangle_count(); ++i) {
      double t, u, v;
      Ray limited = ray;
      // admit exact ties once a hit exists; the id rule below breaks them
      limited.t_max = tri >= 0 ? std::nextafter(best_t, kInf) : ray.t_max;
      if (detail::intersect_triangle(tri_data_[slot_of_[i]], limited, t, u, v)) {
        if (t < best_t || (t == best_t && (tri < 0 || i < tri))) {
          best_t = t;
          best_u = u;
          best_v = v;
          tri = i;
        }
      }
    }
    if (tri < 0) return std::nullopt;
    return make_hit(ray, tri, best_t, best_u, best_v);
  }

 private:
  struct Node {
    detail::Box box;
    int left = -1;    // internal: child index; leaf: first triangle
    int count = 0;    // leaf triangle count, 0 for internal nodes
    int right = -1;
  };

  Hit make_hit(const Ray& ray, int tri, double t, double u, double v) const {
    Hit hit;
    hit.triangle = tri;
    hit.t = t;
    hit.b0 = 1.0 - u - v;
    hit.b1 = u;
    hit.b2 = v;
    const auto& idx = mesh_->triangles[tri];
    hit.position = ray.origin + ray.dir * t;
    Vec3 gn = mesh_->geometric_normal(tri);
    hit.geometric_normal = gn;
    hit.shading_normal = mesh_->normals[idx[0]] * hit.b0 + mesh_->normals[idx[1]] * hit.b1 +
                         mesh_->normals[idx[2]] * hit.b2;
    if (mesh_->has_uvs()) {
      size_t base = size_t(tri) * 3;
      hit.uv = mesh_->uvs[base] * hit.b0 + mesh_->uvs[base + 1] * hit.b1 +
               mesh_->uvs[base + 2] * hit.b2;
    }
    return hit;
  }

  // Ordered descent: nearer child first, so t_limit shrinks early. The
  // hit set is identical to brute force; ties resolve via the caller's rule.
  template <typename Report>
  void walk(const Ray& ray, Report&& report, const bool* stop = nullptr) const {
    if (nodes_.empty()) return;
    Vec3 inv_dir{1.0 / ray.dir.x, 1.0 / ray.dir.y, 1.0 / ray.dir.z};
    double t_limit = ray.t_max;
    bool has_hit = false;
    int stack[128];
    int sp = 0;
    Ray local = ray;
    int current = 0;
    if (nodes_[0].box.entry(ray.origin, inv_dir, t_limit) == kInf) return;
    for (;;) {
      const Node& node = nodes_[current];
      if (node.count > 0) {
        for (int i = node.left; i < node.left + node.count; ++i) {
          double t, u, v;
          local.t_max = has_hit ? std::nextafter(t_limit, kInf) : t_limit;
          if (detail::intersect_triangle(tri_data_[i], local, t, u, v)) {
            report(order_[i], t, u, v);
            if (stop && *stop) return;
            has_hit = true;
            if (t < t_limit) t_limit = t;
          }
        }
      } else {
        double t_left = nodes_[node.left].box.entry(ray.origin, inv_dir, t_limit);
        double t_right = nodes_[node.right].box.entry(ray.origin, inv_dir, t_limit);
        int near = node.left, far = node.right;
        if (t_right < t_left) {
          std::swap(near, far);
          std::swap(t_left, t_right);
        }
        if (t_left != kInf) {
          if (t_right != kInf) stack[sp++] = far;
          current = near;
          continue;
        }
      }
      // pop; re-check against the tightened t_limit
      for (;;) {
        if (sp == 0) return;
        current = stack[--sp];
        if (nodes_[current].box.entry(ray.origin, inv_dir, t_limit) != kInf) break;
      }
    }
  }

  void build() {
    const int n = mesh_->triangle_count();
    order_.resize(n);
    std::vector<detail::Box> boxes(n);
    std::vector<Vec3> centers(n);
    for (int i = 0; i < n; ++i) {
      order_[i] = i;
      const auto& idx = mesh_->triangles[i];
      for (int k = 0; k < 3; ++k) boxes[i].grow(mesh_->positions[idx[k]]);
      // pad so that roundoff in the slab test can only add candidates
      Vec3 pad = (boxes[i].extent() + Vec3(1e-12)) * 1e-9;
      boxes[i].lo -= pad;
      boxes[i].hi += pad;
      centers[i] = (boxes[i].lo + boxes[i].hi) * 0.5;
    }
    nodes_.reserve(size_t(2) * n);
    build_range(0, n, boxes, centers);
  }

  int build_range(int begin, int end, const std::vector<detail::Box>& boxes,
                  const std::vector<Vec3>& centers) {
    Node node;
    for (int i = begin; i < end; ++i) node.box.grow(boxes[order_[i]]);
    int node_index = int(nodes_.size());
    nodes_.push_back(node);

    const int count = end - begin;
    if (count <= 8) {
      nodes_[node_index].left = begin;
      nodes_[node_index].count = count;
      return node_index;
    }

    // binned SAH over the widest axis, median fallback
    detail::Box cbox;
    for (int i = begin; i < end; ++i) cbox.grow(centers[order_[i]]);
    Vec3 ext = cbox.extent();
    int axis = ext.x > ext.y ? (ext.x > ext.z ? 0 : 2) : (ext.y > ext.z ? 1 : 2);
    int mid = begin + count / 2;
    if (ext[axis] > 1e-12) {
      constexpr int kBins = 16;
      struct Bin {
        detail::Box box;
        int count = 0;
      } bins[kBins];
      double scale = kBins / ext[axis];
      auto bin_of = [&](int tri) {
        int b = int((centers[tri][axis] - cbox.lo[axis]) * scale);
        return std::clamp(b, 0, kBins - 1);
      };
      for (int i = begin; i < end; ++i) {
        Bin& b = bins[bin_of(order_[i])];
        b.box.grow(boxes[order_[i]]);
        b.count++;
      }
      double best_cost = kInf;
      int best_split = -1;
      for (int split = 1; split < kBins; ++split) {
        detail::Box lbox, rbox;
        int lcount = 0, rcount = 0;
        for (int b = 0; b < split; ++b) {
          if (bins[b].count) lbox.grow(bins[b].box);
          lcount += bins[b].count;
        }
        for (int b = split; b < kBins; ++b) {
          if (bins[b].count) rbox.grow(bins[b].box);
          rcount += bins[b].count;
        }
        if (!lcount || !rcount) continue;
        double cost = lcount * lbox.half_area() + rcount * rbox.half_area();
        if (cost < best_cost) {
          best_cost = cost;
          best_split = split;
        }
      }
      if (best_split > 0) {
        auto it = std::stable_partition(order_.begin() + begin, order_.begin() + end,
                                        [&](int tri) { return bin_of(tri) < best_split; });
        mid = int(it - order_.begin());
        if (mid == begin || mid == end) mid = begin + count / 2;
      }
    }
    if (mid == begin + count / 2) {
      std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                       [&](int a, int b) {
                         return centers[a][axis] < centers[b][axis] ||
                                (centers[a][axis] == centers[b][axis] && a < b);
                       });
    }
    int left = build_range(begin, mid, boxes, centers);
    int right = build_range(mid, end, boxes, centers);
    nodes_[node_index].left = left;
    nodes_[node_index].right = right;
    return node_index;
  }

  const TriangleMesh* mesh_ = nullptr;
  std::vector<Node> nodes_;
  std::vector<int> order_;
};

// Orthonormal, right-handed shading basis at a hit. The interpolated
// normal is flipped onto the geometric normal's hemisphere; a degenerate
// interpolation falls back to the geometric normal.
inline Frame shading_frame(const Hit& hit) {
  Vec3 n = hit.shading_normal;
  double len = length(n);
  if (len < 1e-12) {
    n = hit.geometric_normal;
  } else {
    n = n / len;
    if (dot(n, hit.geometric_normal) < 0.0) n = -n;
  }
  return Frame::from_normal(n);
}

}  // namespace retrace

// Copyright (c) 2026 The retrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "retrace/bvh.hpp"
#include "retrace/math.hpp"

namespace retrace {

// One observation: pinhole camera plus its target image reference.
// Camera space looks down -Z with +Y up; camera_to_world is row-major.
struct CameraView {
  int width = 0, height = 0;
  double fov_deg = 35.0;  // vertical field of view
  Mat4 camera_to_world;
  std::string image_path;
  int view_id = 0;

  void validate() const {
    if (width <= 0 || height <= 0) throw Error("view: image size must be positive");
    if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw Error("view: fov must be in (0, 180)");
    // rotation block orthonormality
    Vec3 r0{camera_to_world.at(0, 0), camera_to_world.at(0, 1), camera_to_world.at(0, 2)};
    Vec3 r1{camera_to_world.at(1, 0), camera_to_world.at(1, 1), camera_to_world.at(1, 2)};
    Vec3 r2{camera_to_world.at(2, 0), camera_to_world.at(2, 1), camera_to_world.at(2, 2)};
    double err = std::abs(length(r0) - 1.0) + std::abs(length(r1) - 1.0) +
                 std::abs(length(r2) - 1.0) + std::abs(dot(r0, r1)) + std::abs(dot(r1, r2)) +
                 std::abs(dot(r0, r2));
    if (err > 6e-6) throw Error("view: camera rotation is not orthonormal");
  }

  // jitter in [0,1)^2 positions the sample inside the pixel
  Ray generate_ray(int px, int py, const Vec2& jitter) const {
    double tan_half = std::tan(0.5 * radians(fov_deg));
    double aspect = double(width) / height;
    double sx = (2.0 * (px + jitter.x) / width - 1.0) * tan_half * aspect;
    double sy = (1.0 - 2.0 * (py + jitter.y) / height) * tan_half;
    Ray ray;
    ray.origin = camera_to_world.translation();
    ray.dir = normalize(camera_to_world.transform_dir({sx, sy, -1.0}));
    return ray;
  }

  static Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
    Vec3 forward = normalize(target - eye);  // camera -Z
    Vec3 right = normalize(cross(forward, up));
    Vec3 true_up = cross(right, forward);
    Mat4 m;
    // columns are the camera axes expressed in world space
    m.at(0, 0) = right.x;   m.at(0, 1) = true_up.x;  m.at(0, 2) = -forward.x;  m.at(0, 3) = eye.x;
    m.at(1, 0) = right.y;   m.at(1, 1) = true_up.y;  m.at(1, 2) = -forward.y;  m.at(1, 3) = eye.y;
    m.at(2, 0) = right.z;   m.at(2, 1) = true_up.z;  m.at(2, 2) = -forward.z;  m.at(2, 3) = eye.z;
    return m;
  }
};

}  // namespace retrace

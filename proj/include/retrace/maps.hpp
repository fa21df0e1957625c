// Copyright (c) 2026 The retrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "retrace/atlas.hpp"
#include "retrace/brdf.hpp"
#include "retrace/image.hpp"

namespace retrace {

// The three optimizable reflectance grids, all sharing the atlas UV space
// and one square resolution.
struct ReflectanceMaps {
  Image diffuse;
  Image specular;
  ScalarGrid roughness;

  ReflectanceMaps() = default;
  explicit ReflectanceMaps(int resolution, Vec3 diffuse_init = Vec3(0.25, 0.25, 0.25),
                           Vec3 specular_init = Vec3(0.04, 0.04, 0.04), double roughness_init = 0.5)
      : diffuse(resolution, resolution, diffuse_init),
        specular(resolution, resolution, specular_init),
        roughness(resolution, resolution, roughness_init) {}

  int resolution() const { return diffuse.width(); }

  BrdfParams sample(const Footprint& fp) const {
    BrdfParams p;
    p.diffuse = sample_bilinear(diffuse, fp);
    p.specular_f0 = sample_bilinear(specular, fp);
    p.roughness = clamp(sample_bilinear(roughness, fp), kAlphaMin, 1.0);
    return p;
  }
};

}  // namespace retrace

// Copyright (c) 2026 The retrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "retrace/image.hpp"

namespace retrace {

// Which optimizable grids an operation touches.
struct MapSet {
  bool diffuse = true;
  bool specular = true;
  bool roughness = true;
  bool environment = true;

  static MapSet reflectance() { return {true, true, true, false}; }
  static MapSet diffuse_only() { return {true, false, false, false}; }
  static MapSet stage1() { return {true, false, false, true}; }
  static MapSet all() { return {true, true, true, true}; }
};

// Per-texel loss derivative accumulators, one grid per optimizable map.
struct GradientBuffers {
  Image diffuse;
  Image specular;
  ScalarGrid roughness;
  Image environment;

  GradientBuffers() = default;
  GradientBuffers(int map_resolution, int env_width, int env_height)
      : diffuse(map_resolution, map_resolution),
        specular(map_resolution, map_resolution),
        roughness(map_resolution, map_resolution),
        environment(env_width, env_height) {}

  void zero() {
    diffuse.fill(Vec3());
    specular.fill(Vec3());
    roughness.fill(0.0);
    environment.fill(Vec3());
  }

  // this += other * weight, in fixed entry order
  void add_scaled(const GradientBuffers& other, double weight) {
    for (size_t i = 0; i < diffuse.size(); ++i) diffuse[i] += other.diffuse[i] * weight;
    for (size_t i = 0; i < specular.size(); ++i) specular[i] += other.specular[i] * weight;
    for (size_t i = 0; i < roughness.size(); ++i) roughness[i] += other.roughness[i] * weight;
    for (size_t i = 0; i < environment.size(); ++i)
      environment[i] += other.environment[i] * weight;
  }

  double max_abs(const MapSet& maps) const {
    double m = 0.0;
    auto scan_rgb = [&m](const Image& img) {
      for (size_t i = 0; i < img.size(); ++i)
        m = std::max({m, std::abs(img[i].x), std::abs(img[i].y), std::abs(img[i].z)});
    };
    if (maps.diffuse) scan_rgb(diffuse);
    if (maps.specular) scan_rgb(specular);
    if (maps.roughness)
      for (size_t i = 0; i < roughness.size(); ++i) m = std::max(m, std::abs(roughness[i]));
    if (maps.environment) scan_rgb(environment);
    return m;
  }

  bool all_finite() const {
    for (size_t i = 0; i < diffuse.size(); ++i)
      if (!is_finite(diffuse[i]) || !is_finite(specular[i]) || !std::isfinite(roughness[i]))
        return false;
    for (size_t i = 0; i < environment.size(); ++i)
      if (!is_finite(environment[i])) return false;
    return true;
  }
};

}  // namespace retrace

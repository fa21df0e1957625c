// Copyright (c) 2026 The retrace Authors
// SPDX-License-Identifier: Apache-2.0
//
// First/second-moment adaptive update with bias correction, plus the
// feasibility projection: reflectance in [0,1], roughness in
// [kAlphaMin, 1], environment radiance in [0, inf). Non-finite gradient
// entries are skipped and counted instead of poisoning the state.

#pragma once

#include <cstdint>

#include "retrace/brdf.hpp"
#include "retrace/envmap.hpp"
#include "retrace/gradients.hpp"
#include "retrace/maps.hpp"

namespace retrace {

struct AdamConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool energy_cap = false;  // project per-channel diffuse + F0 <= 1
};

struct OptimizerState {
  GradientBuffers m;  // first moments, same shapes as the parameters
  GradientBuffers v;  // second moments
  int64_t step_count = 0;
  int64_t skipped_nonfinite = 0;
  AdamConfig config;

  OptimizerState() = default;
  OptimizerState(int map_resolution, int env_width, int env_height, AdamConfig cfg = {})
      : m(map_resolution, env_width, env_height),
        v(map_resolution, env_width, env_height),
        config(cfg) {}
};

namespace detail {

struct AdamScalar {
  double inv_bc1, inv_bc2, lr, beta1, beta2, eps;

  double update(double& m, double& v, double g) const {
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g * g;
    return lr * (m * inv_bc1) / (std::sqrt(v * inv_bc2) + eps);
  }
};

}  // namespace detail

// One update of every trainable map; non-trainable parameters and their
// moments are untouched.
inline void adam_step(OptimizerState& state, ReflectanceMaps& maps, EnvironmentMap& env,
                      const GradientBuffers& grads, const MapSet& trainable) {
  state.step_count++;
  const AdamConfig& c = state.config;
  detail::AdamScalar rule{1.0 / (1.0 - std::pow(c.beta1, double(state.step_count))),
                          1.0 / (1.0 - std::pow(c.beta2, double(state.step_count))),
                          c.learning_rate, c.beta1, c.beta2, c.epsilon};

  auto update_rgb = [&](Image& param, Image& m, Image& v, const Image& g, double lo, double hi) {
    for (size_t i = 0; i < param.size(); ++i) {
      for (int ch = 0; ch < 3; ++ch) {
        double gv = g[i][ch];
        if (!std::isfinite(gv)) {
          state.skipped_nonfinite++;
          continue;
        }
        param[i][ch] = clamp(param[i][ch] - rule.update(m[i][ch], v[i][ch], gv), lo, hi);
      }
    }
  };

  if (trainable.diffuse) update_rgb(maps.diffuse, state.m.diffuse, state.v.diffuse, grads.diffuse, 0.0, 1.0);
  if (trainable.specular)
    update_rgb(maps.specular, state.m.specular, state.v.specular, grads.specular, 0.0, 1.0);
  if (trainable.roughness) {
    for (size_t i = 0; i < maps.roughness.size(); ++i) {
      double gv = grads.roughness[i];
      if (!std::isfinite(gv)) {
        state.skipped_nonfinite++;
        continue;
      }
      maps.roughness[i] =
          clamp(maps.roughness[i] - rule.update(state.m.roughness[i], state.v.roughness[i], gv),
                kAlphaMin, 1.0);
    }
  }
  if (trainable.environment) {
    Image& values = env.values();
    for (size_t i = 0; i < values.size(); ++i) {
      for (int ch = 0; ch < 3; ++ch) {
        double gv = grads.environment[i][ch];
        if (!std::isfinite(gv)) {
          state.skipped_nonfinite++;
          continue;
        }
        values[i][ch] = std::max(
            0.0, values[i][ch] - rule.update(state.m.environment[i][ch], state.v.environment[i][ch], gv));
      }
    }
  }

  if (c.energy_cap && (trainable.diffuse || trainable.specular)) {
    for (size_t i = 0; i < maps.diffuse.size(); ++i) {
      for (int ch = 0; ch < 3; ++ch) {
        double excess = maps.diffuse[i][ch] + maps.specular[i][ch] - 1.0;
        if (excess > 0.0) {
          maps.diffuse[i][ch] = clamp(maps.diffuse[i][ch] - 0.5 * excess, 0.0, 1.0);
          maps.specular[i][ch] = clamp(maps.specular[i][ch] - 0.5 * excess, 0.0, 1.0);
        }
      }
    }
  }
}

}  // namespace retrace

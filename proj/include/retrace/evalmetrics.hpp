// Copyright (c) 2026 The retrace Authors
// SPDX-License-Identifier: Apache-2.0
//
// Evaluation protocols: masked image RMSE, per-map RMSE against ground
// truth on covered texels, and the relighting/entanglement report
// (re-render the recovered reflectance under a novel environment and
// measure how much the error grows).

#pragma once

#include <vector>

#include "retrace/render.hpp"

namespace retrace {

// Root of the mean squared error over masked pixels and channels.
inline double eval_rmse(const Image& rendered, const Image& target, const MaskGrid& mask) {
  if (rendered.width() != target.width() || rendered.height() != target.height())
    throw Error("eval_rmse: image dimensions differ");
  double sum = 0.0;
  int64_t count = 0;
  for (size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    Vec3 d = rendered[i] - target[i];
    sum += dot(d, d);
    count += 3;
  }
  if (count == 0) throw Error("eval_rmse: empty mask");
  return std::sqrt(sum / double(count));
}

// RMSE between two RGB grids restricted to texels with coverage >= 1.
inline double map_rmse(const Image& candidate, const Image& truth, const Grid<int>& coverage) {
  double sum = 0.0;
  int64_t count = 0;
  for (int y = 0; y < candidate.height(); ++y) {
    for (int x = 0; x < candidate.width(); ++x) {
      if (coverage.at(x, y) < 1) continue;
      Vec3 d = candidate.at(x, y) - truth.at(x, y);
      sum += dot(d, d);
      count += 3;
    }
  }
  return count > 0 ? std::sqrt(sum / double(count)) : 0.0;
}

inline double map_rmse(const ScalarGrid& candidate, const ScalarGrid& truth,
                       const Grid<int>& coverage) {
  double sum = 0.0;
  int64_t count = 0;
  for (int y = 0; y < candidate.height(); ++y) {
    for (int x = 0; x < candidate.width(); ++x) {
      if (coverage.at(x, y) < 1) continue;
      double d = candidate.at(x, y) - truth.at(x, y);
      sum += d * d;
      count += 1;
    }
  }
  return count > 0 ? std::sqrt(sum / double(count)) : 0.0;
}

struct EntanglementReport {
  double train_rmse = 0.0;    // recovered maps under the recovered environment vs targets
  double relight_rmse = 0.0;  // recovered maps vs ground-truth maps, both under the new environment
  double increase_percent = 0.0;
};

// Relighting protocol: optimized reflectance only stays accurate under a
// novel environment if it was actually disentangled from the lighting, so
// the RMSE growth from train_rmse to relight_rmse measures entanglement.
// Requires ground truth, i.e. synthetic fixtures.
inline EntanglementReport eval_entanglement(const Scene& scene,
                                            const std::vector<CameraView>& views,
                                            const std::vector<Image>& targets,
                                            const ReflectanceMaps& opt_maps,
                                            const EnvironmentMap& opt_env,
                                            const ReflectanceMaps& gt_maps,
                                            const EnvironmentMap& env_new, int spp,
                                            uint64_t seed, int max_bounces = 2, int threads = 0) {
  if (views.size() != targets.size() || views.empty())
    throw Error("eval_entanglement: views and targets must align");
  if (gt_maps.resolution() != opt_maps.resolution())
    throw Error("eval_entanglement: ground truth unavailable or mismatched (synthetic fixtures only)");

  RenderOptions test_opts;
  test_opts.spp = spp;
  test_opts.seed = seed;
  test_opts.max_bounces = max_bounces;
  test_opts.threads = threads;
  RenderOptions ref_opts = test_opts;
  ref_opts.seed = mix64(seed ^ 0x5EEDBEEFull);  // independent noise for the reference side

  double train_sum = 0.0, relight_sum = 0.0;
  for (size_t i = 0; i < views.size(); ++i) {
    RenderImage train = render(scene, views[i], opt_maps, opt_env, test_opts);
    train_sum += eval_rmse(train.radiance, targets[i], train.coverage);

    RenderImage reference = render(scene, views[i], gt_maps, env_new, ref_opts);
    RenderImage relit = render(scene, views[i], opt_maps, env_new, test_opts);
    MaskGrid both(reference.coverage.width(), reference.coverage.height(), 0);
    for (size_t p = 0; p < both.size(); ++p)
      both[p] = reference.coverage[p] && relit.coverage[p] ? 1 : 0;
    relight_sum += eval_rmse(relit.radiance, reference.radiance, both);
  }
  EntanglementReport report;
  report.train_rmse = train_sum / double(views.size());
  report.relight_rmse = relight_sum / double(views.size());
  report.increase_percent =
      report.train_rmse > 0.0
          ? 100.0 * (report.relight_rmse - report.train_rmse) / report.train_rmse
          : 0.0;
  return report;
}

}  // namespace retrace

// Copyright (c) 2026 The retrace Authors
// SPDX-License-Identifier: Apache-2.0
//
// Two-step optimization driver. Stage 1 fits diffuse reflectance and the
// environment under the plain reconstruction loss; stage 2 continues with
// all three reflectance maps plus the environment, modulating each view's
// loss by e^consistency. Per epoch: render every view, form per-view
// loss derivatives and gradient buffers, reduce, step.

#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "retrace/adam.hpp"
#include "retrace/grad.hpp"
#include "retrace/loss.hpp"
#include "retrace/render.hpp"

namespace retrace {

struct MvclConfig {
  MvclMode mode = MvclMode::kPerView;
  MapSet maps = MapSet::reflectance();
  size_t memory_budget_bytes = size_t(1) << 30;  // beyond this, replay twice instead of storing
};

struct Schedule {
  int stage1_epochs = 60;
  int stage2_epochs = 60;
  MvclConfig mvcl;
  // stage 1 trains exactly {diffuse, environment}; stage 2 all four sets
  static MapSet stage1_trainable() { return MapSet::stage1(); }
  static MapSet stage2_trainable() { return MapSet::all(); }
};

struct OptimizeOptions {
  Schedule schedule;
  AdamConfig adam;
  int spp = 64;
  int max_bounces = 2;
  uint64_t seed = 1;
  int threads = 0;
  // Supervise primary-miss pixels against the target background; this is
  // what anchors the absolute scale of the environment, which a masked
  // loss cannot separate from the reflectance scale.
  bool background_supervision = true;
  int checkpoint_every = 0;
  std::string out_dir;
  int coverage_probe_spp = 8;
};

struct EpochRecord {
  int epoch = 0;
  int stage = 1;
  std::vector<double> recon;  // per view
  std::vector<double> mvcl;   // per view (empty when off)
  double composite = 0.0;
  double masked_rmse = 0.0;   // mean over views, coverage-masked
};

struct OptimizeResult {
  ReflectanceMaps maps;
  EnvironmentMap environment;
  std::vector<EpochRecord> history;
};

inline void save_reflectance_maps(const std::string& dir, const ReflectanceMaps& maps,
                                  const EnvironmentMap& env) {
  std::filesystem::create_directories(dir);
  exr::write(dir + "/diffuse.exr", maps.diffuse);
  exr::write(dir + "/specular.exr", maps.specular);
  Image rough(maps.roughness.width(), maps.roughness.height());
  for (size_t i = 0; i < rough.size(); ++i) rough[i] = Vec3(maps.roughness[i]);
  exr::write(dir + "/roughness.exr", rough);
  exr::write(dir + "/environment.exr", env.values());
}

inline ReflectanceMaps load_reflectance_maps(const std::string& dir) {
  ReflectanceMaps maps;
  maps.diffuse = exr::read(dir + "/diffuse.exr");
  maps.specular = exr::read(dir + "/specular.exr");
  Image rough = exr::read(dir + "/roughness.exr");
  maps.roughness = ScalarGrid(rough.width(), rough.height());
  for (size_t i = 0; i < rough.size(); ++i) maps.roughness[i] = rough[i].x;
  if (maps.diffuse.width() != maps.specular.width() ||
      maps.diffuse.width() != maps.roughness.width())
    throw Error(dir + ": reflectance maps disagree on resolution");
  return maps;
}

inline void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw Error(path + ": cannot open for writing");
  size_t n_views = history.empty() ? 0 : history.front().recon.size();
  out << "epoch,stage,composite,masked_rmse";
  for (size_t i = 0; i < n_views; ++i) out << ",recon_v" << i;
  for (size_t i = 0; i < n_views; ++i) out << ",mvcl_v" << i;
  out << "\n";
  out.precision(12);
  for (const auto& r : history) {
    out << r.epoch << "," << r.stage << "," << r.composite << "," << r.masked_rmse;
    for (size_t i = 0; i < n_views; ++i) out << "," << r.recon[i];
    for (size_t i = 0; i < n_views; ++i) out << "," << (i < r.mvcl.size() ? r.mvcl[i] : 0.0);
    out << "\n";
  }
}

namespace detail {

inline size_t buffer_bytes(int res, int env_w, int env_h) {
  return (size_t(res) * res * 7 + size_t(env_w) * env_h * 3) * sizeof(double);
}

struct EpochOutputs {
  std::vector<double> recon;
  std::vector<double> mvcl_scalars;
  double composite = 0.0;
  double masked_rmse = 0.0;
};

}  // namespace detail

// One optimization epoch over all views. Exposed separately so tests can
// drive single epochs; run_two_step loops it over both stages.
inline detail::EpochOutputs optimize_epoch(const Scene& scene,
                                           const std::vector<CameraView>& views,
                                           const std::vector<Image>& targets,
                                           ReflectanceMaps& maps, EnvironmentMap& env,
                                           OptimizerState& state, const MapSet& trainable,
                                           const MvclConfig& mvcl_config,
                                           const Grid<int>& coverage, uint64_t epoch_seed,
                                           const OptimizeOptions& opts) {
  const int n_views = int(views.size());
  detail::EpochOutputs out;
  out.recon.resize(n_views);

  env.rebuild_table();

  RenderOptions ropts;
  ropts.spp = opts.spp;
  ropts.max_bounces = opts.max_bounces;
  ropts.threads = opts.threads;

  GradientBuffers total(scene.atlas.resolution, env.width(), env.height());
  total.zero();

  const bool use_mvcl = mvcl_config.mode != MvclMode::kOff && n_views >= 2;
  const bool store_buffers =
      !use_mvcl || size_t(n_views) * detail::buffer_bytes(scene.atlas.resolution, env.width(),
                                                          env.height()) <=
                       mvcl_config.memory_budget_bytes;

  auto render_view = [&](int i, RenderImage& img, ReconLoss& loss) {
    ropts.seed = epoch_seed;
    img = render(scene, views[i], maps, env, ropts);
    MaskGrid loss_mask = opts.background_supervision
                             ? full_mask(views[i].width, views[i].height)
                             : img.coverage;
    loss = recon_loss(img.radiance, targets[i], loss_mask);
  };

  auto masked_rmse_of = [&](const RenderImage& img, int i) {
    double sum = 0.0;
    int64_t count = 0;
    for (size_t p = 0; p < img.coverage.size(); ++p) {
      if (!img.coverage[p]) continue;
      Vec3 d = img.radiance[p] - targets[i][p];
      sum += dot(d, d);
      count += 3;
    }
    return count > 0 ? std::sqrt(sum / double(count)) : 0.0;
  };

  double rmse_sum = 0.0;

  if (store_buffers) {
    std::vector<GradientBuffers> buffers(n_views);
    for (int i = 0; i < n_views; ++i) {
      RenderImage img;
      ReconLoss loss;
      render_view(i, img, loss);
      out.recon[i] = loss.mse;
      rmse_sum += masked_rmse_of(img, i);
      buffers[i] = backward_render(scene, views[i], maps, env, loss.d_pixel, ropts, &img);
    }
    CompositeLoss comp;
    if (use_mvcl) {
      std::vector<const GradientBuffers*> ptrs(n_views);
      for (int i = 0; i < n_views; ++i) ptrs[i] = &buffers[i];
      MvclResult r = mvcl(ptrs, coverage, mvcl_config.maps);
      out.mvcl_scalars = mvcl_config.mode == MvclMode::kPerView
                             ? r.per_view
                             : std::vector<double>(n_views, r.global);
      comp = composite_loss(out.recon,
                            mvcl_config.mode == MvclMode::kPerView
                                ? r.per_view
                                : std::vector<double>{r.global},
                            mvcl_config.mode);
    } else {
      comp = composite_loss(out.recon, {}, MvclMode::kOff);
    }
    for (int i = 0; i < n_views; ++i)
      total.add_scaled(buffers[i], comp.view_weights[i] / double(n_views));
    out.composite = comp.value;
  } else {
    // Replay scheme: pass 1 accumulates the normalized mean, pass 2 the
    // per-view deviations, pass 3 the weighted total. Identical arithmetic
    // order to the stored path, three renders+replays per view instead of
    // one replay.
    std::vector<RenderImage> images(n_views);
    std::vector<ReconLoss> losses(n_views);
    std::vector<double> inv_max(n_views, 0.0);
    GradientBuffers mean_buf(scene.atlas.resolution, env.width(), env.height());
    mean_buf.zero();
    for (int i = 0; i < n_views; ++i) {
      render_view(i, images[i], losses[i]);
      out.recon[i] = losses[i].mse;
      rmse_sum += masked_rmse_of(images[i], i);
      GradientBuffers b =
          backward_render(scene, views[i], maps, env, losses[i].d_pixel, ropts, &images[i]);
      double m = b.max_abs(mvcl_config.maps);
      inv_max[i] = m > 0.0 ? 1.0 / m : 0.0;
      mean_buf.add_scaled(b, inv_max[i]);
    }
    // mean of normalized gradients
    const double inv_n = 1.0 / double(n_views);
    std::vector<double> per_view_acc(n_views, 0.0);
    double global_acc = 0.0;
    int64_t qualifying = 0;
    const int res = scene.atlas.resolution;
    std::vector<GradientBuffers> one(1);
    for (int i = 0; i < n_views; ++i) {
      GradientBuffers b =
          backward_render(scene, views[i], maps, env, losses[i].d_pixel, ropts, nullptr);
      auto dev_term = [&](double g, double mean_sum) {
        double dev = g * inv_max[i] - mean_sum * inv_n;
        double contrib = dev * dev / double(n_views - 1);
        per_view_acc[i] += contrib;
        global_acc += contrib;
      };
      for (int y = 0; y < res; ++y) {
        for (int x = 0; x < res; ++x) {
          if (coverage.at(x, y) < 2) continue;
          size_t idx = size_t(y) * res + x;
          for (int c = 0; c < 3; ++c) {
            if (mvcl_config.maps.diffuse) dev_term(b.diffuse[idx][c], mean_buf.diffuse[idx][c]);
            if (mvcl_config.maps.specular) dev_term(b.specular[idx][c], mean_buf.specular[idx][c]);
          }
          if (mvcl_config.maps.roughness) dev_term(b.roughness[idx], mean_buf.roughness[idx]);
        }
      }
    }
    for (int y = 0; y < res; ++y)
      for (int x = 0; x < res; ++x)
        if (coverage.at(x, y) >= 2)
          qualifying += (mvcl_config.maps.diffuse ? 3 : 0) + (mvcl_config.maps.specular ? 3 : 0) +
                        (mvcl_config.maps.roughness ? 1 : 0);
    double bound = double(n_views) / double(n_views - 1);
    double denom = qualifying > 0 ? double(qualifying) * bound : 1.0;
    double global_scalar = qualifying > 0 ? clamp(global_acc / denom, 0.0, 1.0) : 0.0;
    std::vector<double> per_view(n_views, 0.0);
    for (int i = 0; i < n_views; ++i)
      per_view[i] = qualifying > 0 ? clamp(per_view_acc[i] / denom, 0.0, 1.0) : 0.0;
    out.mvcl_scalars = mvcl_config.mode == MvclMode::kPerView
                           ? per_view
                           : std::vector<double>(n_views, global_scalar);
    CompositeLoss comp = composite_loss(out.recon,
                                        mvcl_config.mode == MvclMode::kPerView
                                            ? per_view
                                            : std::vector<double>{global_scalar},
                                        mvcl_config.mode);
    for (int i = 0; i < n_views; ++i) {
      GradientBuffers b =
          backward_render(scene, views[i], maps, env, losses[i].d_pixel, ropts, nullptr);
      total.add_scaled(b, comp.view_weights[i] / double(n_views));
    }
    out.composite = comp.value;
  }

  out.masked_rmse = rmse_sum / double(n_views);
  adam_step(state, maps, env, total, trainable);
  return out;
}

inline OptimizeResult run_two_step(const Scene& scene, const std::vector<CameraView>& views,
                                   const std::vector<Image>& targets, ReflectanceMaps maps,
                                   EnvironmentMap env, const OptimizeOptions& opts) {
  if (views.empty() || views.size() != targets.size())
    throw Error("run_two_step: views and targets must align");
  if (opts.schedule.mvcl.mode != MvclMode::kOff && views.size() < 2)
    throw Error("run_two_step: the consistency loss needs at least 2 views");

  OptimizeResult result;
  Grid<int> coverage = texel_coverage(scene, views, opts.coverage_probe_spp, opts.seed);

  auto checkpoint = [&](int epoch) {
    if (opts.checkpoint_every <= 0 || opts.out_dir.empty()) return;
    if ((epoch + 1) % opts.checkpoint_every != 0) return;
    std::ostringstream dir;
    dir << opts.out_dir << "/checkpoint_" << std::setfill('0') << std::setw(4) << (epoch + 1);
    save_reflectance_maps(dir.str(), maps, env);
  };

  int nonfinite_streak = 0;
  int epoch = 0;
  for (int stage = 1; stage <= 2; ++stage) {
    const int epochs = stage == 1 ? opts.schedule.stage1_epochs : opts.schedule.stage2_epochs;
    if (epochs <= 0) continue;
    MapSet trainable = stage == 1 ? Schedule::stage1_trainable() : Schedule::stage2_trainable();
    MvclConfig mvcl_config = opts.schedule.mvcl;
    if (stage == 1) mvcl_config.mode = MvclMode::kOff;  // consistency applies in stage 2 only
    OptimizerState state(scene.atlas.resolution, env.width(), env.height(), opts.adam);

    for (int k = 0; k < epochs; ++k, ++epoch) {
      uint64_t epoch_seed = mix64(opts.seed ^ (0xE120FC15ull * uint64_t(epoch + 1)));
      auto outputs = optimize_epoch(scene, views, targets, maps, env, state, trainable,
                                    mvcl_config, coverage, epoch_seed, opts);
      EpochRecord record;
      record.epoch = epoch;
      record.stage = stage;
      record.recon = outputs.recon;
      record.mvcl = outputs.mvcl_scalars;
      record.composite = outputs.composite;
      record.masked_rmse = outputs.masked_rmse;
      result.history.push_back(std::move(record));

      if (!std::isfinite(outputs.composite)) {
        if (++nonfinite_streak >= 3)
          throw Error("run_two_step: loss non-finite for 3 consecutive epochs (epoch " +
                      std::to_string(epoch) + "); check inputs and learning rate");
      } else {
        nonfinite_streak = 0;
      }
      checkpoint(epoch);
    }
  }

  if (!opts.out_dir.empty()) {
    save_reflectance_maps(opts.out_dir + "/final", maps, env);
    write_history_csv(opts.out_dir + "/loss_history.csv", result.history);
  }
  result.maps = std::move(maps);
  result.environment = std::move(env);
  return result;
}

}  // namespace retrace

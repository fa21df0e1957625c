// Copyright (c) 2026 The retrace Authors
// SPDX-License-Identifier: Apache-2.0
//
// Forward Monte-Carlo path tracer: primary visibility, environment
// next-event estimation combined with BRDF sampling by the power
// heuristic, bounded indirect bounces, counter-based random streams.
//
// The core sample routine is shared with the gradient engine through a
// sink template parameter: the backward pass replays the same paths with
// the same random streams and receives every first-hit term's factors.
// Importance sampling (lobe choice, half-vector shape, mixture pdfs and
// MIS weights) reads from a dedicated sampling parameter set that usually
// aliases the evaluated maps; gradient checks keep it fixed while
// perturbing the evaluated values, so divided-out pdfs stay constants.

#pragma once

#include <atomic>
#include <cstdint>

#include "retrace/brdf.hpp"
#include "retrace/camera.hpp"
#include "retrace/envmap.hpp"
#include "retrace/image.hpp"
#include "retrace/maps.hpp"
#include "retrace/parallel.hpp"
#include "retrace/rng.hpp"
#include "retrace/scene.hpp"

namespace retrace {

enum class DirectMode { kMis, kEnvOnly, kBrdfOnly };

struct RenderOptions {
  int spp = 64;
  uint64_t seed = 1;
  int max_bounces = 2;
  DirectMode direct = DirectMode::kMis;
  int threads = 0;  // 0: RETRACE_THREADS env var or hardware
  const ReflectanceMaps* sampling_maps = nullptr;  // defaults to the evaluated maps
};

struct RenderImage {
  Image radiance;
  MaskGrid coverage;        // 1 where every primary sample hit geometry
  Grid<int> sample_count;   // per pixel
  int64_t nonfinite_samples = 0;
  int64_t uv_clamps = 0;
};

namespace detail {

struct NullSink {
  static constexpr bool kActive = false;
  void add_brdf(const Footprint&, const BrdfDerivs&, const Vec3&) {}
  void add_env(const Footprint&, const Vec3&) {}
};

struct TraceContext {
  const Scene* scene;
  const ReflectanceMaps* maps;
  const ReflectanceMaps* sampling;
  const EnvironmentMap* env;
  int max_bounces;
  DirectMode direct;
  std::atomic<int64_t>* uv_clamps = nullptr;
};

inline Vec2 stratified_jitter(int sample, int spp, PathRng& rng) {
  // dims 0 and 1 are always the pixel jitter
  double u0 = rng.next();
  double u1 = rng.next();
  int n = int(std::round(std::sqrt(double(spp))));
  if (n * n != spp) return {u0, u1};
  int sx = sample % n, sy = sample / n;
  return {(sx + u0) / n, (sy + u1) / n};
}

inline Ray spawn_ray(const Scene& scene, const Vec3& position, const Vec3& geo_normal,
                     const Vec3& dir) {
  Ray ray;
  double offset = 1e-4 * scene.scale;
  ray.origin = position + geo_normal * (dot(geo_normal, dir) >= 0.0 ? offset : -offset);
  ray.dir = dir;
  return ray;
}

inline double mis_weight(DirectMode mode, bool nee_side, double p_this, double p_other) {
  switch (mode) {
    case DirectMode::kMis:
      return power_heuristic(p_this, p_other);
    case DirectMode::kEnvOnly:
      return nee_side ? 1.0 : 0.0;
    case DirectMode::kBrdfOnly:
      return nee_side ? 0.0 : 1.0;
  }
  return 0.0;
}

// Radiance scattered from a surface hit towards wo. Gradient sinks only
// see depth-1 terms: deeper-bounce radiance multiplies first-hit factors
// as a detached constant.
template <typename Sink>
Vec3 shade_hit(const TraceContext& ctx, const Hit& hit, const Vec3& wo, int depth, PathRng& rng,
               Sink* sink) {
  Frame frame = shading_frame(hit);
  bool clamped = false;
  Footprint fp = texel_footprint(ctx.scene->atlas, hit.uv, &clamped);
  if (clamped && ctx.uv_clamps) ctx.uv_clamps->fetch_add(1, std::memory_order_relaxed);
  BrdfParams eval_params = ctx.maps->sample(fp);
  BrdfParams sampling_params =
      ctx.sampling == ctx.maps ? eval_params : ctx.sampling->sample(fp);
  const bool sink_here = Sink::kActive && depth == 1;

  Vec3 radiance;

  // environment next-event estimation
  EnvSample light = ctx.env->sample(rng.next2());
  if (light.pdf > 0.0) {
    double ci = dot(frame.n, light.dir);
    if (ci > 0.0) {
      Ray shadow = spawn_ray(*ctx.scene, hit.position, hit.geometric_normal, light.dir);
      if (!ctx.scene->bvh.occluded(shadow)) {
        double bpdf = pdf_brdf(sampling_params, light.dir, wo, frame);
        double weight = mis_weight(ctx.direct, true, light.pdf, bpdf);
        if (weight > 0.0) {
          Vec3 f = eval_brdf(eval_params, light.dir, wo, frame);
          double scale = ci * weight / light.pdf;
          radiance += f * light.radiance * scale;
          if (sink_here) {
            sink->add_brdf(fp, brdf_param_derivatives(eval_params, light.dir, wo, frame),
                           light.radiance * scale);
            sink->add_env(ctx.env->texel_footprint(light.dir), f * scale);
          }
        }
      }
    }
  }

  // BRDF sampling: env contribution on miss, bounded recursion on hit
  double lobe_u = rng.next();
  Vec2 u_brdf = rng.next2();
  BrdfSample bs = sample_brdf(sampling_params, wo, frame, u_brdf, lobe_u);
  if (bs.pdf > 0.0) {
    double ci = dot(frame.n, bs.wi);
    if (ci > 0.0) {
      Vec3 f = eval_brdf(eval_params, bs.wi, wo, frame);
      Ray bounce = spawn_ray(*ctx.scene, hit.position, hit.geometric_normal, bs.wi);
      auto next = ctx.scene->bvh.intersect(bounce);
      if (!next) {
        double lpdf = ctx.env->pdf(bs.wi);
        double weight = mis_weight(ctx.direct, false, bs.pdf, lpdf);
        if (weight > 0.0) {
          Vec3 sky = ctx.env->eval(bs.wi);
          double scale = ci * weight / bs.pdf;
          radiance += f * sky * scale;
          if (sink_here) {
            sink->add_brdf(fp, brdf_param_derivatives(eval_params, bs.wi, wo, frame), sky * scale);
            sink->add_env(ctx.env->texel_footprint(bs.wi), f * scale);
          }
        }
      } else if (depth < ctx.max_bounces) {
        Sink* no_sink = nullptr;
        Vec3 indirect = shade_hit(ctx, *next, -bs.wi, depth + 1, rng, no_sink);
        double scale = ci / bs.pdf;
        radiance += f * indirect * scale;
        if (sink_here)
          sink->add_brdf(fp, brdf_param_derivatives(eval_params, bs.wi, wo, frame),
                         indirect * scale);
      }
    }
  }
  return radiance;
}

// One primary sample. Returns radiance and whether geometry was hit; the
// sink's add_miss receives primary-miss env footprints.
template <typename Sink>
Vec3 trace_primary(const TraceContext& ctx, const CameraView& view, int px, int py, int sample,
                   int spp, uint64_t seed, bool& hit_geometry, Sink* sink) {
  PathRng rng(seed, uint64_t(view.view_id), uint64_t(py) * view.width + px, uint64_t(sample));
  Vec2 jitter = stratified_jitter(sample, spp, rng);
  Ray ray = view.generate_ray(px, py, jitter);
  auto hit = ctx.scene->bvh.intersect(ray);
  if (!hit) {
    hit_geometry = false;
    if constexpr (Sink::kActive) sink->add_miss(ctx.env->texel_footprint(ray.dir));
    return ctx.env->eval(ray.dir);
  }
  hit_geometry = true;
  return shade_hit(ctx, *hit, -ray.dir, 1, rng, sink);
}

}  // namespace detail

// Deterministic for fixed (seed, view, spp): every pixel owns a counter
// stream and its own output slot, so thread count and scheduling cannot
// change the image.
inline RenderImage render(const Scene& scene, const CameraView& view, const ReflectanceMaps& maps,
                          const EnvironmentMap& env, const RenderOptions& opts = {}) {
  RenderImage out;
  out.radiance = Image(view.width, view.height);
  out.coverage = MaskGrid(view.width, view.height, 0);
  out.sample_count = Grid<int>(view.width, view.height, opts.spp);

  std::atomic<int64_t> nonfinite{0};
  std::atomic<int64_t> uv_clamps{0};
  detail::TraceContext ctx{&scene, &maps, opts.sampling_maps ? opts.sampling_maps : &maps,
                           &env, opts.max_bounces, opts.direct, &uv_clamps};

  parallel_for(view.height, [&](int py) {
    detail::NullSink* sink = nullptr;
    for (int px = 0; px < view.width; ++px) {
      Vec3 acc;
      int hits = 0;
      for (int s = 0; s < opts.spp; ++s) {
        bool hit_geometry = false;
        Vec3 value = detail::trace_primary(ctx, view, px, py, s, opts.spp, opts.seed,
                                           hit_geometry, sink);
        if (!is_finite(value)) {
          nonfinite.fetch_add(1, std::memory_order_relaxed);
          value = Vec3();
        }
        acc += value;
        hits += hit_geometry ? 1 : 0;
      }
      out.radiance.at(px, py) = acc / double(opts.spp);
      out.coverage.at(px, py) = hits == opts.spp ? 1 : 0;
    }
  }, opts.threads);

  out.nonfinite_samples = nonfinite.load();
  out.uv_clamps = uv_clamps.load();
  return out;
}

// Number of views whose primary rays deposit nonzero footprint weight on
// each reflectance texel.
inline Grid<int> texel_coverage(const Scene& scene, const std::vector<CameraView>& views,
                                int spp_probe = 8, uint64_t seed = 0) {
  const int res = scene.atlas.resolution;
  Grid<int> counts(res, res, 0);
  MaskGrid seen(res, res, 0);
  for (const auto& view : views) {
    seen.fill(0);
    for (int py = 0; py < view.height; ++py) {
      for (int px = 0; px < view.width; ++px) {
        for (int s = 0; s < spp_probe; ++s) {
          PathRng rng(seed, uint64_t(view.view_id), uint64_t(py) * view.width + px, uint64_t(s));
          Vec2 jitter = detail::stratified_jitter(s, spp_probe, rng);
          auto hit = scene.bvh.intersect(view.generate_ray(px, py, jitter));
          if (!hit) continue;
          Footprint fp = texel_footprint(scene.atlas, hit->uv);
          for (int k = 0; k < 4; ++k)
            if (fp.w[k] > 0.0) seen.at(fp.x[k], fp.y[k]) = 1;
        }
      }
    }
    for (size_t i = 0; i < seen.size(); ++i) counts[i] += seen[i];
  }
  return counts;
}

}  // namespace retrace

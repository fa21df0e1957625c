// Copyright (c) 2026 The retrace Authors
// SPDX-License-Identifier: Apache-2.0
//
// Gradient engine. backward_render replays the forward paths with the
// identical random streams and accumulates, for every first-hit direct
// lighting term, dL/dpixel x d(term)/d(texel) into the bilinear
// footprints of the hit's reflectance texels and the sampled environment
// directions' texels. Indirect-bounce radiance multiplies first-hit
// factors as a detached constant. Memory stays O(image + maps): nothing
// is taped.
//
// Accumulation is deterministic for any thread count: each row band
// collects its splats locally in pixel order and bands are merged
// serially in band order, so every texel sees the same addition sequence.

#pragma once

#include <algorithm>
#include <unordered_map>
#include <vector>

#include "retrace/loss.hpp"
#include "retrace/render.hpp"

namespace retrace {

namespace detail {

struct BandSink {
  static constexpr bool kActive = true;
  Vec3 weight;  // dL/dpixel / spp for the sample being replayed
  std::unordered_map<uint32_t, Vec3> diffuse, specular, env;
  std::unordered_map<uint32_t, double> roughness;
  int res = 0, env_w = 0;

  void add_brdf(const Footprint& fp, const BrdfDerivs& d, const Vec3& coef) {
    Vec3 w = weight * coef;
    Vec3 gd = w * d.d_diffuse;
    Vec3 gs = w * d.d_specular;
    double gr = dot(w, d.d_roughness);
    for (int k = 0; k < 4; ++k) {
      if (fp.w[k] == 0.0) continue;
      uint32_t idx = uint32_t(fp.y[k]) * res + fp.x[k];
      diffuse[idx] += gd * fp.w[k];
      specular[idx] += gs * fp.w[k];
      roughness[idx] += gr * fp.w[k];
    }
  }
  void add_env(const Footprint& fp, const Vec3& coef) {
    Vec3 w = weight * coef;
    for (int k = 0; k < 4; ++k) {
      if (fp.w[k] == 0.0) continue;
      env[uint32_t(fp.y[k]) * env_w + fp.x[k]] += w * fp.w[k];
    }
  }
  void add_miss(const Footprint& fp) { add_env(fp, Vec3(1, 1, 1)); }
};

}  // namespace detail

// dL_dpixel is the loss derivative image from recon_loss (or any per-pixel
// derivative). seed/spp/max_bounces must match the forward render that
// produced it; when the forward image is passed, the replayed coverage is
// checked against it and a mismatch raises an internal-consistency error.
inline GradientBuffers backward_render(const Scene& scene, const CameraView& view,
                                       const ReflectanceMaps& maps, const EnvironmentMap& env,
                                       const Image& dL_dpixel, const RenderOptions& opts,
                                       const RenderImage* forward = nullptr) {
  if (dL_dpixel.width() != view.width || dL_dpixel.height() != view.height)
    throw Error("backward_render: derivative image size mismatch");

  GradientBuffers grads(scene.atlas.resolution, env.width(), env.height());

  detail::TraceContext ctx{&scene, &maps, opts.sampling_maps ? opts.sampling_maps : &maps,
                           &env, opts.max_bounces, opts.direct, nullptr};

  constexpr int kBandRows = 8;
  const int bands = (view.height + kBandRows - 1) / kBandRows;
  std::vector<detail::BandSink> sinks(bands);
  std::atomic<int64_t> mismatches{0};

  parallel_for(bands, [&](int band) {
    detail::BandSink& sink = sinks[band];
    sink.res = scene.atlas.resolution;
    sink.env_w = env.width();
    const int y0 = band * kBandRows;
    const int y1 = std::min(view.height, y0 + kBandRows);
    for (int py = y0; py < y1; ++py) {
      for (int px = 0; px < view.width; ++px) {
        Vec3 dl = dL_dpixel.at(px, py);
        bool need_check = forward != nullptr;
        if (dl == Vec3() && !need_check) continue;  // no derivative, no splat
        sink.weight = dl / double(opts.spp);
        int hits = 0;
        for (int s = 0; s < opts.spp; ++s) {
          bool hit_geometry = false;
          detail::trace_primary(ctx, view, px, py, s, opts.spp, opts.seed, hit_geometry, &sink);
          hits += hit_geometry ? 1 : 0;
        }
        if (need_check) {
          uint8_t covered = hits == opts.spp ? 1 : 0;
          if (covered != forward->coverage.at(px, py))
            mismatches.fetch_add(1, std::memory_order_relaxed);
        }
      }
    }
  }, opts.threads);

  if (mismatches.load() > 0)
    throw Error("backward_render: replay does not match the forward pass on " +
                std::to_string(mismatches.load()) +
                " pixels; forward and backward inputs must be identical");

  // serial merge in band order
  for (const auto& sink : sinks) {
    for (const auto& [idx, v] : sink.diffuse) grads.diffuse[idx] += v;
    for (const auto& [idx, v] : sink.specular) grads.specular[idx] += v;
    for (const auto& [idx, v] : sink.roughness) grads.roughness[idx] += v;
    for (const auto& [idx, v] : sink.env) grads.environment[idx] += v;
  }
  return grads;
}

inline MaskGrid full_mask(int width, int height) { return MaskGrid(width, height, 1); }

struct GradCheckEntry {
  std::string map;
  int x = 0, y = 0, channel = 0;
  double analytic = 0.0, fd = 0.0, rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  double p95_rel_err = 0.0;
  double loss = 0.0;
};

struct GradCheckOptions {
  int per_map = 20;
  double step = 1e-3;
  RenderOptions render;
  MapSet maps = MapSet::all();
};

// Central finite differences of the full rendered loss against the
// analytic buffers, over covered texels stratified across maps. Both FD
// renders share the seed and the unperturbed sampling distributions with
// the analytic side, so Monte-Carlo noise cancels instead of masking
// estimator bugs.
inline GradCheckReport gradcheck(const Scene& scene, const CameraView& view, const Image& target,
                                 const ReflectanceMaps& maps, const EnvironmentMap& env,
                                 const GradCheckOptions& opts) {
  if (!(opts.step > 0.0)) throw Error("gradcheck: perturbation step must be > 0");

  MaskGrid mask = full_mask(view.width, view.height);
  RenderImage base = render(scene, view, maps, env, opts.render);
  ReconLoss loss = recon_loss(base.radiance, target, mask);
  GradientBuffers analytic =
      backward_render(scene, view, maps, env, loss.d_pixel, opts.render, &base);
  Grid<int> coverage = texel_coverage(scene, {view}, 8, opts.render.seed);

  GradCheckReport report;
  report.loss = loss.mse;

  RenderOptions fd_opts = opts.render;
  fd_opts.sampling_maps = &maps;  // freeze importance sampling at the base point

  auto fd_loss = [&](const ReflectanceMaps& m, const EnvironmentMap& e) {
    RenderImage img = render(scene, view, m, e, fd_opts);
    return recon_loss(img.radiance, target, mask).mse;
  };

  struct Candidate {
    double mag;
    uint32_t idx;
    int channel;
  };
  auto pick = [&](std::vector<Candidate>& cands) {
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      return a.mag > b.mag || (a.mag == b.mag && a.idx < b.idx);
    });
    std::vector<Candidate> out;
    if (cands.empty()) return out;
    // spread the probes over the stronger half of the gradient spectrum
    size_t span = std::max<size_t>(1, cands.size() / 2);
    size_t stride = std::max<size_t>(1, span / size_t(opts.per_map));
    for (size_t i = 0; i < span && out.size() < size_t(opts.per_map); i += stride)
      out.push_back(cands[i]);
    return out;
  };

  auto strongest_channel = [](const Vec3& g) {
    int c = 0;
    if (std::abs(g.y) > std::abs(g[c])) c = 1;
    if (std::abs(g.z) > std::abs(g[c])) c = 2;
    return c;
  };

  auto probe_reflectance = [&](const char* name, const Image* rgb, const ScalarGrid* scalar) {
    std::vector<Candidate> cands;
    const int res = scene.atlas.resolution;
    for (int y = 0; y < res; ++y) {
      for (int x = 0; x < res; ++x) {
        if (coverage.at(x, y) < 1) continue;
        uint32_t idx = uint32_t(y) * res + x;
        double mag;
        int ch = 0;
        if (rgb) {
          ch = strongest_channel((*rgb)[idx]);
          mag = std::abs((*rgb)[idx][ch]);
        } else {
          mag = std::abs((*scalar)[idx]);
        }
        if (mag > 1e-14) cands.push_back({mag, idx, ch});
      }
    }
    for (const Candidate& c : pick(cands)) {
      ReflectanceMaps plus = maps, minus = maps;
      double a;
      if (std::string(name) == "diffuse") {
        plus.diffuse[c.idx][c.channel] += opts.step;
        minus.diffuse[c.idx][c.channel] -= opts.step;
        a = analytic.diffuse[c.idx][c.channel];
      } else if (std::string(name) == "specular") {
        plus.specular[c.idx][c.channel] += opts.step;
        minus.specular[c.idx][c.channel] -= opts.step;
        a = analytic.specular[c.idx][c.channel];
      } else {
        plus.roughness[c.idx] += opts.step;
        minus.roughness[c.idx] -= opts.step;
        a = analytic.roughness[c.idx];
      }
      double fd = (fd_loss(plus, env) - fd_loss(minus, env)) / (2.0 * opts.step);
      GradCheckEntry entry;
      entry.map = name;
      entry.x = int(c.idx % scene.atlas.resolution);
      entry.y = int(c.idx / scene.atlas.resolution);
      entry.channel = rgb ? c.channel : 0;
      entry.analytic = a;
      entry.fd = fd;
      entry.rel_err = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-12});
      report.entries.push_back(entry);
    }
  };

  if (opts.maps.diffuse) probe_reflectance("diffuse", &analytic.diffuse, nullptr);
  if (opts.maps.specular) probe_reflectance("specular", &analytic.specular, nullptr);
  if (opts.maps.roughness) probe_reflectance("roughness", nullptr, &analytic.roughness);

  if (opts.maps.environment) {
    std::vector<Candidate> cands;
    for (int y = 0; y < env.height(); ++y) {
      for (int x = 0; x < env.width(); ++x) {
        uint32_t idx = uint32_t(y) * env.width() + x;
        int ch = strongest_channel(analytic.environment[idx]);
        double mag = std::abs(analytic.environment[idx][ch]);
        if (mag > 1e-14) cands.push_back({mag, idx, ch});
      }
    }
    for (const Candidate& c : pick(cands)) {
      EnvironmentMap plus = env, minus = env;  // copies keep the frozen table
      plus.values()[c.idx][c.channel] += opts.step;
      minus.values()[c.idx][c.channel] -= opts.step;
      double fd = (fd_loss(maps, plus) - fd_loss(maps, minus)) / (2.0 * opts.step);
      double a = analytic.environment[c.idx][c.channel];
      GradCheckEntry entry;
      entry.map = "environment";
      entry.x = int(c.idx % env.width());
      entry.y = int(c.idx / env.width());
      entry.channel = c.channel;
      entry.analytic = a;
      entry.fd = fd;
      entry.rel_err = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-12});
      report.entries.push_back(entry);
    }
  }

  std::vector<double> errs;
  errs.reserve(report.entries.size());
  for (const auto& e : report.entries) errs.push_back(e.rel_err);
  if (!errs.empty()) {
    std::sort(errs.begin(), errs.end());
    report.max_rel_err = errs.back();
    size_t p95 = size_t(std::ceil(0.95 * double(errs.size())));
    report.p95_rel_err = errs[std::min(errs.size() - 1, p95 == 0 ? 0 : p95 - 1)];
  }
  return report;
}

inline void write_gradcheck_csv(std::ostream& os, const GradCheckReport& report) {
  os << "map,x,y,channel,analytic,fd,rel_err\n";
  os.precision(12);
  for (const auto& e : report.entries)
    os << e.map << "," << e.x << "," << e.y << "," << e.channel << "," << e.analytic << ","
       << e.fd << "," << e.rel_err << "\n";
}

}  // namespace retrace

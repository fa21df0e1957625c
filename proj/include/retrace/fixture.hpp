// Copyright (c) 2026 The retrace Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic fixtures: a UV sphere or revolved vase with procedural
// ground-truth reflectance maps, an analytic sky, a camera ring and
// target images rendered by this toolkit itself at high sample counts.
// Every byte a fixture writes can be re-derived from (kind, seed).

#pragma once

#include <filesystem>

#include "retrace/io_png.hpp"
#include "retrace/optimize.hpp"
#include "retrace/render.hpp"
#include "retrace/scene.hpp"

namespace retrace {

enum class FixtureKind { kLambertianSphere, kSpecularVase, kMixedMaterial };

inline const char* to_string(FixtureKind k) {
  switch (k) {
    case FixtureKind::kLambertianSphere: return "lambertian-sphere";
    case FixtureKind::kSpecularVase: return "specular-vase-like";
    case FixtureKind::kMixedMaterial: return "mixed-material";
  }
  return "?";
}

inline FixtureKind fixture_kind_from_string(const std::string& s) {
  if (s == "lambertian-sphere") return FixtureKind::kLambertianSphere;
  if (s == "specular-vase-like") return FixtureKind::kSpecularVase;
  if (s == "mixed-material") return FixtureKind::kMixedMaterial;
  throw Error("unknown fixture kind '" + s +
              "' (expected lambertian-sphere | specular-vase-like | mixed-material)");
}

struct FixtureOptions {
  int n_views = 16;
  uint64_t seed = 1;
  int image_size = 64;
  int map_resolution = 256;
  int env_height = 32;
  int target_spp = 1024;
  int max_bounces = 2;
  double fov_deg = 35.0;
  double cone_deg = 60.0;  // tighter than the CLI default: sphere caps distort less
  int padding = 2;
  int threads = 0;
};

inline TriangleMesh make_uv_sphere(int segments = 48, int rings = 24, double radius = 1.0) {
  TriangleMesh mesh;
  mesh.positions.push_back({0, radius, 0});
  for (int r = 1; r < rings; ++r) {
    double theta = kPi * r / rings;
    for (int s = 0; s < segments; ++s) {
      double phi = kTwoPi * s / segments;
      mesh.positions.push_back({radius * std::sin(theta) * std::cos(phi), radius * std::cos(theta),
                                radius * std::sin(theta) * std::sin(phi)});
    }
  }
  mesh.positions.push_back({0, -radius, 0});
  const int bottom = int(mesh.positions.size()) - 1;
  auto ring_vertex = [&](int r, int s) { return 1 + (r - 1) * segments + (s % segments); };
  for (int s = 0; s < segments; ++s)
    mesh.triangles.push_back({0, ring_vertex(1, s + 1), ring_vertex(1, s)});
  for (int r = 1; r + 1 < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      int a = ring_vertex(r, s), b = ring_vertex(r, s + 1);
      int c = ring_vertex(r + 1, s), d = ring_vertex(r + 1, s + 1);
      mesh.triangles.push_back({a, b, d});
      mesh.triangles.push_back({a, d, c});
    }
  }
  for (int s = 0; s < segments; ++s)
    mesh.triangles.push_back({bottom, ring_vertex(rings - 1, s), ring_vertex(rings - 1, s + 1)});
  mesh.normals.resize(mesh.positions.size());
  for (size_t i = 0; i < mesh.positions.size(); ++i)
    mesh.normals[i] = normalize(mesh.positions[i]);
  return mesh;
}

// Closed solid of revolution with a waist, so parts of the surface see
// each other (unlike the convex sphere).
inline TriangleMesh make_vase(int segments = 48, int rings = 24) {
  auto profile = [](double h) {  // h in [0,1]
    return 0.45 + 0.2 * std::sin(kPi * h) - 0.18 * std::sin(kPi * h * 2.0 - 0.4);
  };
  TriangleMesh mesh;
  mesh.positions.push_back({0, 0.85, 0});
  for (int r = 1; r < rings; ++r) {
    double h = 1.0 - double(r) / rings;
    double radius = profile(h);
    double y = 1.7 * h - 0.85;
    for (int s = 0; s < segments; ++s) {
      double phi = kTwoPi * s / segments;
      mesh.positions.push_back({radius * std::cos(phi), y, radius * std::sin(phi)});
    }
  }
  mesh.positions.push_back({0, -0.85, 0});
  const int bottom = int(mesh.positions.size()) - 1;
  auto ring_vertex = [&](int r, int s) { return 1 + (r - 1) * segments + (s % segments); };
  for (int s = 0; s < segments; ++s)
    mesh.triangles.push_back({0, ring_vertex(1, s + 1), ring_vertex(1, s)});
  for (int r = 1; r + 1 < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      int a = ring_vertex(r, s), b = ring_vertex(r, s + 1);
      int c = ring_vertex(r + 1, s), d = ring_vertex(r + 1, s + 1);
      mesh.triangles.push_back({a, b, d});
      mesh.triangles.push_back({a, d, c});
    }
  }
  for (int s = 0; s < segments; ++s)
    mesh.triangles.push_back({bottom, ring_vertex(rings - 1, s), ring_vertex(rings - 1, s + 1)});
  compute_vertex_normals(mesh);
  return mesh;
}

// Analytic sky: horizon/zenith/ground gradient plus one smooth sun lobe.
struct SkyConfig {
  Vec3 zenith{0.16, 0.28, 0.52};
  Vec3 horizon{0.55, 0.62, 0.75};
  Vec3 ground{0.23, 0.19, 0.16};
  Vec3 sun_color{4.2, 4.0, 3.6};
  Vec3 sun_dir{0.5, 0.7, 0.35};
  double sun_sharpness = 0.05;

  static SkyConfig training() { return {}; }
  static SkyConfig morning() {
    SkyConfig s;
    s.zenith = {0.20, 0.30, 0.48};
    s.horizon = {0.80, 0.62, 0.45};
    s.sun_color = {4.5, 3.4, 2.2};
    s.sun_dir = {0.9, 0.22, 0.1};
    return s;
  }
  static SkyConfig evening() {
    SkyConfig s;
    s.zenith = {0.10, 0.12, 0.28};
    s.horizon = {0.65, 0.32, 0.20};
    s.sun_color = {3.8, 1.9, 0.9};
    s.sun_dir = {-0.85, 0.18, -0.3};
    return s;
  }

  Vec3 eval(const Vec3& dir) const {
    double y = clamp(dir.y, -1.0, 1.0);
    Vec3 base = y >= 0.0 ? lerp(horizon, zenith, std::pow(y, 0.7))
                         : lerp(horizon, ground, std::min(1.0, -2.0 * y));
    double alignment = dot(normalize(Vec3(sun_dir)), dir);
    return base + sun_color * std::exp((alignment - 1.0) / sun_sharpness);
  }
};

inline Image bake_sky(const SkyConfig& sky, int width, int height) {
  Image img(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      img.at(x, y) = sky.eval(EnvironmentMap::uv_to_dir({(x + 0.5) / width, (y + 0.5) / height}));
  return img;
}

namespace detail {

// Grow baked values into the gutters so bilinear taps near chart borders
// read plausible neighbors instead of initialization values.
template <typename T>
void dilate(Grid<T>& img, MaskGrid& filled, int passes) {
  const int w = img.width(), h = img.height();
  for (int pass = 0; pass < passes; ++pass) {
    MaskGrid next = filled;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (filled.at(x, y)) continue;
        for (int dy = -1; dy <= 1; ++dy) {
          bool done = false;
          for (int dx = -1; dx <= 1; ++dx) {
            int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            if (!filled.at(nx, ny)) continue;
            img.at(x, y) = img.at(nx, ny);
            next.at(x, y) = 1;
            done = true;
            break;
          }
          if (done) break;
        }
      }
    }
    filled = std::move(next);
  }
}

inline int checker(const Vec3& p, double frequency) {
  int c = int(std::floor(p.x * frequency)) + int(std::floor(p.y * frequency)) +
          int(std::floor(p.z * frequency));
  return ((c % 2) + 2) % 2;
}

}  // namespace detail

// Procedural ground-truth maps evaluated at each texel's surface point.
// Values stay inside (0,1) so optimization never starts pinned at a bound.
inline ReflectanceMaps bake_ground_truth_maps(const TriangleMesh& mesh, int resolution,
                                              FixtureKind kind, int dilate_passes) {
  auto surface = rasterize_atlas(mesh, resolution);
  ReflectanceMaps maps(resolution);
  MaskGrid filled(resolution, resolution, 0);
  for (int y = 0; y < resolution; ++y) {
    for (int x = 0; x < resolution; ++x) {
      const TexelSurface& s = surface.at(x, y);
      if (s.triangle < 0) continue;
      filled.at(x, y) = 1;
      Vec3 diffuse, f0;
      double rough;
      int check = detail::checker(s.position, 3.0);
      int band = (int(std::floor((s.position.y + 2.0) * 4.0)) % 2 + 2) % 2;
      switch (kind) {
        case FixtureKind::kLambertianSphere:
          diffuse = check ? Vec3(0.70, 0.24, 0.20) : Vec3(0.20, 0.52, 0.68);
          f0 = Vec3(0, 0, 0);
          rough = 0.5;
          break;
        case FixtureKind::kSpecularVase:
          diffuse = Vec3(0.06, 0.06, 0.08);
          f0 = band ? Vec3(0.45, 0.40, 0.34) : Vec3(0.22, 0.22, 0.24);
          rough = band ? 0.18 : 0.42;
          break;
        case FixtureKind::kMixedMaterial:
          diffuse = check ? Vec3(0.62, 0.30, 0.22) : Vec3(0.22, 0.46, 0.60);
          f0 = band ? Vec3(0.30, 0.28, 0.25) : Vec3(0.06, 0.06, 0.06);
          rough = band ? 0.25 : 0.55;
          break;
      }
      maps.diffuse.at(x, y) = diffuse;
      maps.specular.at(x, y) = f0;
      maps.roughness.at(x, y) = rough;
    }
  }
  MaskGrid f1 = filled, f2 = filled, f3 = filled;
  detail::dilate(maps.diffuse, f1, dilate_passes);
  detail::dilate(maps.specular, f2, dilate_passes);
  detail::dilate(maps.roughness, f3, dilate_passes);
  return maps;
}

inline std::vector<CameraView> fixture_camera_ring(int n_views, double distance, double fov_deg,
                                                   int image_size) {
  std::vector<CameraView> views(n_views);
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n_views; ++i) {
    double y = n_views > 1 ? 0.8 * (1.0 - 2.0 * (i + 0.5) / n_views) : 0.3;
    double r = std::sqrt(std::max(0.0, 1.0 - y * y));
    double phi = golden * i;
    Vec3 eye = Vec3(r * std::cos(phi), y, r * std::sin(phi)) * distance;
    CameraView& v = views[i];
    v.view_id = i;
    v.width = v.height = image_size;
    v.fov_deg = fov_deg;
    v.camera_to_world = CameraView::look_at(eye, {0, 0, 0}, {0, 1, 0});
  }
  return views;
}

struct Fixture {
  SceneDescription description;
  Scene scene;
  ReflectanceMaps gt_maps;
  EnvironmentMap gt_env;
  std::vector<Image> targets;
  std::string directory;
};

// Generates mesh + atlas, ground-truth maps and sky, a camera ring, and
// target images; writes the whole scene directory.
inline Fixture make_fixture(FixtureKind kind, const std::string& out_dir,
                            const FixtureOptions& opts = {}) {
  namespace fs = std::filesystem;
  Fixture fx;
  fx.directory = out_dir;
  fs::create_directories(out_dir);
  fs::create_directories(out_dir + "/targets");
  fs::create_directories(out_dir + "/gt");

  TriangleMesh raw =
      kind == FixtureKind::kSpecularVase ? make_vase() : make_uv_sphere();
  auto charts = segment_charts(raw, opts.cone_deg);
  for (auto& chart : charts) lscm_parameterize(raw, chart);
  TriangleMesh baked;
  Atlas atlas = pack_atlas(raw, charts, opts.map_resolution, opts.padding, &baked);
  save_obj(out_dir + "/mesh.obj", baked);
  save_chart_sidecar(out_dir + "/mesh.obj.charts.csv", baked, atlas);

  fx.scene.mesh = std::move(baked);
  fx.scene.atlas = atlas;
  fx.scene.finalize();

  fx.gt_maps = bake_ground_truth_maps(fx.scene.mesh, opts.map_resolution, kind, opts.padding + 1);
  fx.gt_env = EnvironmentMap(bake_sky(SkyConfig::training(), 2 * opts.env_height, opts.env_height));
  save_reflectance_maps(out_dir + "/gt", fx.gt_maps, fx.gt_env);
  exr::write(out_dir + "/morning.exr", bake_sky(SkyConfig::morning(), 2 * opts.env_height, opts.env_height));
  hdr::write(out_dir + "/evening.hdr", bake_sky(SkyConfig::evening(), 2 * opts.env_height, opts.env_height));

  double distance = 3.6 * (kind == FixtureKind::kSpecularVase ? 0.9 : 1.0);
  std::vector<CameraView> views =
      fixture_camera_ring(opts.n_views, distance, opts.fov_deg, opts.image_size);

  RenderOptions ropts;
  ropts.spp = opts.target_spp;
  ropts.seed = opts.seed;
  ropts.max_bounces = opts.max_bounces;
  ropts.threads = opts.threads;
  char name[64];
  for (const auto& view : views) {
    RenderImage img = render(fx.scene, view, fx.gt_maps, fx.gt_env, ropts);
    std::snprintf(name, sizeof(name), "targets/view_%02d.exr", view.view_id);
    exr::write(out_dir + "/" + name, img.radiance);
    std::snprintf(name, sizeof(name), "targets/view_%02d.png", view.view_id);
    png::write(out_dir + "/" + name, img.radiance);
    fx.targets.push_back(std::move(img.radiance));
  }

  SceneDescription& d = fx.description;
  d.mesh_path = "mesh.obj";
  d.map_resolution = opts.map_resolution;
  d.map_padding = opts.padding;
  d.env_height = opts.env_height;
  d.env_width = 2 * opts.env_height;
  d.env_trainable = true;
  d.base_dir = out_dir;
  d.views = views;
  for (auto& v : d.views) {
    std::snprintf(name, sizeof(name), "targets/view_%02d.exr", v.view_id);
    v.image_path = name;
  }
  d.optim.spp = 64;
  d.optim.max_bounces = opts.max_bounces;
  d.optim.seed = opts.seed;
  d.gt_diffuse = "gt/diffuse.exr";
  d.gt_specular = "gt/specular.exr";
  d.gt_roughness = "gt/roughness.exr";
  d.gt_environment = "gt/environment.exr";
  d.relight_environments = {"morning.exr", "evening.hdr"};
  save_scene(out_dir + "/scene.json", d);
  return fx;
}

}  // namespace retrace

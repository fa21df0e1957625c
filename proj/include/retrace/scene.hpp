// Copyright (c) 2026 The retrace Authors
// SPDX-License-Identifier: Apache-2.0
//
// Scene description file (JSON, schema version 1) and the runtime scene
// assembled from it: baked mesh + BVH, reflectance maps, environment map
// and camera views with their target images.

#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "retrace/atlas.hpp"
#include "retrace/bvh.hpp"
#include "retrace/camera.hpp"
#include "retrace/envmap.hpp"
#include "retrace/io_exr.hpp"
#include "retrace/io_hdr.hpp"
#include "retrace/maps.hpp"
#include "retrace/mesh.hpp"

namespace retrace {

struct OptimDefaults {
  int stage1_epochs = 60;
  int stage2_epochs = 60;
  double learning_rate = 0.01;
  int spp = 64;
  int max_bounces = 2;
  uint64_t seed = 1;
};

struct SceneDescription {
  int version = 1;
  std::string mesh_path;
  int map_resolution = 256;
  int map_padding = 2;
  int env_height = 32;
  int env_width = 64;
  bool env_trainable = true;
  std::string env_path;  // fixed or initial environment, optional
  std::vector<CameraView> views;
  OptimDefaults optim;

  // optional ground-truth section written by fixtures
  std::string gt_diffuse, gt_specular, gt_roughness, gt_environment;
  std::vector<std::string> relight_environments;

  std::filesystem::path base_dir;  // directory of the scene file, not serialized

  std::string resolve(const std::string& rel) const {
    std::filesystem::path p(rel);
    return p.is_absolute() ? p.string() : (base_dir / p).string();
  }
};

namespace detail {

inline bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

template <typename T>
T get_field(const nlohmann::json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) throw Error("scene: missing field '" + path + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("scene: bad value for '" + path + key + "': " + e.what());
  }
}

template <typename T>
T get_field_or(const nlohmann::json& j, const std::string& path, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return get_field<T>(j, path, key);
}

}  // namespace detail

inline SceneDescription load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(path + ": cannot open scene file");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": JSON parse failure: " + e.what());
  }

  using detail::get_field;
  using detail::get_field_or;
  SceneDescription s;
  s.base_dir = std::filesystem::path(path).parent_path();
  s.version = get_field_or<int>(j, "", "version", 1);
  if (s.version != 1) throw Error("scene: unsupported version " + std::to_string(s.version));
  s.mesh_path = get_field<std::string>(j, "", "mesh");

  if (j.contains("maps")) {
    const auto& m = j.at("maps");
    s.map_resolution = get_field_or<int>(m, "maps.", "resolution", s.map_resolution);
    s.map_padding = get_field_or<int>(m, "maps.", "padding", s.map_padding);
  }
  if (!detail::is_power_of_two(s.map_resolution))
    throw Error("scene: maps.resolution must be a positive power of two");
  if (s.map_padding < 0) throw Error("scene: maps.padding must be >= 0");

  if (j.contains("environment")) {
    const auto& e = j.at("environment");
    s.env_height = get_field_or<int>(e, "environment.", "height", s.env_height);
    s.env_width = get_field_or<int>(e, "environment.", "width", s.env_width);
    s.env_trainable = get_field_or<bool>(e, "environment.", "trainable", s.env_trainable);
    s.env_path = get_field_or<std::string>(e, "environment.", "path", std::string());
  }
  if (!detail::is_power_of_two(s.env_height))
    throw Error("scene: environment.height must be a positive power of two");
  if (s.env_width != 2 * s.env_height)
    throw Error("scene: environment.width must be exactly 2 x height");

  if (!j.contains("views") || !j.at("views").is_array() || j.at("views").empty())
    throw Error("scene: needs at least one entry in 'views'");
  int view_id = 0;
  for (const auto& vj : j.at("views")) {
    std::string vpath = "views[" + std::to_string(view_id) + "].";
    CameraView view;
    view.view_id = view_id++;
    view.image_path = get_field<std::string>(vj, vpath, "image");
    view.width = get_field<int>(vj, vpath, "width");
    view.height = get_field<int>(vj, vpath, "height");
    view.fov_deg = get_field<double>(vj, vpath, "fov_deg");
    auto mat = get_field<std::vector<double>>(vj, vpath, "camera_to_world");
    if (mat.size() != 16) throw Error("scene: " + vpath + "camera_to_world needs 16 values");
    for (int i = 0; i < 16; ++i) view.camera_to_world.m[i] = mat[i];
    try {
      view.validate();
    } catch (const Error& e) {
      throw Error("scene: " + vpath.substr(0, vpath.size() - 1) + ": " + e.what());
    }
    s.views.push_back(std::move(view));
  }

  if (j.contains("optim")) {
    const auto& o = j.at("optim");
    s.optim.stage1_epochs = get_field_or<int>(o, "optim.", "stage1_epochs", s.optim.stage1_epochs);
    s.optim.stage2_epochs = get_field_or<int>(o, "optim.", "stage2_epochs", s.optim.stage2_epochs);
    s.optim.learning_rate = get_field_or<double>(o, "optim.", "learning_rate", s.optim.learning_rate);
    s.optim.spp = get_field_or<int>(o, "optim.", "spp", s.optim.spp);
    s.optim.max_bounces = get_field_or<int>(o, "optim.", "max_bounces", s.optim.max_bounces);
    s.optim.seed = get_field_or<uint64_t>(o, "optim.", "seed", s.optim.seed);
  }
  if (s.optim.spp <= 0 || s.optim.max_bounces < 1)
    throw Error("scene: optim.spp must be > 0 and optim.max_bounces >= 1");

  if (j.contains("ground_truth")) {
    const auto& g = j.at("ground_truth");
    s.gt_diffuse = detail::get_field_or<std::string>(g, "ground_truth.", "diffuse", std::string());
    s.gt_specular = detail::get_field_or<std::string>(g, "ground_truth.", "specular", std::string());
    s.gt_roughness = detail::get_field_or<std::string>(g, "ground_truth.", "roughness", std::string());
    s.gt_environment =
        detail::get_field_or<std::string>(g, "ground_truth.", "environment", std::string());
  }
  if (j.contains("relight_environments"))
    s.relight_environments = j.at("relight_environments").get<std::vector<std::string>>();

  // referenced files must exist
  auto check_file = [&](const std::string& rel, const std::string& field) {
    if (rel.empty()) return;
    if (!std::filesystem::exists(s.resolve(rel)))
      throw Error("scene: " + field + " references missing file '" + rel + "'");
  };
  check_file(s.mesh_path, "mesh");
  check_file(s.env_path, "environment.path");
  for (const auto& v : s.views)
    check_file(v.image_path, "views[" + std::to_string(v.view_id) + "].image");
  check_file(s.gt_diffuse, "ground_truth.diffuse");
  check_file(s.gt_specular, "ground_truth.specular");
  check_file(s.gt_roughness, "ground_truth.roughness");
  check_file(s.gt_environment, "ground_truth.environment");
  for (const auto& r : s.relight_environments) check_file(r, "relight_environments[]");
  return s;
}

inline void save_scene(const std::string& path, const SceneDescription& s) {
  nlohmann::json j;
  j["version"] = s.version;
  j["mesh"] = s.mesh_path;
  j["maps"] = {{"resolution", s.map_resolution}, {"padding", s.map_padding}};
  nlohmann::json env = {{"height", s.env_height},
                        {"width", s.env_width},
                        {"trainable", s.env_trainable}};
  if (!s.env_path.empty()) env["path"] = s.env_path;
  j["environment"] = env;
  j["views"] = nlohmann::json::array();
  for (const auto& v : s.views) {
    nlohmann::json vj;
    vj["image"] = v.image_path;
    vj["width"] = v.width;
    vj["height"] = v.height;
    vj["fov_deg"] = v.fov_deg;
    vj["camera_to_world"] = std::vector<double>(v.camera_to_world.m, v.camera_to_world.m + 16);
    j["views"].push_back(vj);
  }
  j["optim"] = {{"stage1_epochs", s.optim.stage1_epochs},
                {"stage2_epochs", s.optim.stage2_epochs},
                {"learning_rate", s.optim.learning_rate},
                {"spp", s.optim.spp},
                {"max_bounces", s.optim.max_bounces},
                {"seed", s.optim.seed}};
  if (!s.gt_diffuse.empty() || !s.gt_environment.empty()) {
    j["ground_truth"] = {{"diffuse", s.gt_diffuse},
                         {"specular", s.gt_specular},
                         {"roughness", s.gt_roughness},
                         {"environment", s.gt_environment}};
  }
  if (!s.relight_environments.empty()) j["relight_environments"] = s.relight_environments;

  std::ofstream out(path);
  if (!out) throw Error(path + ": cannot open for writing");
  out << j.dump(2) << "\n";
}

inline Image load_radiance_image(const std::string& path) {
  auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".hdr") return hdr::read(path);
  return exr::read(path);
}

// Loads an environment image and resamples it to the configured grid by
// sphere-direction lookup when resolutions differ.
inline EnvironmentMap load_environment(const std::string& path, int width, int height) {
  Image src = load_radiance_image(path);
  if (src.width() == width && src.height() == height) return EnvironmentMap(std::move(src));
  EnvironmentMap source(std::move(src));
  Image dst(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      dst.at(x, y) = source.eval(EnvironmentMap::uv_to_dir({(x + 0.5) / width, (y + 0.5) / height}));
  return EnvironmentMap(std::move(dst));
}

// Runtime scene: everything immutable during a render.
struct Scene {
  TriangleMesh mesh;   // atlased
  Atlas atlas;
  Bvh bvh;
  double scale = 1.0;  // bbox diagonal, used for ray offsets

  void finalize() {
    bvh = Bvh(mesh);
    scale = mesh.scene_scale();
  }
};

struct LoadedScene {
  SceneDescription description;
  Scene scene;
  ReflectanceMaps maps;          // initialization values
  EnvironmentMap environment;    // from env_path or flat 0.5 gray
  std::vector<Image> targets;    // per view
};

// Atlases the mesh if the OBJ does not already carry UVs + chart ids from
// a bake. Chart ids are read from "<mesh>.charts.csv" when present.
inline void ensure_atlased(const SceneDescription& desc, TriangleMesh& mesh, Atlas& atlas);

inline LoadedScene load_runtime_scene(const std::string& path, bool load_targets = true) {
  LoadedScene out;
  out.description = load_scene(path);
  const SceneDescription& d = out.description;

  out.scene.mesh = load_mesh(d.resolve(d.mesh_path));
  ensure_atlased(d, out.scene.mesh, out.scene.atlas);
  out.scene.finalize();

  out.maps = ReflectanceMaps(d.map_resolution);
  if (!d.env_path.empty())
    out.environment = load_environment(d.resolve(d.env_path), d.env_width, d.env_height);
  else
    out.environment = EnvironmentMap(d.env_width, d.env_height, Vec3(0.5, 0.5, 0.5));

  if (load_targets) {
    for (const auto& v : d.views) {
      Image img = load_radiance_image(d.resolve(v.image_path));
      if (img.width() != v.width || img.height() != v.height)
        throw Error("scene: target image size mismatch for view " + std::to_string(v.view_id));
      out.targets.push_back(std::move(img));
    }
  }
  return out;
}

inline void ensure_atlased(const SceneDescription& desc, TriangleMesh& mesh, Atlas& atlas) {
  std::string sidecar = desc.resolve(desc.mesh_path) + ".charts.csv";
  if (mesh.has_uvs() && std::filesystem::exists(sidecar)) {
    // baked mesh: chart ids + placements from the sidecar
    std::ifstream in(sidecar);
    std::string line;
    std::getline(in, line);  // header
    mesh.chart_ids.assign(mesh.triangle_count(), -1);
    atlas.charts.clear();
    atlas.resolution = desc.map_resolution;
    atlas.padding = desc.map_padding;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string kind;
      std::getline(ss, kind, ',');
      if (kind == "triangle") {
        int t, c;
        char comma;
        ss >> t >> comma >> c;
        if (t < 0 || t >= mesh.triangle_count()) throw Error(sidecar + ": triangle id out of range");
        mesh.chart_ids[t] = c;
      } else if (kind == "chart") {
        ChartPlacement p;
        int id;
        char comma;
        ss >> id >> comma >> p.scale >> comma >> p.offset.x >> comma >> p.offset.y >> comma >>
            p.box_min.x >> comma >> p.box_min.y >> comma >> p.box_max.x >> comma >> p.box_max.y;
        if (int(atlas.charts.size()) != id) throw Error(sidecar + ": chart ids must be sequential");
        atlas.charts.push_back(p);
      }
    }
    return;
  }
  auto charts = segment_charts(mesh);
  for (auto& chart : charts) lscm_parameterize(mesh, chart);
  TriangleMesh baked;
  atlas = pack_atlas(mesh, charts, desc.map_resolution, desc.map_padding, &baked);
  mesh = std::move(baked);
}

inline void save_chart_sidecar(const std::string& path, const TriangleMesh& mesh,
                               const Atlas& atlas) {
  std::ofstream out(path);
  if (!out) throw Error(path + ": cannot open for writing");
  out << "record,id,fields\n";
  out.precision(17);
  for (size_t c = 0; c < atlas.charts.size(); ++c) {
    const ChartPlacement& p = atlas.charts[c];
    out << "chart," << c << "," << p.scale << "," << p.offset.x << "," << p.offset.y << ","
        << p.box_min.x << "," << p.box_min.y << "," << p.box_max.x << "," << p.box_max.y << "\n";
  }
  for (int t = 0; t < mesh.triangle_count(); ++t)
    out << "triangle," << t << "," << mesh.chart_ids[t] << "\n";
}

}  // namespace retrace

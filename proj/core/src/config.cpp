#include "voxsl/config.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace voxsl {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& origin, const std::string& msg) {
  throw std::runtime_error("config " + origin + ": " + msg);
}

void expect_keys(const json& obj, std::initializer_list<const char*> known,
                 const std::string& origin, const std::string& section) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known)
      if (key == k) {
        ok = true;
        break;
      }
    if (!ok) fail(origin, "unknown key '" + key + "' in " + section);
  }
}

Pose pose_from_json(const json& arr, const std::string& origin) {
  if (!arr.is_array() || arr.size() != 16)
    fail(origin, "pose must be an array of 16 numbers (row-major 4x4)");
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = arr[4 * r + c].get<double>();
  return Pose::from_matrix(m);
}

CameraModel camera_from_json(const json& obj, const std::string& origin,
                             const std::string& section) {
  expect_keys(obj, {"fx", "fy", "cx", "cy", "width", "height", "pose", "baseline"}, origin,
              section);
  CameraModel cam;
  cam.fx = obj.at("fx").get<double>();
  cam.fy = obj.at("fy").get<double>();
  cam.cx = obj.at("cx").get<double>();
  cam.cy = obj.at("cy").get<double>();
  cam.width = obj.at("width").get<int>();
  cam.height = obj.at("height").get<int>();
  if (obj.contains("pose")) cam.pose = pose_from_json(obj.at("pose"), origin);
  return cam;
}

void train_from_json(const json& obj, TrainConfig& cfg, const std::string& origin) {
  expect_keys(obj,
              {"grid_dims", "alpha_init", "step_size_voxels", "rays_per_iter", "phase1_iters",
               "phase2_iters", "lambda_d", "lambda_s_phase2", "lr_start", "lr_end", "seed",
               "near_mm", "jitter", "z_ndc_max", "f_min", "w_min", "normalize_depth",
               "pattern_blur_sigma", "log_interval", "workers", "deterministic"},
              origin, "train");
  if (obj.contains("grid_dims")) {
    const auto& d = obj.at("grid_dims");
    if (!d.is_array() || d.size() != 3) fail(origin, "train.grid_dims must have 3 entries");
    for (int i = 0; i < 3; ++i) cfg.grid_dims[i] = d[i].get<int>();
  }
  if (obj.contains("alpha_init")) cfg.alpha_init = obj.at("alpha_init").get<double>();
  if (obj.contains("step_size_voxels"))
    cfg.step_size_voxels = obj.at("step_size_voxels").get<double>();
  if (obj.contains("rays_per_iter")) cfg.rays_per_iter = obj.at("rays_per_iter").get<int>();
  if (obj.contains("phase1_iters")) cfg.phase1_iters = obj.at("phase1_iters").get<int>();
  if (obj.contains("phase2_iters")) cfg.phase2_iters = obj.at("phase2_iters").get<int>();
  if (obj.contains("lambda_d")) cfg.lambda_d = obj.at("lambda_d").get<double>();
  if (obj.contains("lambda_s_phase2"))
    cfg.lambda_s_phase2 = obj.at("lambda_s_phase2").get<double>();
  if (obj.contains("lr_start")) cfg.lr_start = obj.at("lr_start").get<double>();
  if (obj.contains("lr_end")) cfg.lr_end = obj.at("lr_end").get<double>();
  if (obj.contains("seed")) cfg.seed = obj.at("seed").get<uint64_t>();
  if (obj.contains("near_mm")) cfg.near_mm = obj.at("near_mm").get<double>();
  if (obj.contains("jitter")) cfg.jitter = obj.at("jitter").get<bool>();
  if (obj.contains("z_ndc_max")) cfg.z_ndc_max = obj.at("z_ndc_max").get<double>();
  if (obj.contains("f_min")) cfg.f_min = obj.at("f_min").get<float>();
  if (obj.contains("w_min")) cfg.w_min = obj.at("w_min").get<double>();
  if (obj.contains("normalize_depth"))
    cfg.normalize_depth = obj.at("normalize_depth").get<bool>();
  if (obj.contains("pattern_blur_sigma"))
    cfg.pattern_blur_sigma = obj.at("pattern_blur_sigma").get<double>();
  if (obj.contains("log_interval")) cfg.log_interval = obj.at("log_interval").get<int>();
  if (obj.contains("workers")) cfg.workers = obj.at("workers").get<int>();
  if (obj.contains("deterministic")) cfg.deterministic = obj.at("deterministic").get<bool>();
}

void radiometric_from_json(const json& obj, RadiometricParams& rad, const std::string& origin) {
  expect_keys(obj, {"ambient", "contrast", "noise_sigma", "quantize_bits"}, origin,
              "radiometric");
  if (obj.contains("ambient")) rad.ambient = obj.at("ambient").get<double>();
  if (obj.contains("contrast")) rad.contrast = obj.at("contrast").get<double>();
  if (obj.contains("noise_sigma")) rad.noise_sigma = obj.at("noise_sigma").get<double>();
  if (obj.contains("quantize_bits")) rad.quantize_bits = obj.at("quantize_bits").get<int>();
}

void scene_from_json(const json& obj, SceneConfig& scene, const std::string& origin) {
  expect_keys(obj,
              {"kind", "depth_mm", "slope_mm_per_px", "center_depth_mm", "radius_mm",
               "background_depth_mm", "near_depth_mm", "far_depth_mm", "vertical_edge",
               "edge_pos_px"},
              origin, "scene");
  if (obj.contains("kind")) scene.kind = scene_kind_from_string(obj.at("kind").get<std::string>());
  SceneParams& p = scene.params;
  if (obj.contains("depth_mm")) p.depth_mm = obj.at("depth_mm").get<double>();
  if (obj.contains("slope_mm_per_px")) p.slope_mm_per_px = obj.at("slope_mm_per_px").get<double>();
  if (obj.contains("center_depth_mm")) p.center_depth_mm = obj.at("center_depth_mm").get<double>();
  if (obj.contains("radius_mm")) p.radius_mm = obj.at("radius_mm").get<double>();
  if (obj.contains("background_depth_mm"))
    p.background_depth_mm = obj.at("background_depth_mm").get<double>();
  if (obj.contains("near_depth_mm")) p.near_depth_mm = obj.at("near_depth_mm").get<double>();
  if (obj.contains("far_depth_mm")) p.far_depth_mm = obj.at("far_depth_mm").get<double>();
  if (obj.contains("vertical_edge")) p.vertical_edge = obj.at("vertical_edge").get<bool>();
  if (obj.contains("edge_pos_px")) p.edge_pos_px = obj.at("edge_pos_px").get<double>();
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const std::string& origin) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(origin, std::string("not valid JSON: ") + e.what());
  }
  if (!root.is_object()) fail(origin, "top level must be an object");
  expect_keys(root, {"camera", "projector", "train", "radiometric", "scene", "paths"}, origin,
              "top level");

  RunConfig cfg;
  if (root.contains("camera")) {
    cfg.camera = camera_from_json(root.at("camera"), origin, "camera");
    cfg.has_camera = true;
  }
  if (root.contains("projector")) {
    const json& pj = root.at("projector");
    cfg.projector.intrinsics = camera_from_json(pj, origin, "projector");
    if (pj.contains("baseline")) cfg.projector.baseline_mm = pj.at("baseline").get<double>();
    cfg.has_projector = true;
  }
  if (root.contains("train")) train_from_json(root.at("train"), cfg.train, origin);
  if (root.contains("radiometric"))
    radiometric_from_json(root.at("radiometric"), cfg.radiometric, origin);
  if (root.contains("scene")) scene_from_json(root.at("scene"), cfg.scene, origin);
  if (root.contains("paths")) {
    const json& paths = root.at("paths");
    expect_keys(paths, {"patterns_dir", "captures_dir", "output_dir"}, origin, "paths");
    if (paths.contains("patterns_dir")) cfg.patterns_dir = paths.at("patterns_dir");
    if (paths.contains("captures_dir")) cfg.captures_dir = paths.at("captures_dir");
    if (paths.contains("output_dir")) cfg.output_dir = paths.at("output_dir");
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_run_config(text, path);
}

void apply_env_overrides(TrainConfig& cfg) {
  if (const char* w = std::getenv("VOXELSL_WORKERS")) cfg.workers = std::max(1, std::atoi(w));
  if (const char* s = std::getenv("VOXELSL_SEED")) cfg.seed = std::strtoull(s, nullptr, 10);
}

uint64_t content_hash64(const void* data, size_t size) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  uint64_t h = 0xcbf29ce484222325ull;
  for (size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string content_hash_hex(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("content_hash: cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(content_hash64(data.data(), data.size())));
  return buf;
}

}  // namespace voxsl

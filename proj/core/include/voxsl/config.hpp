#pragma once

#include <string>

#include "voxsl/camera.hpp"
#include "voxsl/simulator.hpp"
#include "voxsl/trainer.hpp"

namespace voxsl {

// Scene description as parsed from a config file.
struct SceneConfig {
  SceneKind kind = SceneKind::Plane;
  SceneParams params;
};

// Full pipeline configuration. Parsing is strict: unknown keys are rejected.
// Sections other than "camera" are optional and keep their defaults when
// absent; individual keys override defaults field by field.
struct RunConfig {
  CameraModel camera;
  ProjectorModel projector;
  TrainConfig train;
  RadiometricParams radiometric;
  SceneConfig scene;
  std::string patterns_dir;
  std::string captures_dir;
  std::string output_dir;

  bool has_camera = false;
  bool has_projector = false;
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& json_text, const std::string& origin = "<string>");

// Environment overrides, limited to VOXELSL_WORKERS and VOXELSL_SEED.
void apply_env_overrides(TrainConfig& cfg);

// FNV-1a 64-bit content hash, used to link pipeline artifacts in manifests.
uint64_t content_hash64(const void* data, size_t size);
std::string content_hash_hex(const std::string& path);

}  // namespace voxsl

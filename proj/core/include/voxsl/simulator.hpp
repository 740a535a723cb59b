#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "voxsl/camera.hpp"
#include "voxsl/image.hpp"
#include "voxsl/patterns.hpp"

namespace voxsl {

// Analytic ground truth for a scene: per-pixel metric z-depth (mm, positive
// along the camera's -z axis).
struct SceneDepth {
  ImageF depth;
  ImageU8 valid;
  std::string description;
};

enum class SceneKind { Plane, Ramp, Sphere, Step };

SceneKind scene_kind_from_string(const std::string& name);
std::string to_string(SceneKind kind);

struct SceneParams {
  // plane: fronto-parallel at depth_mm.
  double depth_mm = 1000.0;
  // ramp: depth_mm + slope_mm_per_px * (col + 0.5 - cx); depth is exactly
  // linear in the image column.
  double slope_mm_per_px = 0.5;
  // sphere: center on the optical axis at center_depth_mm, radius_mm;
  // rays that miss fall back to a plane at background_depth_mm.
  double center_depth_mm = 1000.0;
  double radius_mm = 150.0;
  double background_depth_mm = 1200.0;
  // step: near_depth_mm on one side of the edge, far_depth_mm on the other.
  double near_depth_mm = 950.0;
  double far_depth_mm = 1050.0;
  bool vertical_edge = true;   // true: edge along a column, depth varies with col
  double edge_pos_px = -1.0;   // defaults to the image center
};

SceneDepth analytic_scene(SceneKind kind, const SceneParams& params, const CameraModel& cam);

struct RadiometricParams {
  double ambient = 0.1;        // B0
  double contrast = 0.8;       // F0
  double noise_sigma = 0.0;    // additive Gaussian std in linear intensity
  int quantize_bits = 0;       // 8 for 8-bit quantization, 0 for exact

  void validate() const;
};

// A camera pixel is shadowed iff its surface point is occluded from the
// projector. Decided by a projector-view depth buffer built by splatting
// each camera pixel's constant-depth footprint (the quad spanned by the
// pixel corners) into projector texels, then comparing projective depths
// with tolerance eps_sh_mm. Pixels whose surface point is behind or outside
// the projector frustum are also marked shadowed (they receive no light).
ImageU8 projector_shadow_mask(const SceneDepth& scene, const CameraModel& cam,
                              const ProjectorModel& proj, double eps_sh_mm = 1.0);

// Forward model evaluated at the ground-truth surface: for each pixel, lift
// to the world point, re-project into the pattern, bilinear-sample; the
// image is ambient + contrast * pattern (ambient alone when shadowed or out
// of view), plus optional noise and quantization.
std::vector<ImageF> simulate_captures(const SceneDepth& scene, std::span<const Pattern> patterns,
                                      const CameraModel& cam, const ProjectorModel& proj,
                                      const RadiometricParams& rad, uint64_t seed);

// The shadow/illumination mask used by simulate_captures (1 = lit).
ImageU8 illumination_mask(const SceneDepth& scene, const CameraModel& cam,
                          const ProjectorModel& proj, double eps_sh_mm = 1.0);

// World-space surface point of a camera pixel with the given z-depth.
Eigen::Vector3d lift_pixel(int row, int col, double depth_mm, const CameraModel& cam);

}  // namespace voxsl

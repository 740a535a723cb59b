#include "voxsl/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "voxsl/rng.hpp"

namespace voxsl {

SceneKind scene_kind_from_string(const std::string& name) {
  if (name == "plane") return SceneKind::Plane;
  if (name == "ramp") return SceneKind::Ramp;
  if (name == "sphere") return SceneKind::Sphere;
  if (name == "step") return SceneKind::Step;
  throw std::invalid_argument("unknown scene kind '" + name + "'");
}

std::string to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::Plane: return "plane";
    case SceneKind::Ramp: return "ramp";
    case SceneKind::Sphere: return "sphere";
    case SceneKind::Step: return "step";
  }
  return "?";
}

void RadiometricParams::validate() const {
  if (ambient < 0 || contrast < 0)
    throw std::invalid_argument("radiometric: ambient and contrast must be >= 0");
  if (ambient + contrast > 1.0)
    throw std::invalid_argument("radiometric: ambient + contrast must be <= 1");
  if (noise_sigma < 0) throw std::invalid_argument("radiometric: noise_sigma must be >= 0");
  if (quantize_bits != 0 && quantize_bits != 8)
    throw std::invalid_argument("radiometric: quantize_bits must be 0 or 8");
}

Eigen::Vector3d lift_pixel(int row, int col, double depth_mm, const CameraModel& cam) {
  const Eigen::Vector3d p_cam((col + 0.5 - cam.cx) / cam.fx * depth_mm,
                              (row + 0.5 - cam.cy) / cam.fy * depth_mm,
                              -depth_mm);
  return cam.pose.to_world(p_cam);
}

SceneDepth analytic_scene(SceneKind kind, const SceneParams& params, const CameraModel& cam) {
  cam.validate();
  SceneDepth scene;
  scene.depth = ImageF(cam.width, cam.height);
  scene.valid = ImageU8(cam.width, cam.height, 1);
  scene.description = to_string(kind);

  const double edge = params.edge_pos_px >= 0
                          ? params.edge_pos_px
                          : (params.vertical_edge ? cam.width * 0.5 : cam.height * 0.5);

  for (int r = 0; r < cam.height; ++r) {
    for (int c = 0; c < cam.width; ++c) {
      double d = 0;
      switch (kind) {
        case SceneKind::Plane:
          d = params.depth_mm;
          break;
        case SceneKind::Ramp:
          d = params.depth_mm + params.slope_mm_per_px * (c + 0.5 - cam.cx);
          break;
        case SceneKind::Sphere: {
          // Ray p = s * v with v = (dx, dy, -1); sphere center (0,0,-zc).
          const double dx = (c + 0.5 - cam.cx) / cam.fx;
          const double dy = (r + 0.5 - cam.cy) / cam.fy;
          const double vv = dx * dx + dy * dy + 1.0;
          const double vc = params.center_depth_mm;  // v . C
          const double cc = params.center_depth_mm * params.center_depth_mm -
                            params.radius_mm * params.radius_mm;
          const double disc = vc * vc - vv * cc;
          if (disc >= 0.0) {
            d = (vc - std::sqrt(disc)) / vv;  // near intersection; z-depth = s
          } else {
            d = params.background_depth_mm;
          }
          break;
        }
        case SceneKind::Step: {
          const double pos = params.vertical_edge ? (c + 0.5) : (r + 0.5);
          d = pos < edge ? params.near_depth_mm : params.far_depth_mm;
          break;
        }
      }
      if (!(d > 0.0) || !std::isfinite(d))
        throw std::invalid_argument("analytic_scene: surface outside the camera frustum");
      scene.depth.at(r, c) = static_cast<float>(d);
    }
  }
  return scene;
}

namespace {

struct ProjectedPixel {
  double u = 0, v = 0;
  double depth = 0;
  bool lit_geometry = false;  // in front of the projector and inside the pattern
};

// Center projection plus the texel bounding box of the pixel's footprint
// (the four pixel corners lifted at the pixel's own depth).
struct Splat {
  int u0 = 0, u1 = -1, v0 = 0, v1 = -1;
  bool ok = false;
};

ProjectedPixel project_center(const SceneDepth& scene, const CameraModel& cam,
                              const ProjectorModel& proj, int r, int c) {
  ProjectedPixel out;
  if (!scene.valid.at(r, c)) return out;
  const Eigen::Vector3d x = lift_pixel(r, c, scene.depth.at(r, c), cam);
  const PatternPoint pp = project_to_pattern(x, proj);
  out.u = pp.u;
  out.v = pp.v;
  out.depth = pp.depth;
  out.lit_geometry = pp.in_view && pp.u >= 0 && pp.u <= proj.intrinsics.width && pp.v >= 0 &&
                     pp.v <= proj.intrinsics.height;
  return out;
}

Splat footprint_splat(const SceneDepth& scene, const CameraModel& cam,
                      const ProjectorModel& proj, int r, int c) {
  Splat s;
  if (!scene.valid.at(r, c)) return s;
  const double d = scene.depth.at(r, c);
  double umin = std::numeric_limits<double>::infinity(), umax = -umin;
  double vmin = umin, vmax = -umin;
  for (int corner = 0; corner < 4; ++corner) {
    const double dr = (corner & 1) ? 0.5 : -0.5;
    const double dc = (corner & 2) ? 0.5 : -0.5;
    const Eigen::Vector3d x_cam((c + 0.5 + dc - cam.cx) / cam.fx * d,
                                (r + 0.5 + dr - cam.cy) / cam.fy * d,
                                -d);
    const PatternPoint pp = project_to_pattern(cam.pose.to_world(x_cam), proj);
    if (!pp.in_view) return s;  // partially behind the projector: no splat
    umin = std::min(umin, pp.u);
    umax = std::max(umax, pp.u);
    vmin = std::min(vmin, pp.v);
    vmax = std::max(vmax, pp.v);
  }
  s.u0 = std::max(0, static_cast<int>(std::floor(umin)));
  s.u1 = std::min(proj.intrinsics.width - 1, static_cast<int>(std::floor(umax)));
  s.v0 = std::max(0, static_cast<int>(std::floor(vmin)));
  s.v1 = std::min(proj.intrinsics.height - 1, static_cast<int>(std::floor(vmax)));
  s.ok = s.u0 <= s.u1 && s.v0 <= s.v1;
  return s;
}

}  // namespace

ImageU8 projector_shadow_mask(const SceneDepth& scene, const CameraModel& cam,
                              const ProjectorModel& proj, double eps_sh_mm) {
  const int w = scene.depth.width(), h = scene.depth.height();
  const int pw = proj.intrinsics.width, ph = proj.intrinsics.height;

  // Projector-view depth buffer from constant-depth pixel footprints.
  Image<float> zbuf(pw, ph, std::numeric_limits<float>::infinity());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const Splat s = footprint_splat(scene, cam, proj, r, c);
      if (!s.ok) continue;
      const ProjectedPixel center = project_center(scene, cam, proj, r, c);
      const float d = static_cast<float>(center.depth);
      for (int v = s.v0; v <= s.v1; ++v) {
        float* row = zbuf.row_ptr(v);
        for (int u = s.u0; u <= s.u1; ++u) row[u] = std::min(row[u], d);
      }
    }
  }

  // Shadow means occlusion: pixels outside the projector frustum are unlit
  // but not shadowed (illumination_mask folds both together).
  ImageU8 shadowed(w, h, 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!scene.valid.at(r, c)) continue;
      const ProjectedPixel center = project_center(scene, cam, proj, r, c);
      if (!center.lit_geometry) continue;
      const int u = std::clamp(static_cast<int>(std::floor(center.u)), 0, pw - 1);
      const int v = std::clamp(static_cast<int>(std::floor(center.v)), 0, ph - 1);
      shadowed.at(r, c) = center.depth > zbuf.at(v, u) + eps_sh_mm ? 1 : 0;
    }
  }
  return shadowed;
}

ImageU8 illumination_mask(const SceneDepth& scene, const CameraModel& cam,
                          const ProjectorModel& proj, double eps_sh_mm) {
  const ImageU8 shadowed = projector_shadow_mask(scene, cam, proj, eps_sh_mm);
  ImageU8 lit(scene.depth.width(), scene.depth.height(), 0);
  for (int r = 0; r < lit.height(); ++r) {
    for (int c = 0; c < lit.width(); ++c) {
      if (!scene.valid.at(r, c) || shadowed.at(r, c)) continue;
      const ProjectedPixel center = project_center(scene, cam, proj, r, c);
      lit.at(r, c) = center.lit_geometry ? 1 : 0;
    }
  }
  return lit;
}

std::vector<ImageF> simulate_captures(const SceneDepth& scene, std::span<const Pattern> patterns,
                                      const CameraModel& cam, const ProjectorModel& proj,
                                      const RadiometricParams& rad, uint64_t seed) {
  rad.validate();
  if (patterns.empty()) throw std::invalid_argument("simulate_captures: no patterns");
  if (!scene.depth.same_size(cam.width, cam.height))
    throw std::invalid_argument("simulate_captures: scene size does not match the camera");

  const int w = cam.width, h = cam.height;
  const ImageU8 lit = illumination_mask(scene, cam, proj);

  std::vector<ImageF> captures;
  captures.reserve(patterns.size());
  const double maxq = rad.quantize_bits ? static_cast<double>((1 << rad.quantize_bits) - 1) : 0;

  for (size_t j = 0; j < patterns.size(); ++j) {
    ImageF img(w, h);
    SplitMix64 noise_rng(hash_draw(seed, j));
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        double value = 0.0;
        if (scene.valid.at(r, c)) {
          value = rad.ambient;
          if (lit.at(r, c)) {
            const Eigen::Vector3d x = lift_pixel(r, c, scene.depth.at(r, c), cam);
            const PatternPoint pp = project_to_pattern(x, proj);
            value += rad.contrast * bilinear_sample(patterns[j].image, pp.u, pp.v);
          }
        }
        if (rad.noise_sigma > 0) value += rad.noise_sigma * noise_rng.next_gaussian();
        value = std::clamp(value, 0.0, 1.0);
        if (rad.quantize_bits) value = std::round(value * maxq) / maxq;
        img.at(r, c) = static_cast<float>(value);
      }
    }
    captures.push_back(std::move(img));
  }
  return captures;
}

}  // namespace voxsl

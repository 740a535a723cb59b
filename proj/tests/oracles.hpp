#pragma once

// Independent reference implementations used as test oracles. Everything in
// here recomputes results from first principles (quadratic-time scans,
// brute-force searches, finite differences) and stays clear of the library's
// optimized code paths.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "voxsl/camera.hpp"
#include "voxsl/density_grid.hpp"
#include "voxsl/losses.hpp"
#include "voxsl/simulator.hpp"

namespace voxsl::oracle {

// Front-to-back compositor recomputing the transmittance from scratch for
// every sample: O(K^2).
struct CompositeRef {
  std::vector<double> alpha, transmittance, weight;
};

inline CompositeRef composite_reference(const std::vector<double>& sigma,
                                        const std::vector<double>& delta) {
  const size_t k = sigma.size();
  CompositeRef out;
  out.alpha.resize(k);
  out.transmittance.resize(k);
  out.weight.resize(k);
  for (size_t i = 0; i < k; ++i) {
    out.alpha[i] = 1.0 - std::exp(-sigma[i] * delta[i]);
    double trans = 1.0;
    for (size_t j = 0; j < i; ++j) trans *= 1.0 - out.alpha[j];
    out.transmittance[i] = trans;
    out.weight[i] = trans * out.alpha[i];
  }
  return out;
}

inline double render_color_reference(const std::vector<double>& sigma,
                                     const std::vector<double>& delta,
                                     const std::vector<double>& color) {
  const CompositeRef ref = composite_reference(sigma, delta);
  double acc = 0;
  for (size_t i = 0; i < sigma.size(); ++i) acc += ref.weight[i] * color[i];
  return acc;
}

// Literal O(K^2) double sum of the distortion loss.
inline double distortion_reference(const std::vector<double>& s, const std::vector<double>& w) {
  const size_t k = w.size();
  double pair_term = 0, self_term = 0;
  for (size_t i = 0; i < k; ++i) {
    const double mi = 0.5 * (s[i] + s[i + 1]);
    for (size_t j = 0; j < k; ++j) {
      const double mj = 0.5 * (s[j] + s[j + 1]);
      pair_term += w[i] * w[j] * std::abs(mi - mj);
    }
    self_term += w[i] * w[i] * (s[i + 1] - s[i]);
  }
  return pair_term + self_term / 3.0;
}

inline double naive_mse(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0;
  for (size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

// Central finite difference of one field of the batch loss with respect to
// one raw voxel. The actually-stored float perturbations define the step,
// which removes representation error from the quotient. `field` extracts the
// differentiated scalar from the LossReport (photo, dist, surface or total).
template <typename Field>
double fd_voxel_gradient(const BatchContext& ctx, std::span<const PixelRef> batch,
                         const LossWeights& weights, size_t voxel, double h, Field&& field) {
  DensityGrid& grid = *const_cast<DensityGrid*>(ctx.grid);
  const float saved = grid.raw[voxel];

  grid.raw[voxel] = static_cast<float>(saved + h);
  const double plus_x = grid.raw[voxel];
  const double plus = field(batch_loss(ctx, batch, weights));

  grid.raw[voxel] = static_cast<float>(saved - h);
  const double minus_x = grid.raw[voxel];
  const double minus = field(batch_loss(ctx, batch, weights));

  grid.raw[voxel] = saved;
  return (plus - minus) / (plus_x - minus_x);
}

inline double fd_voxel_gradient(const BatchContext& ctx, std::span<const PixelRef> batch,
                                const LossWeights& weights, size_t voxel, double h) {
  return fd_voxel_gradient(ctx, batch, weights, voxel, h,
                           [](const LossReport& r) { return r.total; });
}

// Brute-force projector occlusion: pixel i is shadowed iff some camera
// pixel's constant-depth footprint covers i's projector texel at a
// projective depth more than eps_sh_mm closer. Reimplements the visibility
// definition with a per-pixel linear scan.
inline ImageU8 shadow_mask_reference(const SceneDepth& scene, const CameraModel& cam,
                                     const ProjectorModel& proj, double eps_sh_mm = 1.0) {
  const int w = scene.depth.width(), h = scene.depth.height();
  const int pw = proj.intrinsics.width, ph = proj.intrinsics.height;

  struct Entry {
    int u0, u1, v0, v1;
    double depth;
    bool ok;
  };
  std::vector<Entry> splats(static_cast<size_t>(w) * h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      Entry e{0, -1, 0, -1, 0, false};
      if (scene.valid.at(r, c)) {
        const double d = scene.depth.at(r, c);
        double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
        bool all_front = true;
        for (int corner = 0; corner < 4; ++corner) {
          const double dr = (corner & 1) ? 0.5 : -0.5;
          const double dc = (corner & 2) ? 0.5 : -0.5;
          const Eigen::Vector3d x_cam((c + 0.5 + dc - cam.cx) / cam.fx * d,
                                      (r + 0.5 + dr - cam.cy) / cam.fy * d, -d);
          const PatternPoint pp = project_to_pattern(cam.pose.to_world(x_cam), proj);
          if (!pp.in_view) {
            all_front = false;
            break;
          }
          umin = std::min(umin, pp.u);
          umax = std::max(umax, pp.u);
          vmin = std::min(vmin, pp.v);
          vmax = std::max(vmax, pp.v);
        }
        if (all_front) {
          e.u0 = std::max(0, static_cast<int>(std::floor(umin)));
          e.u1 = std::min(pw - 1, static_cast<int>(std::floor(umax)));
          e.v0 = std::max(0, static_cast<int>(std::floor(vmin)));
          e.v1 = std::min(ph - 1, static_cast<int>(std::floor(vmax)));
          const PatternPoint center =
              project_to_pattern(lift_pixel(r, c, d, cam), proj);
          e.depth = center.depth;
          e.ok = e.u0 <= e.u1 && e.v0 <= e.v1;
        }
      }
      splats[static_cast<size_t>(r) * w + c] = e;
    }
  }

  ImageU8 shadowed(w, h, 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!scene.valid.at(r, c)) continue;
      const PatternPoint pp =
          project_to_pattern(lift_pixel(r, c, scene.depth.at(r, c), cam), proj);
      const bool lit_geom = pp.in_view && pp.u >= 0 && pp.u <= pw && pp.v >= 0 && pp.v <= ph;
      if (!lit_geom) continue;
      const int u = std::clamp(static_cast<int>(std::floor(pp.u)), 0, pw - 1);
      const int v = std::clamp(static_cast<int>(std::floor(pp.v)), 0, ph - 1);
      float zmin = std::numeric_limits<float>::infinity();
      for (const Entry& e : splats) {
        if (!e.ok) continue;
        if (u < e.u0 || u > e.u1 || v < e.v0 || v > e.v1) continue;
        zmin = std::min(zmin, static_cast<float>(e.depth));
      }
      shadowed.at(r, c) = pp.depth > zmin + eps_sh_mm ? 1 : 0;
    }
  }
  return shadowed;
}

}  // namespace voxsl::oracle

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "voxsl/camera.hpp"
#include "voxsl/density_grid.hpp"
#include "voxsl/image.hpp"
#include "voxsl/patterns.hpp"

namespace voxsl {

// Per-pixel radiometric decomposition of a capture set: background light
// level B (min over captures) and fringe contrast F (max - min). Pixels with
// F below f_min carry no pattern signal (occluded / out of projector view)
// and are masked invalid.
struct PixelStats {
  ImageF background;  // B
  ImageF contrast;    // F
  ImageU8 valid;
  float f_min = 0.02f;

  size_t valid_count() const;
};

PixelStats compute_background_and_contrast(std::span<const ImageF> captures,
                                           float f_min = 0.02f);

// One camera ray with its NDC sampling. Positions are filled by
// sample_along_ray; densities and compositing terms by the evaluation
// helpers below. Boundaries s partition [-1, z_ndc_max] into K intervals;
// samples sit at interval midpoints (or jittered within their interval).
struct RaySamples {
  Ray ray;
  double ndc_x = 0, ndc_y = 0;          // constant along the ray in NDC
  std::vector<double> s;                // K+1 interval boundaries (NDC depth)
  std::vector<Eigen::Vector3d> x_ndc;   // K sample positions, NDC
  std::vector<Eigen::Vector3d> x_world; // K sample positions, world (mm)
  std::vector<double> delta;            // K interval lengths (NDC units)
  std::vector<double> sigma;            // K activated densities
  std::vector<double> alpha, transmittance, weight;  // K compositing terms

  int sample_count() const { return static_cast<int>(delta.size()); }
};

// Stratified jitter offset in [0,1) for sample i of the ray through pixel
// (row, col). Counter-based, so sampling is reproducible and independent of
// evaluation order.
double jitter_offset(uint64_t seed, int row, int col, int sample_index);

// The camera is expected at the world origin with identity orientation (the
// monocular convention).
RaySamples sample_along_ray(const Ray& ray, const NdcFrame& frame, int samples_per_ray,
                            bool jitter, uint64_t jitter_seed, double z_ndc_max = 1.0);

// sigma = activate(query_raw(grid, x_ndc)) for every sample.
void fill_densities(const DensityGrid& grid, RaySamples& rs);

struct CompositeResult {
  std::vector<double> alpha;
  std::vector<double> transmittance;
  std::vector<double> weight;
};

// Front-to-back exponential compositing:
//   alpha_i = 1 - exp(-sigma_i delta_i), T_1 = 1, T_i = prod_{j<i}(1-alpha_j),
//   w_i = T_i alpha_i.
CompositeResult composite(std::span<const double> sigma, std::span<const double> delta);

// Convenience: run composite over rs.sigma/rs.delta and store the results.
void composite_ray(RaySamples& rs);

// Sum of w_i c_i. No background term: weights may sum below one.
double render_color(std::span<const double> weight, std::span<const double> color);

// Expected surface point sum w_i x_i, in whatever space x is given (world
// coordinates for metric depth).
Eigen::Vector3d render_surface_point(std::span<const double> weight,
                                     std::span<const Eigen::Vector3d> x);

// c = B + F * P(pi(x_world)); out-of-view samples contribute pattern value 0.
double lookup_pattern_color(const Eigen::Vector3d& x_world, double background, double contrast,
                            const Pattern& pattern, const ProjectorModel& proj);

// Identical contract to lookup_pattern_color, evaluated at the rendered
// surface point.
double surface_color(const Eigen::Vector3d& surface_point, double background, double contrast,
                     const Pattern& pattern, const ProjectorModel& proj);

}  // namespace voxsl

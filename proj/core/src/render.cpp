#include "voxsl/render.hpp"

#include <cmath>
#include <stdexcept>

#include "voxsl/rng.hpp"

namespace voxsl {

size_t PixelStats::valid_count() const {
  size_t n = 0;
  for (size_t i = 0; i < valid.size(); ++i) n += valid.data()[i] != 0;
  return n;
}

PixelStats compute_background_and_contrast(std::span<const ImageF> captures, float f_min) {
  if (captures.size() < 2)
    throw std::invalid_argument("compute_background_and_contrast: need at least 2 captures");
  const int w = captures[0].width(), h = captures[0].height();
  for (const ImageF& img : captures)
    if (!img.same_size(w, h))
      throw std::invalid_argument("compute_background_and_contrast: capture sizes differ");

  PixelStats stats;
  stats.background = ImageF(w, h);
  stats.contrast = ImageF(w, h);
  stats.valid = ImageU8(w, h);
  stats.f_min = f_min;

  for (size_t i = 0; i < stats.background.size(); ++i) {
    float lo = captures[0].data()[i];
    float hi = lo;
    for (size_t j = 1; j < captures.size(); ++j) {
      const float v = captures[j].data()[i];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    stats.background.data()[i] = lo;
    stats.contrast.data()[i] = hi - lo;
    stats.valid.data()[i] = (hi - lo) >= f_min ? 1 : 0;
  }
  return stats;
}

double jitter_offset(uint64_t seed, int row, int col, int sample_index) {
  const uint64_t ray_tag = (static_cast<uint64_t>(static_cast<uint32_t>(row)) << 32) |
                           static_cast<uint64_t>(static_cast<uint32_t>(col));
  return unit_double(hash_draw(seed, ray_tag * 0x10001ull + static_cast<uint64_t>(sample_index)));
}

RaySamples sample_along_ray(const Ray& ray, const NdcFrame& frame, int samples_per_ray,
                            bool jitter, uint64_t jitter_seed, double z_ndc_max) {
  if (samples_per_ray < 2)
    throw std::invalid_argument("sample_along_ray: need at least 2 samples");
  if (!(z_ndc_max > -1.0 && z_ndc_max <= 1.0))
    throw std::invalid_argument("sample_along_ray: z_ndc_max must lie in (-1, 1]");

  RaySamples rs;
  rs.ray = ray;

  // A camera-center ray is a vertical line in NDC: x*, y* depend only on the
  // direction, z* sweeps the depth range.
  const double dz = ray.direction.z();
  if (!(dz < 0))
    throw std::invalid_argument("sample_along_ray: ray must look along -z");
  rs.ndc_x = frame.near * (ray.direction.x() / -dz) / frame.r;
  rs.ndc_y = frame.near * (ray.direction.y() / -dz) / frame.t;

  const int k = samples_per_ray;
  const double lo = -1.0;
  const double step = (z_ndc_max - lo) / k;

  rs.s.resize(k + 1);
  for (int i = 0; i <= k; ++i) rs.s[i] = lo + step * i;
  rs.s[k] = z_ndc_max;  // avoid accumulation drift at the top boundary

  rs.x_ndc.resize(k);
  rs.x_world.resize(k);
  rs.delta.resize(k);
  for (int i = 0; i < k; ++i) {
    rs.delta[i] = rs.s[i + 1] - rs.s[i];
    const double offset = jitter ? jitter_offset(jitter_seed, ray.row, ray.col, i) : 0.5;
    const double z = rs.s[i] + offset * rs.delta[i];
    rs.x_ndc[i] = Eigen::Vector3d(rs.ndc_x, rs.ndc_y, z);
    rs.x_world[i] = ndc_to_world(rs.x_ndc[i], frame);
  }
  return rs;
}

void fill_densities(const DensityGrid& grid, RaySamples& rs) {
  const int k = rs.sample_count();
  rs.sigma.resize(k);
  for (int i = 0; i < k; ++i)
    rs.sigma[i] = activate(query_raw(grid, rs.x_ndc[i]), grid.bias);
}

CompositeResult composite(std::span<const double> sigma, std::span<const double> delta) {
  if (sigma.size() != delta.size())
    throw std::invalid_argument("composite: sigma/delta length mismatch");
  const size_t k = sigma.size();
  CompositeResult out;
  out.alpha.resize(k);
  out.transmittance.resize(k);
  out.weight.resize(k);
  double trans = 1.0;
  for (size_t i = 0; i < k; ++i) {
    const double a = 1.0 - std::exp(-sigma[i] * delta[i]);
    out.alpha[i] = a;
    out.transmittance[i] = trans;
    out.weight[i] = trans * a;
    trans *= 1.0 - a;
  }
  return out;
}

void composite_ray(RaySamples& rs) {
  CompositeResult res = composite(rs.sigma, rs.delta);
  rs.alpha = std::move(res.alpha);
  rs.transmittance = std::move(res.transmittance);
  rs.weight = std::move(res.weight);
}

double render_color(std::span<const double> weight, std::span<const double> color) {
  if (weight.size() != color.size())
    throw std::invalid_argument("render_color: weight/color length mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < weight.size(); ++i) acc += weight[i] * color[i];
  return acc;
}

Eigen::Vector3d render_surface_point(std::span<const double> weight,
                                     std::span<const Eigen::Vector3d> x) {
  if (weight.size() != x.size())
    throw std::invalid_argument("render_surface_point: weight/x length mismatch");
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < weight.size(); ++i) acc += weight[i] * x[i];
  return acc;
}

double lookup_pattern_color(const Eigen::Vector3d& x_world, double background, double contrast,
                            const Pattern& pattern, const ProjectorModel& proj) {
  const PatternPoint pp = project_to_pattern(x_world, proj);
  double pattern_value = 0.0;
  if (pp.in_view) pattern_value = bilinear_sample(pattern.image, pp.u, pp.v);
  return background + contrast * pattern_value;
}

double surface_color(const Eigen::Vector3d& surface_point, double background, double contrast,
                     const Pattern& pattern, const ProjectorModel& proj) {
  return lookup_pattern_color(surface_point, background, contrast, pattern, proj);
}

}  // namespace voxsl

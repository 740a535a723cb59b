#include "voxsl/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace voxsl {

DisparityMap depth_to_disparity(const DepthMap& d, double fx, double baseline_mm) {
  if (!(fx > 0) || !(baseline_mm > 0))
    throw std::invalid_argument("depth_to_disparity: fx and baseline must be > 0");
  DisparityMap out;
  out.disp = ImageF(d.depth.width(), d.depth.height());
  out.valid = d.valid;
  const double fb = fx * baseline_mm;
  for (size_t i = 0; i < d.depth.size(); ++i) {
    const float z = d.depth.data()[i];
    out.disp.data()[i] = d.valid.data()[i] && z > 0 ? static_cast<float>(fb / z) : 0.0f;
  }
  return out;
}

double mae_depth(const DepthMap& est, const DepthMap& gt,
                 const std::optional<OutlierSubstitution>& outlier) {
  if (!est.depth.same_size(gt.depth))
    throw std::invalid_argument("mae_depth: map sizes differ");

  size_t gt_count = 0;
  for (size_t i = 0; i < gt.valid.size(); ++i) gt_count += gt.valid.data()[i] != 0;
  if (gt_count == 0) throw std::invalid_argument("mae_depth: no valid ground-truth pixels");

  if (!outlier) {
    double acc = 0;
    size_t n = 0;
    for (size_t i = 0; i < gt.valid.size(); ++i) {
      if (!gt.valid.data()[i] || !est.valid.data()[i]) continue;
      acc += std::abs(static_cast<double>(est.depth.data()[i]) - gt.depth.data()[i]);
      ++n;
    }
    if (n == 0) throw std::invalid_argument("mae_depth: no jointly valid pixels");
    return acc / static_cast<double>(n);
  }

  // Mean of the valid estimated depths (within the GT-valid domain) stands
  // in for invalid or outlier estimates.
  const double fb = outlier->fx * outlier->baseline_mm;
  if (!(fb > 0))
    throw std::invalid_argument("mae_depth: outlier substitution needs fx and baseline");
  double mean_est = 0;
  size_t n_est = 0;
  for (size_t i = 0; i < gt.valid.size(); ++i) {
    if (!gt.valid.data()[i] || !est.valid.data()[i]) continue;
    mean_est += est.depth.data()[i];
    ++n_est;
  }
  mean_est = n_est ? mean_est / static_cast<double>(n_est) : 0.0;

  double acc = 0;
  for (size_t i = 0; i < gt.valid.size(); ++i) {
    if (!gt.valid.data()[i]) continue;
    const double gt_z = gt.depth.data()[i];
    double est_z = mean_est;
    if (est.valid.data()[i] && est.depth.data()[i] > 0) {
      const double cand = est.depth.data()[i];
      const double disp_err = std::abs(fb / cand - fb / gt_z);
      if (disp_err <= outlier->threshold_px) est_z = cand;
    }
    acc += std::abs(est_z - gt_z);
  }
  return acc / static_cast<double>(gt_count);
}

double outlier_percentage(const DisparityMap& est, const DisparityMap& gt, double threshold_px) {
  if (!(threshold_px > 0)) throw std::invalid_argument("outlier_percentage: t must be > 0");
  if (!est.disp.same_size(gt.disp))
    throw std::invalid_argument("outlier_percentage: map sizes differ");
  size_t gt_count = 0, outliers = 0;
  for (size_t i = 0; i < gt.valid.size(); ++i) {
    if (!gt.valid.data()[i]) continue;
    ++gt_count;
    if (!est.valid.data()[i]) {
      ++outliers;
      continue;
    }
    const double err = std::abs(static_cast<double>(est.disp.data()[i]) - gt.disp.data()[i]);
    if (err > threshold_px) ++outliers;
  }
  if (gt_count == 0) return 0.0;
  return 100.0 * static_cast<double>(outliers) / static_cast<double>(gt_count);
}

}  // namespace voxsl

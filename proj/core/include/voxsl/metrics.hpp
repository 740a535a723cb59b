#pragma once

#include <optional>

#include "voxsl/image.hpp"

namespace voxsl {

struct DepthMap {
  ImageF depth;  // mm
  ImageU8 valid;
};

struct DisparityMap {
  ImageF disp;  // px
  ImageU8 valid;
};

// disp = fx * baseline / depth per valid pixel.
DisparityMap depth_to_disparity(const DepthMap& d, double fx, double baseline_mm);

// Outlier substitution for MAE, following the disparity-error criterion:
// estimated pixels that are invalid or whose disparity error exceeds
// threshold_px are replaced by the mean of the valid estimated depths.
struct OutlierSubstitution {
  double threshold_px = 1.0;
  double fx = 0;
  double baseline_mm = 0;
};

// Mean absolute depth error (mm) over pixels valid in the ground truth.
// Without substitution, invalid estimated pixels are skipped (plain masked
// MAE). Throws when the ground truth has no valid pixels.
double mae_depth(const DepthMap& est, const DepthMap& gt,
                 const std::optional<OutlierSubstitution>& outlier = std::nullopt);

// Percentage of GT-valid pixels whose disparity error exceeds t (invalid
// estimates count as outliers).
double outlier_percentage(const DisparityMap& est, const DisparityMap& gt, double threshold_px);

}  // namespace voxsl

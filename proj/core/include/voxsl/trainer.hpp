#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "voxsl/camera.hpp"
#include "voxsl/density_grid.hpp"
#include "voxsl/losses.hpp"
#include "voxsl/metrics.hpp"
#include "voxsl/patterns.hpp"
#include "voxsl/render.hpp"
#include "voxsl/rng.hpp"

namespace voxsl {

// Two-phase optimization schedule. Defaults reproduce the working
// configuration: 256^3 grid, alpha_init 1e-2, half-voxel steps, 8192 rays
// per iteration, 3000 iterations without the surface loss then 29000 with
// it, lambda_d 0.01 throughout.
struct TrainConfig {
  std::array<int, 3> grid_dims{256, 256, 256};
  double alpha_init = 1e-2;
  double step_size_voxels = 0.5;  // sampling step as a fraction of the z voxel size
  int rays_per_iter = 8192;       // M
  int phase1_iters = 3000;
  int phase2_iters = 29000;
  double lambda_d = 0.01;
  double lambda_s_phase2 = 1.0;
  double lr_start = 0.1;
  double lr_end = 0.01;  // exponential decay target over the run
  uint64_t seed = 0;
  double near_mm = 0;  // required, scene-dependent
  bool jitter = true;
  double z_ndc_max = 1.0;
  float f_min = 0.02f;          // contrast validity threshold
  double w_min = 0.5;           // accumulated-weight threshold at extraction
  bool normalize_depth = false; // divide the surface point by sum(w) at extraction
  double pattern_blur_sigma = 0.0;  // optional Gaussian pre-blur of the patterns
  int log_interval = 100;
  int workers = 1;
  bool deterministic = false;

  void validate() const;
  int total_iters() const { return phase1_iters + phase2_iters; }

  // Samples per ray from the step size: delta = step_size_voxels * 2/N_z,
  // K = round(extent / delta); defaults give K = 2 N_z.
  int samples_per_ray() const;
};

// Adam moments over the raw grid. Moments update only for voxels touched by
// a nonzero gradient; bias correction uses the global step count.
struct OptimizerState {
  std::vector<float> first_moment;
  std::vector<float> second_moment;
  int64_t step_count = 0;

  OptimizerState() = default;
  explicit OptimizerState(const DensityGrid& grid)
      : first_moment(grid.voxel_count(), 0.0f), second_moment(grid.voxel_count(), 0.0f) {}
};

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.99;
constexpr double kAdamEps = 1e-8;

void adam_step(DensityGrid& grid, const GridGradient& grad, OptimizerState& state, double lr);

// Uniform batch of valid pixels, without replacement within one call. When
// fewer than m valid pixels exist it samples with replacement and sets the
// warning flag.
class BatchSampler {
 public:
  BatchSampler(const PixelStats& stats, uint64_t seed);

  std::vector<PixelRef> next(int m);
  size_t valid_count() const { return pool_.size(); }
  bool warned_with_replacement() const { return warned_; }

 private:
  std::vector<PixelRef> pool_;
  SplitMix64 rng_;
  bool warned_ = false;
};

// One-shot form of the sampler.
std::vector<PixelRef> make_batch(const PixelStats& stats, SplitMix64& rng, int m);

struct LogRow {
  int iteration = 0;
  double photo = 0, dist = 0, surface = 0, total = 0;
  double wall_s = 0;
};

struct TrainResult {
  DensityGrid grid;
  std::vector<LogRow> log;
  LossReport final_report;
  double wall_seconds = 0;
  bool sampled_with_replacement = false;
};

// Runs the two-phase schedule and returns the trained grid. Deterministic
// given the seed when workers == 1 or deterministic == true. Aborts with a
// diagnostic checkpoint (path + ".nan-dump") on a non-finite loss. When
// log_csv is non-null, one CSV row per log interval:
//   iteration,photo,dist,surface,total,wall_clock_s
TrainResult train(std::span<const ImageF> captures, std::span<const Pattern> patterns,
                  const CameraModel& cam, const ProjectorModel& proj, const TrainConfig& config,
                  std::ostream* log_csv = nullptr, const std::string& diagnostic_prefix = "");

// Renders the expected surface point of every camera pixel and takes its
// metric z-depth. Pixels whose accumulated weight stays below w_min are
// invalid. Pure: repeated calls are bit-identical.
DepthMap extract_depth_map(const DensityGrid& grid, const CameraModel& cam,
                           const NdcFrame& frame, int samples_per_ray, double w_min = 0.5,
                           bool normalize = false, double z_ndc_max = 1.0);

}  // namespace voxsl

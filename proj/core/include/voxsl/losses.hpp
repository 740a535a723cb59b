#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "voxsl/camera.hpp"
#include "voxsl/density_grid.hpp"
#include "voxsl/image.hpp"
#include "voxsl/patterns.hpp"
#include "voxsl/render.hpp"

namespace voxsl {

struct LossWeights {
  double lambda_d = 0.01;  // distortion weight
  double lambda_s = 0.0;   // surface color weight

  void validate() const;
};

struct LossReport {
  double photo = 0;
  double dist = 0;
  double surface = 0;
  double total = 0;
  size_t ray_count = 0;  // contributing (ray, pattern) residuals, M*N
};

// Mean squared error over M*N (ray, pattern) residuals. Invalid-masked
// pixels must be excluded before the call; an empty batch throws.
double photometric_loss(std::span<const double> rendered, std::span<const double> captured);

// Per-ray distortion: sum_{i,j} w_i w_j |mid_i - mid_j| + (1/3) sum_i w_i^2
// (s_{i+1} - s_i), evaluated with the O(K) prefix-sum reformulation.
double distortion_loss_ray(std::span<const double> s, std::span<const double> w);

double distortion_loss_total(std::span<const double> per_ray);

// Same contract as photometric_loss, applied to surface-point colors.
double surface_loss(std::span<const double> surface_rendered, std::span<const double> captured);

LossReport total_loss(double photo, double dist, double surface, size_t ray_count,
                      const LossWeights& weights);

// --------------------------------------------------------------------------
// Batched training loss and its adjoint.

struct PixelRef {
  int32_t row = 0;
  int32_t col = 0;
};

// Pattern values interleaved per texel, data[(v * width + u) * count + j],
// so one bilinear footprint fetches every pattern's value from adjacent
// memory. Values are the same floats as the source patterns.
struct PatternStack {
  int width = 0, height = 0, count = 0;
  std::vector<float> data;

  PatternStack() = default;
  explicit PatternStack(std::span<const Pattern> patterns);
};

// Everything a batch evaluation reads. The camera must sit at the world
// origin with identity orientation (the monocular convention); the
// projector pose is arbitrary.
struct BatchContext {
  const DensityGrid* grid = nullptr;
  const CameraModel* cam = nullptr;
  const ProjectorModel* proj = nullptr;
  const PatternStack* patterns = nullptr;
  const PixelStats* stats = nullptr;
  std::span<const ImageF> captures;
  NdcFrame frame;
  int samples_per_ray = 0;
  bool jitter = false;
  uint64_t jitter_seed = 0;
  double z_ndc_max = 1.0;
};

// Forward-only loss of a pixel batch. This walks the exact computation the
// adjoint differentiates, which is what the finite-difference checks probe.
LossReport batch_loss(const BatchContext& ctx, std::span<const PixelRef> batch,
                      const LossWeights& weights);

// Analytic gradient of the total batch loss with respect to every raw grid
// value touched by the batch. Chains loss -> (rendered color, per-ray
// distortion, surface color) -> weights -> (alpha, transmittance) -> sigma
// -> softplus -> trilinear scatter; the surface branch additionally chains
// through the pattern bilinear derivative and the projection Jacobian at
// the rendered surface point. `grad` must match the grid and is accumulated
// into (not cleared).
LossReport backward_batch(const BatchContext& ctx, std::span<const PixelRef> batch,
                          const LossWeights& weights, GridGradient& grad);

namespace detail {

// Partial sums of a batch slice, combined across workers by the trainer.
struct BatchAccum {
  double photo_sq = 0;   // sum of squared photometric residuals
  double dist_sum = 0;   // sum of per-ray distortion losses
  double surf_sq = 0;    // sum of squared surface residuals
  size_t rays = 0;

  void merge(const BatchAccum& o) {
    photo_sq += o.photo_sq;
    dist_sum += o.dist_sum;
    surf_sq += o.surf_sq;
    rays += o.rays;
  }
};

// Scratch buffers reused across rays; one instance per worker.
struct RayWorkspace {
  std::vector<double> tpar, sig, spd, trans_exp, weight, trans, gw, dsig, uu, vv;
  std::vector<int> iz;
  std::vector<double> fz;
  std::vector<float> patv;      // K * N pattern values
  std::vector<double> resid;    // N photometric residuals
  std::vector<double> sresid;   // N surface residuals
  std::vector<double> pat_sum;  // N accumulators
};

// Evaluates `batch` (a slice of the full batch) and accumulates loss terms
// into `accum`; when `grad` is non-null also scatters the gradient. inv_mn
// and inv_m normalize by the FULL batch size, supplied by the caller. With
// atomic_adds the scatter uses atomic accumulation so several workers may
// share one gradient buffer.
void eval_batch_slice(const BatchContext& ctx, std::span<const PixelRef> batch,
                      const LossWeights& weights, double inv_mn, double inv_m,
                      RayWorkspace& ws, BatchAccum& accum, GridGradient* grad,
                      bool atomic_adds = false);

LossReport assemble_report(const BatchAccum& accum, size_t batch_size, size_t pattern_count,
                           const LossWeights& weights);

}  // namespace detail

}  // namespace voxsl

#include "voxsl/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

namespace voxsl {

void TrainConfig::validate() const {
  if (grid_dims[0] < 2 || grid_dims[1] < 2 || grid_dims[2] < 2)
    throw std::invalid_argument("train config: grid dims must be >= 2");
  if (!(alpha_init > 0 && alpha_init < 1))
    throw std::invalid_argument("train config: alpha_init must lie in (0,1)");
  if (!(step_size_voxels > 0))
    throw std::invalid_argument("train config: step size must be > 0");
  if (rays_per_iter < 1) throw std::invalid_argument("train config: rays_per_iter must be >= 1");
  if (phase1_iters < 0 || phase2_iters < 0 || total_iters() < 1)
    throw std::invalid_argument("train config: iteration counts must be positive");
  if (lambda_d < 0 || lambda_s_phase2 < 0)
    throw std::invalid_argument("train config: lambdas must be >= 0");
  if (!(lr_start > 0) || !(lr_end > 0))
    throw std::invalid_argument("train config: learning rates must be > 0");
  if (!(near_mm > 0)) throw std::invalid_argument("train config: near_mm must be set (> 0)");
  if (!(z_ndc_max > -1.0 && z_ndc_max <= 1.0))
    throw std::invalid_argument("train config: z_ndc_max must lie in (-1, 1]");
  if (workers < 1) throw std::invalid_argument("train config: workers must be >= 1");
  if (log_interval < 1) throw std::invalid_argument("train config: log_interval must be >= 1");
}

int TrainConfig::samples_per_ray() const {
  const double delta = step_size_voxels * 2.0 / grid_dims[2];
  const double extent = z_ndc_max + 1.0;
  const int k = static_cast<int>(std::lround(extent / delta));
  return std::max(2, k);
}

void adam_step(DensityGrid& grid, const GridGradient& grad, OptimizerState& state, double lr) {
  if (grad.dims != grid.dims)
    throw std::invalid_argument("adam_step: gradient dims mismatch");
  if (state.first_moment.size() != grid.voxel_count())
    throw std::invalid_argument("adam_step: optimizer state dims mismatch");

  state.step_count += 1;
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step_count));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step_count));

  const size_t n = grid.voxel_count();
  const double* g = grad.raw_grad.data();
  float* m = state.first_moment.data();
  float* v = state.second_moment.data();
  float* x = grid.raw.data();
  for (size_t i = 0; i < n; ++i) {
    if (g[i] == 0.0) continue;  // sparse update: untouched voxels keep state
    const double gi = g[i];
    const double mi = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * gi;
    const double vi = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * gi * gi;
    m[i] = static_cast<float>(mi);
    v[i] = static_cast<float>(vi);
    const double m_hat = mi / c1;
    const double v_hat = vi / c2;
    x[i] = static_cast<float>(x[i] - lr * m_hat / (std::sqrt(v_hat) + kAdamEps));
  }
}

BatchSampler::BatchSampler(const PixelStats& stats, uint64_t seed) : rng_(seed) {
  const int w = stats.valid.width(), h = stats.valid.height();
  pool_.reserve(stats.valid_count());
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (stats.valid.at(r, c)) pool_.push_back(PixelRef{r, c});
  if (pool_.empty()) throw std::invalid_argument("BatchSampler: no valid pixels");
}

std::vector<PixelRef> BatchSampler::next(int m) {
  std::vector<PixelRef> batch(static_cast<size_t>(m));
  const size_t pool = pool_.size();
  if (static_cast<size_t>(m) <= pool) {
    // Partial Fisher-Yates over the persistent pool: without replacement
    // within the call.
    for (int i = 0; i < m; ++i) {
      const size_t j = i + rng_.next_below(pool - i);
      std::swap(pool_[i], pool_[j]);
      batch[i] = pool_[i];
    }
  } else {
    if (!warned_) {
      std::fprintf(stderr,
                   "voxsl: batch of %d exceeds %zu valid pixels; sampling with replacement\n",
                   m, pool);
      warned_ = true;
    }
    for (int i = 0; i < m; ++i) batch[i] = pool_[rng_.next_below(pool)];
  }
  return batch;
}

std::vector<PixelRef> make_batch(const PixelStats& stats, SplitMix64& rng, int m) {
  std::vector<PixelRef> pool;
  const int w = stats.valid.width(), h = stats.valid.height();
  pool.reserve(stats.valid_count());
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (stats.valid.at(r, c)) pool.push_back(PixelRef{r, c});
  std::vector<PixelRef> batch(static_cast<size_t>(m));
  if (static_cast<size_t>(m) <= pool.size()) {
    for (int i = 0; i < m; ++i) {
      const size_t j = i + rng.next_below(pool.size() - i);
      std::swap(pool[i], pool[j]);
      batch[i] = pool[i];
    }
  } else {
    std::fprintf(stderr, "voxsl: batch of %d exceeds %zu valid pixels; sampling with replacement\n",
                 m, pool.size());
    for (int i = 0; i < m; ++i) batch[i] = pool[rng.next_below(pool.size())];
  }
  return batch;
}

namespace {

// Splits `count` items into roughly equal contiguous chunks.
std::pair<size_t, size_t> worker_range(size_t count, int workers, int w) {
  const size_t per = count / workers, rem = count % workers;
  const size_t begin = w * per + std::min<size_t>(w, rem);
  const size_t end = begin + per + (static_cast<size_t>(w) < rem ? 1 : 0);
  return {begin, end};
}

}  // namespace

TrainResult train(std::span<const ImageF> captures, std::span<const Pattern> patterns,
                  const CameraModel& cam, const ProjectorModel& proj, const TrainConfig& config,
                  std::ostream* log_csv, const std::string& diagnostic_prefix) {
  config.validate();
  cam.validate();
  proj.validate(cam);
  if (captures.size() < 2) throw std::invalid_argument("train: need at least 2 captures");
  if (captures.size() != patterns.size())
    throw std::invalid_argument("train: capture count must match pattern count");
  if ((cam.pose.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-12 ||
      cam.pose.translation.norm() > 1e-12)
    throw std::invalid_argument("train: the camera pose must be the identity");

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  const NdcFrame frame = ndc_frame_from_camera(cam, config.near_mm);
  const PixelStats stats = compute_background_and_contrast(captures, config.f_min);

  std::vector<Pattern> blurred;
  if (config.pattern_blur_sigma > 0)
    for (const Pattern& p : patterns)
      blurred.push_back(blur_pattern(p, config.pattern_blur_sigma));
  const PatternStack stack(config.pattern_blur_sigma > 0 ? std::span<const Pattern>(blurred)
                                                         : patterns);

  const int k = config.samples_per_ray();
  const double delta_ndc = (config.z_ndc_max + 1.0) / k;

  TrainResult result;
  result.grid = DensityGrid(config.grid_dims[0], config.grid_dims[1], config.grid_dims[2],
                            init_bias(config.alpha_init, delta_ndc));

  BatchContext ctx;
  ctx.grid = &result.grid;
  ctx.cam = &cam;
  ctx.proj = &proj;
  ctx.patterns = &stack;
  ctx.stats = &stats;
  ctx.captures = captures;
  ctx.frame = frame;
  ctx.samples_per_ray = k;
  ctx.jitter = config.jitter;
  ctx.z_ndc_max = config.z_ndc_max;

  OptimizerState opt(result.grid);
  BatchSampler sampler(stats, hash_draw(config.seed, 1));

  const int workers = std::max(1, config.workers);
  const bool ordered_merge = workers <= 4 || config.deterministic;
  std::vector<GridGradient> worker_grad;
  std::vector<detail::RayWorkspace> worker_ws(workers);
  const int grad_buffers = ordered_merge ? workers : 1;
  for (int i = 0; i < grad_buffers; ++i) worker_grad.emplace_back(result.grid);

  const int total = config.total_iters();
  const double lr_decay =
      total > 1 ? std::log(config.lr_end / config.lr_start) / (total - 1) : 0.0;

  if (log_csv) *log_csv << "iteration,photo,dist,surface,total,wall_clock_s\n";

  LossWeights weights;
  weights.lambda_d = config.lambda_d;

  for (int iter = 0; iter < total; ++iter) {
    weights.lambda_s = iter < config.phase1_iters ? 0.0 : config.lambda_s_phase2;
    const double lr = config.lr_start * std::exp(lr_decay * iter);
    ctx.jitter_seed = hash_draw(config.seed, 0x100000000ull + static_cast<uint64_t>(iter));

    std::vector<PixelRef> batch = sampler.next(config.rays_per_iter);
    // Raster-order processing keeps neighboring rays on shared grid columns
    // and nearby pattern rows; the batch set itself is unchanged.
    std::sort(batch.begin(), batch.end(), [](const PixelRef& a, const PixelRef& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });

    for (auto& g : worker_grad) g.clear();
    detail::BatchAccum accum;
    const double inv_mn = 1.0 / (static_cast<double>(batch.size()) * stack.count);
    const double inv_m = 1.0 / static_cast<double>(batch.size());

    if (workers == 1) {
      detail::eval_batch_slice(ctx, batch, weights, inv_mn, inv_m, worker_ws[0], accum,
                               &worker_grad[0]);
    } else {
      std::vector<detail::BatchAccum> accums(workers);
      std::vector<std::thread> threads;
      threads.reserve(workers - 1);
      auto run = [&](int w) {
        const auto [b, e] = worker_range(batch.size(), workers, w);
        GridGradient& g = ordered_merge ? worker_grad[w] : worker_grad[0];
        detail::eval_batch_slice(ctx, std::span(batch).subspan(b, e - b), weights, inv_mn,
                                 inv_m, worker_ws[w], accums[w], &g, !ordered_merge);
      };
      for (int w = 1; w < workers; ++w) threads.emplace_back(run, w);
      run(0);
      for (auto& t : threads) t.join();
      for (int w = 0; w < workers; ++w) accum.merge(accums[w]);
      if (ordered_merge) {
        double* dst = worker_grad[0].raw_grad.data();
        for (int w = 1; w < workers; ++w) {
          const double* src = worker_grad[w].raw_grad.data();
          for (size_t i = 0; i < result.grid.voxel_count(); ++i) dst[i] += src[i];
        }
      }
    }

    const LossReport report =
        detail::assemble_report(accum, batch.size(), stack.count, weights);
    if (!std::isfinite(report.total)) {
      const std::string dump =
          (diagnostic_prefix.empty() ? std::string("voxsl") : diagnostic_prefix) + ".nan-dump";
      save_checkpoint(result.grid, dump);
      throw std::runtime_error("train: non-finite loss at iteration " + std::to_string(iter) +
                               "; grid dumped to " + dump);
    }

    adam_step(result.grid, worker_grad[0], opt, lr);

    if (iter % config.log_interval == 0 || iter == total - 1) {
      LogRow row{iter, report.photo, report.dist, report.surface, report.total, elapsed()};
      result.log.push_back(row);
      if (log_csv) {
        char line[192];
        std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g,%.9g,%.3f\n", row.iteration,
                      row.photo, row.dist, row.surface, row.total, row.wall_s);
        *log_csv << line;
      }
    }
    result.final_report = report;
  }

  result.wall_seconds = elapsed();
  result.sampled_with_replacement = sampler.warned_with_replacement();
  return result;
}

DepthMap extract_depth_map(const DensityGrid& grid, const CameraModel& cam,
                           const NdcFrame& frame, int samples_per_ray, double w_min,
                           bool normalize, double z_ndc_max) {
  cam.validate();
  if (samples_per_ray < 2)
    throw std::invalid_argument("extract_depth_map: need at least 2 samples per ray");

  DepthMap out;
  out.depth = ImageF(cam.width, cam.height);
  out.valid = ImageU8(cam.width, cam.height, 0);

  const int k = samples_per_ray;
  const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
  const size_t stride_x = static_cast<size_t>(ny) * nz;
  const size_t stride_y = nz;
  const float* raw = grid.raw.data();
  const double bias = grid.bias;

  const double lo = -1.0, hi = z_ndc_max;
  const double step = (hi - lo) / k;
  std::vector<double> z_mid(k), tpar(k), delta(k);
  std::vector<int> izv(k);
  std::vector<double> fzv(k);
  for (int i = 0; i < k; ++i) {
    const double s0 = lo + step * i;
    const double s1 = i + 1 == k ? hi : lo + step * (i + 1);
    delta[i] = s1 - s0;
    const double z = s0 + 0.5 * delta[i];
    z_mid[i] = z;
    tpar[i] = 1.0 / (1.0 - z);
    const double gz = (z + 1.0) * 0.5 * (nz - 1);
    int iz = static_cast<int>(gz);
    if (iz > nz - 2) iz = nz - 2;
    izv[i] = iz;
    fzv[i] = gz - iz;
  }

  for (int r = 0; r < cam.height; ++r) {
    for (int c = 0; c < cam.width; ++c) {
      const double ndc_x = (c + 0.5 - cam.cx) / cam.cx;
      const double ndc_y = (r + 0.5 - cam.cy) / cam.cy;
      const GridAxisCoord ax = grid_axis_coord(ndc_x, nx);
      const GridAxisCoord ay = grid_axis_coord(ndc_y, ny);
      const size_t b00 = ax.i0 * stride_x + ay.i0 * stride_y;
      const size_t b01 = b00 + stride_y;
      const size_t b10 = b00 + stride_x;
      const size_t b11 = b10 + stride_y;
      const double w00 = (1 - ax.frac) * (1 - ay.frac);
      const double w01 = (1 - ax.frac) * ay.frac;
      const double w10 = ax.frac * (1 - ay.frac);
      const double w11 = ax.frac * ay.frac;

      double trans = 1.0, sum_w = 0.0, sum_wt = 0.0;
      for (int i = 0; i < k; ++i) {
        const int iz = izv[i];
        const double fz = fzv[i];
        const double v00 = raw[b00 + iz] + (raw[b00 + iz + 1] - static_cast<double>(raw[b00 + iz])) * fz;
        const double v01 = raw[b01 + iz] + (raw[b01 + iz + 1] - static_cast<double>(raw[b01 + iz])) * fz;
        const double v10 = raw[b10 + iz] + (raw[b10 + iz + 1] - static_cast<double>(raw[b10 + iz])) * fz;
        const double v11 = raw[b11 + iz] + (raw[b11 + iz + 1] - static_cast<double>(raw[b11 + iz])) * fz;
        const double sigma = activate(w00 * v00 + w01 * v01 + w10 * v10 + w11 * v11, bias);
        const double e = std::exp(-sigma * delta[i]);
        const double w = trans * (1.0 - e);
        sum_w += w;
        sum_wt += w * tpar[i];
        trans *= e;
      }

      if (sum_w >= w_min) {
        // Surface point is sum_wt * axis with axis.z = -2n; metric depth is
        // its -z component.
        double a = sum_wt;
        if (normalize) a /= sum_w;
        out.depth.at(r, c) = static_cast<float>(2.0 * frame.near * a);
        out.valid.at(r, c) = 1;
      }
    }
  }
  return out;
}

}  // namespace voxsl

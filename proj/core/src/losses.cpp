#include "voxsl/losses.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

#include "voxsl/rng.hpp"

namespace voxsl {

void LossWeights::validate() const {
  if (lambda_d < 0 || lambda_s < 0)
    throw std::invalid_argument("LossWeights: lambdas must be non-negative");
}

double photometric_loss(std::span<const double> rendered, std::span<const double> captured) {
  if (rendered.size() != captured.size())
    throw std::invalid_argument("photometric_loss: length mismatch");
  if (rendered.empty()) throw std::invalid_argument("photometric_loss: empty batch");
  double acc = 0.0;
  for (size_t i = 0; i < rendered.size(); ++i) {
    const double d = rendered[i] - captured[i];
    acc += d * d;
  }
  return acc / static_cast<double>(rendered.size());
}

double distortion_loss_ray(std::span<const double> s, std::span<const double> w) {
  const size_t k = w.size();
  if (s.size() != k + 1)
    throw std::invalid_argument("distortion_loss_ray: need K+1 boundaries for K weights");
  // O(K) prefix-sum form of the pairwise midpoint term:
  //   sum_{i,j} w_i w_j |m_i - m_j| = 2 sum_i w_i (m_i W_{i-1} - Q_{i-1})
  // with W, Q prefix sums of w and w*m (midpoints are increasing).
  double prefix_w = 0.0, prefix_wm = 0.0;
  double pair_term = 0.0, self_term = 0.0;
  for (size_t i = 0; i < k; ++i) {
    const double mid = 0.5 * (s[i] + s[i + 1]);
    const double len = s[i + 1] - s[i];
    pair_term += w[i] * (mid * prefix_w - prefix_wm);
    self_term += w[i] * w[i] * len;
    prefix_w += w[i];
    prefix_wm += w[i] * mid;
  }
  return 2.0 * pair_term + self_term / 3.0;
}

double distortion_loss_total(std::span<const double> per_ray) {
  if (per_ray.empty()) throw std::invalid_argument("distortion_loss_total: empty batch");
  double acc = 0.0;
  for (double v : per_ray) acc += v;
  return acc / static_cast<double>(per_ray.size());
}

double surface_loss(std::span<const double> surface_rendered, std::span<const double> captured) {
  return photometric_loss(surface_rendered, captured);
}

LossReport total_loss(double photo, double dist, double surface, size_t ray_count,
                      const LossWeights& weights) {
  weights.validate();
  LossReport rep;
  rep.photo = photo;
  rep.dist = dist;
  rep.surface = surface;
  rep.total = photo + weights.lambda_d * dist + weights.lambda_s * surface;
  rep.ray_count = ray_count;
  return rep;
}

// --------------------------------------------------------------------------

PatternStack::PatternStack(std::span<const Pattern> patterns) {
  if (patterns.empty()) throw std::invalid_argument("PatternStack: no patterns");
  width = patterns[0].image.width();
  height = patterns[0].image.height();
  count = static_cast<int>(patterns.size());
  for (const Pattern& p : patterns)
    if (!p.image.same_size(width, height))
      throw std::invalid_argument("PatternStack: pattern sizes differ");
  data.resize(static_cast<size_t>(width) * height * count);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      float* dst = data.data() + (static_cast<size_t>(r) * width + c) * count;
      for (int j = 0; j < count; ++j) dst[j] = patterns[j].image.at(r, c);
    }
}

namespace {

// Bilinear fetch of all patterns at once into out[0..count). Identical
// sampling semantics to bilinear_sample: half-integer centers, zero border.
inline void stack_sample(const PatternStack& ps, double u, double v, double* out) {
  const int n = ps.count;
  const double uf = u - 0.5, vf = v - 0.5;
  const int c0 = static_cast<int>(std::floor(uf));
  const int r0 = static_cast<int>(std::floor(vf));
  if (c0 < -1 || c0 >= ps.width || r0 < -1 || r0 >= ps.height) {
    for (int j = 0; j < n; ++j) out[j] = 0.0;
    return;
  }
  const double fu = uf - c0, fv = vf - r0;
  const size_t stride_r = static_cast<size_t>(ps.width) * n;
  const float* base = ps.data.data();

  if (c0 >= 0 && c0 + 1 < ps.width && r0 >= 0 && r0 + 1 < ps.height) {
    const float* p00 = base + static_cast<size_t>(r0) * stride_r + static_cast<size_t>(c0) * n;
    const float* p10 = p00 + stride_r;
    for (int j = 0; j < n; ++j) {
      const double top = p00[j] + (p00[n + j] - static_cast<double>(p00[j])) * fu;
      const double bot = p10[j] + (p10[n + j] - static_cast<double>(p10[j])) * fu;
      out[j] = top + (bot - top) * fv;
    }
    return;
  }
  // Border: fetch per corner with zero padding.
  auto corner = [&](int r, int c) -> const float* {
    if (r < 0 || r >= ps.height || c < 0 || c >= ps.width) return nullptr;
    return base + static_cast<size_t>(r) * stride_r + static_cast<size_t>(c) * n;
  };
  const float* p00 = corner(r0, c0);
  const float* p01 = corner(r0, c0 + 1);
  const float* p10 = corner(r0 + 1, c0);
  const float* p11 = corner(r0 + 1, c0 + 1);
  for (int j = 0; j < n; ++j) {
    const double v00 = p00 ? p00[j] : 0.0;
    const double v01 = p01 ? p01[j] : 0.0;
    const double v10 = p10 ? p10[j] : 0.0;
    const double v11 = p11 ? p11[j] : 0.0;
    const double top = v00 + (v01 - v00) * fu;
    const double bot = v10 + (v11 - v10) * fu;
    out[j] = top + (bot - top) * fv;
  }
}

// Same fetch with per-pattern (d/du, d/dv).
inline void stack_sample_grad(const PatternStack& ps, double u, double v, double* val,
                              double* du, double* dv) {
  const int n = ps.count;
  const double uf = u - 0.5, vf = v - 0.5;
  const int c0 = static_cast<int>(std::floor(uf));
  const int r0 = static_cast<int>(std::floor(vf));
  if (c0 < -1 || c0 >= ps.width || r0 < -1 || r0 >= ps.height) {
    for (int j = 0; j < n; ++j) val[j] = du[j] = dv[j] = 0.0;
    return;
  }
  const double fu = uf - c0, fv = vf - r0;
  const size_t stride_r = static_cast<size_t>(ps.width) * n;
  const float* base = ps.data.data();
  auto corner = [&](int r, int c) -> const float* {
    if (r < 0 || r >= ps.height || c < 0 || c >= ps.width) return nullptr;
    return base + static_cast<size_t>(r) * stride_r + static_cast<size_t>(c) * n;
  };
  const float* p00 = corner(r0, c0);
  const float* p01 = corner(r0, c0 + 1);
  const float* p10 = corner(r0 + 1, c0);
  const float* p11 = corner(r0 + 1, c0 + 1);
  for (int j = 0; j < n; ++j) {
    const double v00 = p00 ? p00[j] : 0.0;
    const double v01 = p01 ? p01[j] : 0.0;
    const double v10 = p10 ? p10[j] : 0.0;
    const double v11 = p11 ? p11[j] : 0.0;
    const double top = v00 + (v01 - v00) * fu;
    const double bot = v10 + (v11 - v10) * fu;
    val[j] = top + (bot - top) * fv;
    du[j] = (v01 - v00) * (1.0 - fv) + (v11 - v10) * fv;
    dv[j] = bot - top;
  }
}

void validate_context(const BatchContext& ctx) {
  if (!ctx.grid || !ctx.cam || !ctx.proj || !ctx.patterns || !ctx.stats)
    throw std::invalid_argument("batch: context has null members");
  if (ctx.patterns->count < 1) throw std::invalid_argument("batch: empty pattern stack");
  if (ctx.samples_per_ray < 2)
    throw std::invalid_argument("batch: samples_per_ray must be >= 2");
  if (ctx.captures.size() != static_cast<size_t>(ctx.patterns->count))
    throw std::invalid_argument("batch: capture count must match pattern count");
  if (!(ctx.z_ndc_max > -1.0 && ctx.z_ndc_max <= 1.0))
    throw std::invalid_argument("batch: z_ndc_max must lie in (-1, 1]");
}

constexpr double kMinProjectorDepth = 1e-9;  // mm; guards the projection Jacobian
constexpr double kMinSurfaceWeight = 1e-12;  // below this a ray is "empty"

inline void atomic_add(double* p, double v) {
  std::atomic_ref<double> ref(*p);
  double old = ref.load(std::memory_order_relaxed);
  while (!ref.compare_exchange_weak(old, old + v, std::memory_order_relaxed)) {
  }
}

}  // namespace

namespace detail {

void eval_batch_slice(const BatchContext& ctx, std::span<const PixelRef> batch,
                      const LossWeights& weights, double inv_mn, double inv_m,
                      RayWorkspace& ws, BatchAccum& accum, GridGradient* grad,
                      bool atomic_adds) {
  const DensityGrid& grid = *ctx.grid;
  const CameraModel& cam = *ctx.cam;
  const PatternStack& ps = *ctx.patterns;
  const int k = ctx.samples_per_ray;
  const int n = ps.count;
  const bool with_grad = grad != nullptr;
  const bool with_surface = weights.lambda_s != 0.0;
  const bool with_dist = weights.lambda_d != 0.0;

  const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
  const size_t stride_x = static_cast<size_t>(ny) * nz;
  const size_t stride_y = nz;
  const double bias = grid.bias;
  const float* raw_data = grid.raw.data();
  double* grad_data = with_grad ? grad->raw_grad.data() : nullptr;

  const double near = ctx.frame.near;
  const double half_r = 2.0 * ctx.frame.r;
  const double half_t = 2.0 * ctx.frame.t;

  // Projector as an affine map of the ray parameter: a world sample is
  // t * axis, so its projector-frame position is t * g_vec + h_vec.
  const Eigen::Matrix3d rot_pw = ctx.proj->pose().rotation.transpose();
  const Eigen::Vector3d h_vec = -(rot_pw * ctx.proj->pose().translation);
  const double fxp = ctx.proj->intrinsics.fx, fyp = ctx.proj->intrinsics.fy;
  const double cxp = ctx.proj->intrinsics.cx, cyp = ctx.proj->intrinsics.cy;

  // Interval boundaries are shared by all rays (jitter moves samples inside
  // their interval only). Midpoints normalized to [0,1] parameterize the
  // distortion loss.
  const double lo = -1.0, hi = ctx.z_ndc_max;
  const double step = (hi - lo) / k;
  const double inv_extent = 1.0 / (hi - lo);
  std::vector<double> bounds(k + 1), delta(k), mtil(k);
  for (int i = 0; i <= k; ++i) bounds[i] = lo + step * i;
  bounds[k] = hi;
  for (int i = 0; i < k; ++i) {
    delta[i] = bounds[i + 1] - bounds[i];
    mtil[i] = (0.5 * (bounds[i] + bounds[i + 1]) - lo) * inv_extent;
  }

  ws.tpar.assign(k, 0.0);
  ws.sig.assign(k, 0.0);
  ws.spd.assign(k, 0.0);
  ws.trans_exp.assign(k, 0.0);
  ws.weight.assign(k, 0.0);
  ws.trans.assign(k, 0.0);
  ws.gw.assign(k, 0.0);
  ws.dsig.assign(k, 0.0);
  ws.uu.assign(k, 0.0);
  ws.vv.assign(k, 0.0);
  ws.iz.assign(k, 0);
  ws.fz.assign(k, 0.0);
  ws.patv.assign(static_cast<size_t>(k) * n, 0.0f);
  ws.resid.assign(n, 0.0);
  ws.sresid.assign(n, 0.0);
  ws.pat_sum.assign(n, 0.0);

  std::vector<double> pat_at(n), pat_du(n), pat_dv(n);

  for (const PixelRef px : batch) {
    const double b_level = ctx.stats->background.at(px.row, px.col);
    const double f_level = ctx.stats->contrast.at(px.row, px.col);

    // Constant NDC (x*, y*) of the pixel's camera ray.
    const double ndc_x = (px.col + 0.5 - cam.cx) / cam.cx;
    const double ndc_y = (px.row + 0.5 - cam.cy) / cam.cy;

    const GridAxisCoord ax = grid_axis_coord(ndc_x, nx);
    const GridAxisCoord ay = grid_axis_coord(ndc_y, ny);
    const size_t base00 = ax.i0 * stride_x + ay.i0 * stride_y;
    const size_t base01 = base00 + stride_y;
    const size_t base10 = base00 + stride_x;
    const size_t base11 = base10 + stride_y;
    const double wxy00 = (1.0 - ax.frac) * (1.0 - ay.frac);
    const double wxy01 = (1.0 - ax.frac) * ay.frac;
    const double wxy10 = ax.frac * (1.0 - ay.frac);
    const double wxy11 = ax.frac * ay.frac;

    // World position of the sample at NDC depth z is tpar * axis with
    // tpar = 1/(1-z), from the inverse NDC warp.
    const Eigen::Vector3d axis(half_r * ndc_x, half_t * ndc_y, -2.0 * near);
    const Eigen::Vector3d g_vec = rot_pw * axis;

    // Pass 1: march the ray front to back: sample position, trilinear read,
    // activation, compositing. Samples past transmittance 1e-16 cannot move
    // any double-precision result, so the dead tail is skipped entirely.
    double sum_w = 0.0, sum_wt = 0.0;
    int live = k;
    {
      double trans = 1.0;
      for (int i = 0; i < k; ++i) {
        if (trans < 1e-16) {
          live = i;
          break;
        }
        const double offset =
            ctx.jitter ? jitter_offset(ctx.jitter_seed, px.row, px.col, i) : 0.5;
        const double z = bounds[i] + offset * delta[i];
        ws.tpar[i] = 1.0 / (1.0 - z);
        const double gz = (z + 1.0) * 0.5 * (nz - 1);
        int iz = static_cast<int>(gz);
        if (iz > nz - 2) iz = nz - 2;
        const double fz = gz - iz;
        ws.iz[i] = iz;
        ws.fz[i] = fz;
        const double v00 = raw_data[base00 + iz] + (raw_data[base00 + iz + 1] - static_cast<double>(raw_data[base00 + iz])) * fz;
        const double v01 = raw_data[base01 + iz] + (raw_data[base01 + iz + 1] - static_cast<double>(raw_data[base01 + iz])) * fz;
        const double v10 = raw_data[base10 + iz] + (raw_data[base10 + iz + 1] - static_cast<double>(raw_data[base10 + iz])) * fz;
        const double v11 = raw_data[base11 + iz] + (raw_data[base11 + iz + 1] - static_cast<double>(raw_data[base11 + iz])) * fz;
        const double x = wxy00 * v00 + wxy01 * v01 + wxy10 * v10 + wxy11 * v11 + bias;

        double sig, spd;  // shifted softplus and its derivative, one exp
        if (x > 30.0) {
          sig = x;
          spd = 1.0;
        } else if (x < -30.0) {
          const double e = std::exp(x);
          sig = e;
          spd = e;
        } else {
          const double e = std::exp(x);
          sig = std::log1p(e);
          spd = e / (1.0 + e);
        }
        ws.sig[i] = sig;
        ws.spd[i] = spd;

        const double e = std::exp(-sig * delta[i]);
        ws.trans_exp[i] = e;
        ws.trans[i] = trans;
        const double w = trans * (1.0 - e);
        ws.weight[i] = w;
        sum_w += w;
        sum_wt += w * ws.tpar[i];
        trans *= e;
      }
      for (int i = live; i < k; ++i) ws.weight[i] = 0.0;  // distortion reads these
    }

    // Pass 4a: project every live sample into pattern coordinates.
    for (int i = 0; i < live; ++i) {
      const double t = ws.tpar[i];
      const double qx = t * g_vec.x() + h_vec.x();
      const double qy = t * g_vec.y() + h_vec.y();
      const double qz = t * g_vec.z() + h_vec.z();
      const double depth = -qz;
      if (depth > kMinProjectorDepth) {
        ws.uu[i] = fxp * qx / depth + cxp;
        ws.vv[i] = fyp * qy / depth + cyp;
      } else {
        ws.uu[i] = -1e9;  // sampled as zero outside the pattern
        ws.vv[i] = -1e9;
      }
    }

    // Pass 4b: gather all patterns per sample, prefetching a few samples
    // ahead (the texel walk along a ray is latency-bound).
    for (int j = 0; j < n; ++j) ws.pat_sum[j] = 0.0;
    const size_t stride_r = static_cast<size_t>(ps.width) * n;
    for (int i = 0; i < live; ++i) {
      if (i + 4 < live) {
        const double uf = ws.uu[i + 4] - 0.5, vf = ws.vv[i + 4] - 0.5;
        const int c0 = static_cast<int>(uf), r0 = static_cast<int>(vf);
        if (c0 >= 0 && c0 + 1 < ps.width && r0 >= 0 && r0 + 1 < ps.height) {
          const float* p = ps.data.data() + static_cast<size_t>(r0) * stride_r +
                           static_cast<size_t>(c0) * n;
          __builtin_prefetch(p);
          __builtin_prefetch(p + stride_r);
        }
      }
      float* pv = ws.patv.data() + static_cast<size_t>(i) * n;
      stack_sample(ps, ws.uu[i], ws.vv[i], pat_at.data());
      const double w = ws.weight[i];
      for (int j = 0; j < n; ++j) {
        pv[j] = static_cast<float>(pat_at[j]);
        ws.pat_sum[j] += w * pat_at[j];
      }
    }

    // Photometric residuals.
    for (int j = 0; j < n; ++j) {
      const double rendered = b_level * sum_w + f_level * ws.pat_sum[j];
      const double captured = ctx.captures[j].at(px.row, px.col);
      ws.resid[j] = rendered - captured;
      accum.photo_sq += ws.resid[j] * ws.resid[j];
    }

    // Distortion on normalized boundaries (reported even when lambda_d = 0).
    double dist_prefix_w = 0.0, dist_prefix_wm = 0.0;
    {
      double pair_term = 0.0, self_term = 0.0;
      for (int i = 0; i < k; ++i) {
        const double w = ws.weight[i];
        pair_term += w * (mtil[i] * dist_prefix_w - dist_prefix_wm);
        self_term += w * w * (delta[i] * inv_extent);
        dist_prefix_w += w;
        dist_prefix_wm += w * mtil[i];
      }
      accum.dist_sum += 2.0 * pair_term + self_term / 3.0;
    }

    // Surface color at the rendered surface point s_l = sum_wt * axis.
    bool surface_live = false;
    double du_dA = 0.0, dv_dA = 0.0;
    if (sum_w > kMinSurfaceWeight) {
      const double qsx = sum_wt * g_vec.x() + h_vec.x();
      const double qsy = sum_wt * g_vec.y() + h_vec.y();
      const double qsz = sum_wt * g_vec.z() + h_vec.z();
      const double sdepth = -qsz;
      if (sdepth > kMinProjectorDepth) {
        const double us = fxp * qsx / sdepth + cxp;
        const double vs = fyp * qsy / sdepth + cyp;
        stack_sample_grad(ps, us, vs, pat_at.data(), pat_du.data(), pat_dv.data());
        const double inv_d2 = 1.0 / (sdepth * sdepth);
        du_dA = fxp * (g_vec.x() * sdepth + qsx * g_vec.z()) * inv_d2;
        dv_dA = fyp * (g_vec.y() * sdepth + qsy * g_vec.z()) * inv_d2;
        surface_live = true;
      }
    }
    if (!surface_live)
      for (int j = 0; j < n; ++j) pat_at[j] = 0.0;  // empty ray: pattern term drops

    for (int j = 0; j < n; ++j) {
      const double rendered_s = b_level + f_level * pat_at[j];
      const double captured = ctx.captures[j].at(px.row, px.col);
      ws.sresid[j] = rendered_s - captured;
      accum.surf_sq += ws.sresid[j] * ws.sresid[j];
    }

    accum.rays += 1;

    if (!with_grad) continue;

    // ---- adjoint ----
    // dL/dw_i from the three branches.
    const double photo_coef = 2.0 * inv_mn;
    double resid_sum = 0.0;
    for (int j = 0; j < n; ++j) resid_sum += ws.resid[j];

    double surf_dA = 0.0;
    if (with_surface && surface_live) {
      double s_scal = 0.0;
      for (int j = 0; j < n; ++j)
        s_scal += ws.sresid[j] * (pat_du[j] * du_dA + pat_dv[j] * dv_dA);
      surf_dA = weights.lambda_s * 2.0 * inv_mn * f_level * s_scal;
    }

    const double dist_coef = weights.lambda_d * inv_m;
    const double total_w = dist_prefix_w, total_wm = dist_prefix_wm;
    double run_w = 0.0, run_wm = 0.0;
    for (int i = 0; i < live; ++i) {
      const float* pv = ws.patv.data() + static_cast<size_t>(i) * n;
      double pdot = 0.0;
      for (int j = 0; j < n; ++j) pdot += ws.resid[j] * pv[j];
      double g = photo_coef * (b_level * resid_sum + f_level * pdot);

      if (with_dist) {
        const double w = ws.weight[i];
        const double before = mtil[i] * run_w - run_wm;
        const double after = (total_wm - run_wm - w * mtil[i]) - mtil[i] * (total_w - run_w - w);
        g += dist_coef * (2.0 * (before + after) + (2.0 / 3.0) * w * (delta[i] * inv_extent));
        run_w += w;
        run_wm += w * mtil[i];
      }

      if (surf_dA != 0.0) g += surf_dA * ws.tpar[i];
      ws.gw[i] = g;
    }

    // Chain to sigma: dL/dsigma_i = delta_i (g_i T_i e_i - sum_{j>i} g_j w_j).
    {
      double suffix = 0.0;
      for (int i = live - 1; i >= 0; --i) {
        ws.dsig[i] = delta[i] * (ws.gw[i] * ws.trans[i] * ws.trans_exp[i] - suffix);
        suffix += ws.gw[i] * ws.weight[i];
      }
    }

    // Softplus derivative, then trilinear scatter.
    for (int i = 0; i < live; ++i) {
      const double draw = ws.dsig[i] * ws.spd[i];
      if (draw == 0.0) continue;
      const int iz = ws.iz[i];
      const double fz = ws.fz[i];
      const double d0 = draw * (1.0 - fz), d1 = draw * fz;
      if (atomic_adds) {
        atomic_add(&grad_data[base00 + iz], wxy00 * d0);
        atomic_add(&grad_data[base00 + iz + 1], wxy00 * d1);
        atomic_add(&grad_data[base01 + iz], wxy01 * d0);
        atomic_add(&grad_data[base01 + iz + 1], wxy01 * d1);
        atomic_add(&grad_data[base10 + iz], wxy10 * d0);
        atomic_add(&grad_data[base10 + iz + 1], wxy10 * d1);
        atomic_add(&grad_data[base11 + iz], wxy11 * d0);
        atomic_add(&grad_data[base11 + iz + 1], wxy11 * d1);
      } else {
        grad_data[base00 + iz] += wxy00 * d0;
        grad_data[base00 + iz + 1] += wxy00 * d1;
        grad_data[base01 + iz] += wxy01 * d0;
        grad_data[base01 + iz + 1] += wxy01 * d1;
        grad_data[base10 + iz] += wxy10 * d0;
        grad_data[base10 + iz + 1] += wxy10 * d1;
        grad_data[base11 + iz] += wxy11 * d0;
        grad_data[base11 + iz + 1] += wxy11 * d1;
      }
    }
  }
}

LossReport assemble_report(const BatchAccum& accum, size_t batch_size, size_t pattern_count,
                           const LossWeights& weights) {
  const double inv_mn = 1.0 / (static_cast<double>(batch_size) * pattern_count);
  const double inv_m = 1.0 / static_cast<double>(batch_size);
  return total_loss(accum.photo_sq * inv_mn, accum.dist_sum * inv_m, accum.surf_sq * inv_mn,
                    batch_size * pattern_count, weights);
}

}  // namespace detail

LossReport batch_loss(const BatchContext& ctx, std::span<const PixelRef> batch,
                      const LossWeights& weights) {
  validate_context(ctx);
  weights.validate();
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  detail::RayWorkspace ws;
  detail::BatchAccum accum;
  const double inv_mn = 1.0 / (static_cast<double>(batch.size()) * ctx.patterns->count);
  const double inv_m = 1.0 / static_cast<double>(batch.size());
  detail::eval_batch_slice(ctx, batch, weights, inv_mn, inv_m, ws, accum, nullptr);
  return detail::assemble_report(accum, batch.size(), ctx.patterns->count, weights);
}

LossReport backward_batch(const BatchContext& ctx, std::span<const PixelRef> batch,
                          const LossWeights& weights, GridGradient& grad) {
  validate_context(ctx);
  weights.validate();
  if (batch.empty()) throw std::invalid_argument("backward_batch: empty batch");
  if (grad.dims != ctx.grid->dims)
    throw std::invalid_argument("backward_batch: gradient dims mismatch");
  detail::RayWorkspace ws;
  detail::BatchAccum accum;
  const double inv_mn = 1.0 / (static_cast<double>(batch.size()) * ctx.patterns->count);
  const double inv_m = 1.0 / static_cast<double>(batch.size());
  detail::eval_batch_slice(ctx, batch, weights, inv_mn, inv_m, ws, accum, &grad);
  return detail::assemble_report(accum, batch.size(), ctx.patterns->count, weights);
}

}  // namespace voxsl

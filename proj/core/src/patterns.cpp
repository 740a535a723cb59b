#include "voxsl/patterns.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "voxsl/rng.hpp"

namespace voxsl {

Pattern random_binary_pattern(int width, int height, int cell, uint64_t seed) {
  if (cell < 1) throw std::invalid_argument("random_binary_pattern: cell must be >= 1");
  if (width < cell || height < cell)
    throw std::invalid_argument("random_binary_pattern: pattern smaller than one cell");

  Pattern p;
  p.image = ImageF(width, height);
  p.cell = cell;
  p.seed = seed;

  const int cells_x = (width + cell - 1) / cell;
  for (int row = 0; row < height; ++row) {
    const uint64_t cell_row = static_cast<uint64_t>(row / cell);
    float* dst = p.image.row_ptr(row);
    for (int col = 0; col < width; ++col) {
      const uint64_t cell_index = cell_row * cells_x + static_cast<uint64_t>(col / cell);
      dst[col] = static_cast<float>(hash_draw(seed, cell_index) >> 63);
    }
  }
  return p;
}

namespace {

// Extended nine-pattern set, three per scale, ordered so that dropping from
// the front follows the thinning order 20, 10, 5, 20, 10, 5, 20. The last
// `count` entries of this list form the count-pattern set.
constexpr int kExtendedCells[9] = {20, 10, 5, 20, 10, 5, 20, 10, 5};

}  // namespace

std::vector<Pattern> pattern_set_for_count(int count, int proj_width, int proj_height,
                                           uint64_t seed) {
  if (count < 1 || count > 9)
    throw std::invalid_argument("pattern_set_for_count: count must be in [1, 9]");
  std::vector<Pattern> set;
  set.reserve(count);
  const int first = 9 - count;
  for (int k = first; k < 9; ++k)
    set.push_back(random_binary_pattern(proj_width, proj_height, kExtendedCells[k],
                                        hash_draw(seed, static_cast<uint64_t>(k))));
  // Coarse-to-fine ordering; count == 6 comes out as (20, 20, 10, 10, 5, 5).
  std::stable_sort(set.begin(), set.end(),
                   [](const Pattern& a, const Pattern& b) { return a.cell > b.cell; });
  return set;
}

std::vector<Pattern> default_pattern_set(int proj_width, int proj_height, uint64_t seed) {
  return pattern_set_for_count(6, proj_width, proj_height, seed);
}

Pattern blur_pattern(const Pattern& p, double radius_sigma) {
  if (radius_sigma <= 0) return p;

  const int half = std::max(1, static_cast<int>(std::ceil(3.0 * radius_sigma)));
  std::vector<double> kernel(2 * half + 1);
  double sum = 0;
  for (int i = -half; i <= half; ++i) {
    kernel[i + half] = std::exp(-0.5 * (i * i) / (radius_sigma * radius_sigma));
    sum += kernel[i + half];
  }
  for (double& k : kernel) k /= sum;

  const int w = p.image.width(), h = p.image.height();
  ImageF tmp(w, h), out(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0;
      for (int i = -half; i <= half; ++i) {
        const int cc = std::clamp(c + i, 0, w - 1);
        acc += kernel[i + half] * p.image.at(r, cc);
      }
      tmp.at(r, c) = static_cast<float>(acc);
    }
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0;
      for (int i = -half; i <= half; ++i) {
        const int rr = std::clamp(r + i, 0, h - 1);
        acc += kernel[i + half] * tmp.at(rr, c);
      }
      out.at(r, c) = static_cast<float>(acc);
    }
  }

  Pattern blurred;
  blurred.image = std::move(out);
  blurred.cell = p.cell;
  blurred.seed = p.seed;
  return blurred;
}

double bilinear_sample(const ImageF& img, double u, double v) {
  return bilinear_sample_grad(img, u, v).value;
}

BilinearSample bilinear_sample_grad(const ImageF& img, double u, double v) {
  const int w = img.width(), h = img.height();
  BilinearSample out;
  // Half-integer centers: texel (r, c) is centered at (c + 0.5, r + 0.5).
  const double uf = u - 0.5;
  const double vf = v - 0.5;
  const int c0 = static_cast<int>(std::floor(uf));
  const int r0 = static_cast<int>(std::floor(vf));
  if (c0 < -1 || c0 >= w || r0 < -1 || r0 >= h) return out;  // fully outside

  const double fu = uf - c0;
  const double fv = vf - r0;
  auto texel = [&](int r, int c) -> double {
    if (r < 0 || r >= h || c < 0 || c >= w) return 0.0;  // zero border
    return img.at(r, c);
  };
  const double p00 = texel(r0, c0), p01 = texel(r0, c0 + 1);
  const double p10 = texel(r0 + 1, c0), p11 = texel(r0 + 1, c0 + 1);

  const double top = p00 + (p01 - p00) * fu;
  const double bot = p10 + (p11 - p10) * fu;
  out.value = top + (bot - top) * fv;
  out.du = (p01 - p00) * (1.0 - fv) + (p11 - p10) * fv;
  out.dv = bot - top;
  return out;
}

}  // namespace voxsl

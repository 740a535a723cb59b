#pragma once

#include <cstdint>
#include <vector>

#include "voxsl/image.hpp"

namespace voxsl {

// A projected pattern: grayscale image in [0,1]. Binary patterns are built
// from cell x cell squares, each independently black or white.
struct Pattern {
  ImageF image;
  int cell = 0;       // generating square size in pattern pixels
  uint64_t seed = 0;  // generation seed (0 for patterns not generated here)
};

// Random binary pattern: the pattern plane is partitioned into cell-aligned
// squares (partial squares at the right/bottom edges keep their cell's
// value); each square is 0 or 1 with probability 1/2. Cell values come from
// the counter-based hash_draw(seed, cell_index), so patterns regenerate
// bit-identically on any platform.
Pattern random_binary_pattern(int width, int height, int cell, uint64_t seed);

// The default working set: two patterns each at cell sizes 20, 10, 5.
// Per-pattern seeds derive from the master seed as hash_draw(seed, k).
std::vector<Pattern> default_pattern_set(int proj_width, int proj_height, uint64_t seed);

// Subsets of the extended nine-pattern set (three per scale), thinned one
// scale at a time in the order 20, 10, 5, 20, 10, 5, 20. count == 9 is the
// full extended set, count == 6 matches default_pattern_set's composition.
std::vector<Pattern> pattern_set_for_count(int count, int proj_width, int proj_height,
                                           uint64_t seed);

// Optional Gaussian pre-blur (truncated at 3 sigma), used to smooth the
// surface-color loss landscape. radius_sigma <= 0 returns the input.
Pattern blur_pattern(const Pattern& p, double radius_sigma);

// Bilinear sample with half-integer pixel centers; outside the pattern the
// value fades to 0 (the projector emits nothing there), keeping the sample
// continuous in (u, v).
double bilinear_sample(const ImageF& img, double u, double v);

// Value and gradient (d/du, d/dv) of bilinear_sample. The gradient is the
// one-sided derivative inside the current pixel quad.
struct BilinearSample {
  double value = 0;
  double du = 0;
  double dv = 0;
};
BilinearSample bilinear_sample_grad(const ImageF& img, double u, double v);

}  // namespace voxsl

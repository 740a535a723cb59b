#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace voxsl {

// The sole trainable state: raw (pre-activation) densities on a regular
// lattice spanning the NDC cube [-1,1]^3. Lattice nodes sit on the cube
// boundary (node i at -1 + 2 i / (N-1)); storage is z-fastest so samples
// marching in z* stay cache-adjacent.
struct DensityGrid {
  std::array<int, 3> dims{0, 0, 0};  // Nx, Ny, Nz, each >= 2
  double bias = 0.0;                 // shift b inside the softplus
  std::vector<float> raw;            // size Nx*Ny*Nz, index (ix*Ny + iy)*Nz + iz

  DensityGrid() = default;
  DensityGrid(int nx, int ny, int nz, double bias_value);

  size_t voxel_count() const { return raw.size(); }
  size_t index(int ix, int iy, int iz) const {
    return (static_cast<size_t>(ix) * dims[1] + iy) * dims[2] + iz;
  }
};

// Adjoint buffer matching a grid's raw array. Grid values are f32 but
// gradient accumulation runs in 64-bit.
struct GridGradient {
  std::array<int, 3> dims{0, 0, 0};
  std::vector<double> raw_grad;

  GridGradient() = default;
  explicit GridGradient(const DensityGrid& grid)
      : dims(grid.dims), raw_grad(grid.voxel_count(), 0.0) {}

  void clear() { std::fill(raw_grad.begin(), raw_grad.end(), 0.0); }
};

// The 8 lattice corners enclosing a query point with their interpolation
// weights. Weights are non-negative and sum to 1.
struct TrilinearStencil {
  std::array<size_t, 8> index;
  std::array<double, 8> weight;
};

// Softplus shift so that a zero-initialized grid yields per-sample opacity
// alpha_init at step size delta:  b = log((1 - alpha_init)^(-1/delta) - 1).
double init_bias(double alpha_init, double delta);

// Maps one NDC coordinate onto the lattice: lower node index and fraction
// toward the next node. Out-of-cube coordinates clamp to the surface.
struct GridAxisCoord {
  int i0;
  double frac;
};
inline GridAxisCoord grid_axis_coord(double x_ndc, int n) {
  const double x = x_ndc < -1.0 ? -1.0 : (x_ndc > 1.0 ? 1.0 : x_ndc);
  const double g = (x + 1.0) * 0.5 * (n - 1);
  int i0 = static_cast<int>(g);
  if (i0 > n - 2) i0 = n - 2;
  return {i0, g - i0};
}

TrilinearStencil trilinear_stencil(const std::array<int, 3>& dims, const Eigen::Vector3d& x_ndc);

// Trilinear read of the raw lattice. Out-of-cube queries clamp to the cube
// surface, so this is total.
double query_raw(const DensityGrid& grid, const Eigen::Vector3d& x_ndc);

// Scatter adjoint of query_raw: adds upstream * weight to the 8 corners.
void accumulate_grad(GridGradient& grad, const Eigen::Vector3d& x_ndc, double upstream);

// Shifted softplus sigma = log(1 + exp(raw + b)), overflow-safe: the exact
// formula is used for |raw + b| <= 30, the asymptote beyond (error < 1e-13).
inline double activate(double raw, double bias) {
  const double x = raw + bias;
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

// d(activate)/d(raw) = sigmoid(raw + b), with matching safe tails.
inline double activate_deriv(double raw, double bias) {
  const double x = raw + bias;
  if (x > 30.0) return 1.0;
  if (x < -30.0) return std::exp(x);
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Checkpoint format: magic "VSLG", u32 version, u32 dims[3], f64 bias, then
// dims-many f32 raw values, little-endian, z-fastest. Writes are atomic
// (temp file + rename).
void save_checkpoint(const DensityGrid& grid, const std::string& path);
DensityGrid load_checkpoint(const std::string& path);

}  // namespace voxsl

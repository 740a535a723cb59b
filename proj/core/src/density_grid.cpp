#include "voxsl/density_grid.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>
#include <stdexcept>

namespace voxsl {

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

DensityGrid::DensityGrid(int nx, int ny, int nz, double bias_value) {
  if (nx < 2 || ny < 2 || nz < 2)
    throw std::invalid_argument("DensityGrid: dims must be >= 2 per axis");
  dims = {nx, ny, nz};
  bias = bias_value;
  raw.assign(static_cast<size_t>(nx) * ny * nz, 0.0f);
}

double init_bias(double alpha_init, double delta) {
  if (!(alpha_init > 0.0 && alpha_init < 1.0))
    throw std::invalid_argument("init_bias: alpha_init must lie in (0, 1)");
  if (!(delta > 0.0))
    throw std::invalid_argument("init_bias: delta must be > 0");
  return std::log(std::pow(1.0 - alpha_init, -1.0 / delta) - 1.0);
}

TrilinearStencil trilinear_stencil(const std::array<int, 3>& dims, const Eigen::Vector3d& x_ndc) {
  const GridAxisCoord ax = grid_axis_coord(x_ndc.x(), dims[0]);
  const GridAxisCoord ay = grid_axis_coord(x_ndc.y(), dims[1]);
  const GridAxisCoord az = grid_axis_coord(x_ndc.z(), dims[2]);

  const size_t sy = dims[2];
  const size_t sx = static_cast<size_t>(dims[1]) * dims[2];
  const size_t base = ax.i0 * sx + ay.i0 * sy + az.i0;

  const double wx1 = ax.frac, wx0 = 1.0 - ax.frac;
  const double wy1 = ay.frac, wy0 = 1.0 - ay.frac;
  const double wz1 = az.frac, wz0 = 1.0 - az.frac;

  TrilinearStencil st;
  st.index = {base,           base + 1,
              base + sy,      base + sy + 1,
              base + sx,      base + sx + 1,
              base + sx + sy, base + sx + sy + 1};
  st.weight = {wx0 * wy0 * wz0, wx0 * wy0 * wz1,
               wx0 * wy1 * wz0, wx0 * wy1 * wz1,
               wx1 * wy0 * wz0, wx1 * wy0 * wz1,
               wx1 * wy1 * wz0, wx1 * wy1 * wz1};
  return st;
}

double query_raw(const DensityGrid& grid, const Eigen::Vector3d& x_ndc) {
  const TrilinearStencil st = trilinear_stencil(grid.dims, x_ndc);
  double acc = 0.0;
  for (int k = 0; k < 8; ++k) acc += st.weight[k] * grid.raw[st.index[k]];
  return acc;
}

void accumulate_grad(GridGradient& grad, const Eigen::Vector3d& x_ndc, double upstream) {
  const TrilinearStencil st = trilinear_stencil(grad.dims, x_ndc);
  for (int k = 0; k < 8; ++k) grad.raw_grad[st.index[k]] += upstream * st.weight[k];
}

namespace {

constexpr char kMagic[4] = {'V', 'S', 'L', 'G'};
constexpr uint32_t kVersion = 1;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void save_checkpoint(const DensityGrid& grid, const std::string& path) {
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";

  {
    FilePtr f(std::fopen(tmp.c_str(), "wb"));
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + tmp.string());
    auto put = [&](const void* p, size_t n) {
      if (std::fwrite(p, 1, n, f.get()) != n)
        throw std::runtime_error("save_checkpoint: short write to " + tmp.string());
    };
    put(kMagic, 4);
    put(&kVersion, 4);
    uint32_t d[3] = {static_cast<uint32_t>(grid.dims[0]),
                     static_cast<uint32_t>(grid.dims[1]),
                     static_cast<uint32_t>(grid.dims[2])};
    put(d, sizeof(d));
    put(&grid.bias, sizeof(double));
    put(grid.raw.data(), grid.raw.size() * sizeof(float));
    if (std::fflush(f.get()) != 0)
      throw std::runtime_error("save_checkpoint: flush failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

DensityGrid load_checkpoint(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
  auto get = [&](void* p, size_t n, const char* what) {
    if (std::fread(p, 1, n, f.get()) != n)
      throw std::runtime_error(std::string("load_checkpoint: truncated ") + what + " in " + path);
  };
  char magic[4];
  get(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  uint32_t version = 0;
  get(&version, 4, "version");
  if (version != kVersion)
    throw std::runtime_error("load_checkpoint: unsupported version in " + path);
  uint32_t d[3];
  get(d, sizeof(d), "dims");
  if (d[0] < 2 || d[1] < 2 || d[2] < 2 || d[0] > 4096 || d[1] > 4096 || d[2] > 4096)
    throw std::runtime_error("load_checkpoint: implausible dims in " + path);
  double bias = 0;
  get(&bias, sizeof(double), "bias");

  DensityGrid grid(static_cast<int>(d[0]), static_cast<int>(d[1]), static_cast<int>(d[2]), bias);
  get(grid.raw.data(), grid.raw.size() * sizeof(float), "payload");
  return grid;
}

}  // namespace voxsl

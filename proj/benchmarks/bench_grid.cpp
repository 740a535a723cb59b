#include <benchmark/benchmark.h>

#include "voxsl/density_grid.hpp"
#include "voxsl/rng.hpp"

using namespace voxsl;

namespace {

DensityGrid make_grid(int n) {
  DensityGrid grid(n, n, n, 0.49);
  SplitMix64 rng(1);
  for (float& v : grid.raw) v = static_cast<float>(rng.next_gaussian());
  return grid;
}

std::vector<Eigen::Vector3d> make_points(size_t count) {
  SplitMix64 rng(2);
  std::vector<Eigen::Vector3d> pts(count);
  for (auto& p : pts)
    p = Eigen::Vector3d(rng.next_unit() * 2 - 1, rng.next_unit() * 2 - 1,
                        rng.next_unit() * 2 - 1);
  return pts;
}

}  // namespace

static void BM_QueryRaw(benchmark::State& state) {
  const DensityGrid grid = make_grid(static_cast<int>(state.range(0)));
  const auto pts = make_points(4096);
  size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(query_raw(grid, pts[i++ & 4095]));
  }
}
BENCHMARK(BM_QueryRaw)->Arg(32)->Arg(96)->Arg(256);

static void BM_AccumulateGrad(benchmark::State& state) {
  const DensityGrid grid = make_grid(static_cast<int>(state.range(0)));
  GridGradient grad(grid);
  const auto pts = make_points(4096);
  size_t i = 0;
  for (auto _ : state) {
    accumulate_grad(grad, pts[i++ & 4095], 0.25);
  }
  benchmark::DoNotOptimize(grad.raw_grad.data());
}
BENCHMARK(BM_AccumulateGrad)->Arg(96);

static void BM_Activate(benchmark::State& state) {
  SplitMix64 rng(3);
  std::vector<double> xs(4096);
  for (double& x : xs) x = 8.0 * rng.next_gaussian();
  size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(activate(xs[i & 4095], 0.49));
    benchmark::DoNotOptimize(activate_deriv(xs[i & 4095], 0.49));
    ++i;
  }
}
BENCHMARK(BM_Activate);


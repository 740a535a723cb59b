#include <benchmark/benchmark.h>

#include <cmath>

#include "voxsl/losses.hpp"
#include "voxsl/render.hpp"
#include "voxsl/rng.hpp"
#include "voxsl/simulator.hpp"
#include "voxsl/trainer.hpp"

using namespace voxsl;

namespace {

// Desk-scale rig: 640x512 camera, toed-in projector, plane scene.
struct BenchRig {
  CameraModel cam;
  ProjectorModel proj;
  std::vector<Pattern> patterns;
  std::vector<ImageF> captures;
  PixelStats stats;
  PatternStack stack;
  NdcFrame frame;
  DensityGrid grid{96, 96, 96, 0.0};

  BenchRig() {
    cam.fx = 590.88;
    cam.fy = 589.96;
    cam.cx = 319.75;
    cam.cy = 255.75;
    cam.width = 640;
    cam.height = 512;
    proj.intrinsics.fx = 1006.65;
    proj.intrinsics.fy = 1008.215;
    proj.intrinsics.cx = 349.58;
    proj.intrinsics.cy = 377.63;
    proj.intrinsics.width = 700;
    proj.intrinsics.height = 756;
    const double b = 52.35, th = std::atan2(b, 1000.0);
    Eigen::Matrix3d rot;
    rot << std::cos(th), 0, std::sin(th), 0, 1, 0, -std::sin(th), 0, std::cos(th);
    proj.intrinsics.pose.rotation = rot;
    proj.intrinsics.pose.translation = Eigen::Vector3d(b, 0, 0);
    proj.baseline_mm = b;

    patterns = default_pattern_set(700, 756, 77);
    SceneParams sp;
    sp.depth_mm = 1000.0;
    const SceneDepth scene = analytic_scene(SceneKind::Plane, sp, cam);
    RadiometricParams rad;
    captures = simulate_captures(scene, patterns, cam, proj, rad, 9);
    stats = compute_background_and_contrast(captures);
    stack = PatternStack(patterns);
    frame = ndc_frame_from_camera(cam, 500.0);
    grid = DensityGrid(96, 96, 96, init_bias(1e-2, 2.0 / 192.0));
    SplitMix64 rng(4);
    for (float& v : grid.raw) v = static_cast<float>(0.2 * rng.next_gaussian());
  }

  BatchContext context(int k = 192) const {
    BatchContext ctx;
    ctx.grid = &grid;
    ctx.cam = &cam;
    ctx.proj = &proj;
    ctx.patterns = &stack;
    ctx.stats = &stats;
    ctx.captures = captures;
    ctx.frame = frame;
    ctx.samples_per_ray = k;
    ctx.jitter = true;
    ctx.jitter_seed = 11;
    return ctx;
  }
};

const BenchRig& rig() {
  static const BenchRig r;
  return r;
}

}  // namespace

static void BM_Composite(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  SplitMix64 rng(5);
  std::vector<double> sigma(k), delta(k, 2.0 / k);
  for (double& s : sigma) s = 40.0 * rng.next_unit();
  for (auto _ : state) {
    benchmark::DoNotOptimize(composite(sigma, delta));
  }
  state.SetItemsProcessed(state.iterations() * k);
}
BENCHMARK(BM_Composite)->Arg(64)->Arg(192);

static void BM_BatchForward(benchmark::State& state) {
  const BenchRig& r = rig();
  const BatchContext ctx = r.context();
  BatchSampler sampler(r.stats, 3);
  const auto batch = sampler.next(static_cast<int>(state.range(0)));
  const LossWeights weights{0.01, 1.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(batch_loss(ctx, batch, weights));
  }
  state.SetItemsProcessed(state.iterations() * batch.size() * 192);
}
BENCHMARK(BM_BatchForward)->Arg(256);

static void BM_BatchBackward(benchmark::State& state) {
  const BenchRig& r = rig();
  const BatchContext ctx = r.context();
  BatchSampler sampler(r.stats, 3);
  const auto batch = sampler.next(static_cast<int>(state.range(0)));
  const LossWeights weights{0.01, 1.0};
  GridGradient grad(r.grid);
  for (auto _ : state) {
    grad.clear();
    benchmark::DoNotOptimize(backward_batch(ctx, batch, weights, grad));
  }
  state.SetItemsProcessed(state.iterations() * batch.size() * 192);
}
BENCHMARK(BM_BatchBackward)->Arg(256);

static void BM_ExtractDepth(benchmark::State& state) {
  const BenchRig& r = rig();
  for (auto _ : state) {
    benchmark::DoNotOptimize(extract_depth_map(r.grid, r.cam, r.frame, 192));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(r.cam.width) *
                          r.cam.height * 192);
}
BENCHMARK(BM_ExtractDepth);

BENCHMARK_MAIN();

#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "oracles.hpp"
#include "test_util.hpp"
#include "voxsl/render.hpp"
#include "voxsl/simulator.hpp"

using namespace voxsl;

TEST_SUITE_BEGIN("simulator");

TEST_CASE("analytic scenes") {
  const CameraModel cam = testutil::small_camera(8);  // 160 x 128

  SUBCASE("fronto-parallel plane is constant") {
    SceneParams p;
    p.depth_mm = 1000.0;
    const SceneDepth scene = analytic_scene(SceneKind::Plane, p, cam);
    for (float d : scene.depth.pixels()) CHECK(d == 1000.0f);
  }

  SUBCASE("ramp depth is linear in the image column") {
    SceneParams p;
    p.depth_mm = 900.0;
    p.slope_mm_per_px = 1.25;
    const SceneDepth scene = analytic_scene(SceneKind::Ramp, p, cam);
    for (int r = 0; r < cam.height; r += 17)
      for (int c = 0; c < cam.width; ++c) {
        const double expect = 900.0 + 1.25 * (c + 0.5 - cam.cx);
        CHECK(scene.depth.at(r, c) == doctest::Approx(expect).epsilon(1e-9));
      }
  }

  SUBCASE("sphere bulges toward the camera, symmetric about the axis") {
    SceneParams p;
    p.center_depth_mm = 1000.0;
    p.radius_mm = 200.0;
    p.background_depth_mm = 1400.0;
    const SceneDepth scene = analytic_scene(SceneKind::Sphere, p, cam);
    // Depth is minimal at the pixel containing the principal point.
    const int pr = static_cast<int>(cam.cy), pc = static_cast<int>(cam.cx);
    const float center_depth = scene.depth.at(pr, pc);
    CHECK(center_depth == doctest::Approx(800.0).epsilon(1e-3));
    for (float d : scene.depth.pixels()) CHECK(d >= center_depth);
    // Rays that miss land on the background.
    CHECK(scene.depth.at(0, 0) == 1400.0f);
  }

  SUBCASE("step has exactly two depths") {
    SceneParams p;
    p.near_depth_mm = 950.0;
    p.far_depth_mm = 1050.0;
    p.vertical_edge = true;
    const SceneDepth scene = analytic_scene(SceneKind::Step, p, cam);
    for (int r = 0; r < cam.height; r += 13)
      for (int c = 0; c < cam.width; ++c) {
        const float d = scene.depth.at(r, c);
        CHECK((d == 950.0f || d == 1050.0f));
        if (c < cam.width / 2) CHECK(d == 950.0f);
      }
  }

  SUBCASE("invalid geometry is rejected") {
    SceneParams p;
    p.depth_mm = -5.0;
    CHECK_THROWS_AS(analytic_scene(SceneKind::Plane, p, cam), std::invalid_argument);
  }
}

TEST_CASE("projector shadow mask") {
  const CameraModel cam = testutil::small_camera(8);

  SUBCASE("unobstructed plane casts no shadow") {
    const ProjectorModel proj = testutil::small_projector(120.0, 8);
    SceneParams p;
    p.depth_mm = 1000.0;
    const SceneDepth scene = analytic_scene(SceneKind::Plane, p, cam);
    const ImageU8 mask = projector_shadow_mask(scene, cam, proj);
    for (uint8_t s : mask.pixels()) CHECK(s == 0);
  }

  SUBCASE("zero baseline casts no shadow") {
    ProjectorModel proj;
    proj.intrinsics = cam;
    proj.baseline_mm = 0.0;
    SceneParams p;
    p.near_depth_mm = 1050.0;  // deep on the left
    p.far_depth_mm = 950.0;    // shallow on the right, toward the projector
    const SceneDepth scene = analytic_scene(SceneKind::Step, p, cam);
    const ImageU8 mask = projector_shadow_mask(scene, cam, proj);
    for (uint8_t s : mask.pixels()) CHECK(s == 0);
  }

  SUBCASE("step scene shadow band matches the brute-force oracle exactly") {
    const ProjectorModel proj = testutil::small_projector(240.0, 8);
    SceneParams p;
    // Shallow side on the right (toward the projector at +x): the raised
    // slab occludes a band of the deep surface next to the edge.
    p.near_depth_mm = 1050.0;
    p.far_depth_mm = 950.0;
    p.vertical_edge = true;
    const SceneDepth scene = analytic_scene(SceneKind::Step, p, cam);
    const ImageU8 mask = projector_shadow_mask(scene, cam, proj);
    const ImageU8 ref = oracle::shadow_mask_reference(scene, cam, proj);
    REQUIRE(mask.size() == ref.size());
    for (size_t i = 0; i < mask.size(); ++i) CHECK(mask.data()[i] == ref.data()[i]);

    // Band geometry: shadowed pixels sit on the deep side adjacent to the
    // edge, with width close to fx * baseline * (1/d_near - 1/d_far).
    const double width_expect =
        cam.fx * proj.baseline_mm * (1.0 / 950.0 - 1.0 / 1050.0);
    const int edge = cam.width / 2;
    int shadow_count = 0;
    int min_col = cam.width, max_col = -1;
    for (int r = 0; r < cam.height; ++r)
      for (int c = 0; c < cam.width; ++c)
        if (mask.at(r, c)) {
          ++shadow_count;
          min_col = std::min(min_col, c);
          max_col = std::max(max_col, c);
        }
    REQUIRE(shadow_count > 0);
    CHECK(max_col < edge);                       // entirely on the deep side
    CHECK(max_col >= edge - 2);                  // touching the edge
    const double measured_width = static_cast<double>(shadow_count) / cam.height;
    CHECK(measured_width == doctest::Approx(width_expect).epsilon(0.35));
  }
}

TEST_CASE("simulated captures") {
  const CameraModel cam = testutil::small_camera(8);
  const ProjectorModel proj = testutil::small_projector(120.0, 8);
  SceneParams sp;
  sp.depth_mm = 1000.0;
  const SceneDepth scene = analytic_scene(SceneKind::Plane, sp, cam);

  SUBCASE("all-white pattern gives ambient + contrast everywhere lit") {
    Pattern white;
    white.image = ImageF(proj.intrinsics.width, proj.intrinsics.height, 1.0f);
    RadiometricParams rad;
    const auto caps = simulate_captures(scene, std::vector<Pattern>{white, white}, cam, proj,
                                        rad, 1);
    const ImageU8 lit = illumination_mask(scene, cam, proj);
    for (int r = 0; r < cam.height; r += 3)
      for (int c = 0; c < cam.width; c += 3) {
        if (lit.at(r, c))
          CHECK(caps[0].at(r, c) == doctest::Approx(0.9).epsilon(1e-6));
        else
          CHECK(caps[0].at(r, c) == doctest::Approx(0.1).epsilon(1e-6));
      }
  }

  SUBCASE("values stay in [0,1] with noise and quantization") {
    const auto patterns = default_pattern_set(proj.intrinsics.width, proj.intrinsics.height, 3);
    RadiometricParams rad;
    rad.noise_sigma = 0.15;
    rad.quantize_bits = 8;
    const auto caps = simulate_captures(scene, patterns, cam, proj, rad, 7);
    for (const ImageF& img : caps)
      for (float v : img.pixels()) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
        // 8-bit quantization leaves multiples of 1/255.
        CHECK(std::abs(v * 255.0f - std::round(v * 255.0f)) < 1e-4);
      }
  }

  SUBCASE("noise is reproducible by seed") {
    const auto patterns = pattern_set_for_count(2, proj.intrinsics.width,
                                                proj.intrinsics.height, 3);
    RadiometricParams rad;
    rad.noise_sigma = 0.05;
    const auto a = simulate_captures(scene, patterns, cam, proj, rad, 42);
    const auto b = simulate_captures(scene, patterns, cam, proj, rad, 42);
    const auto c = simulate_captures(scene, patterns, cam, proj, rad, 43);
    CHECK(a[0].pixels() == b[0].pixels());
    CHECK(a[0].pixels() != c[0].pixels());
  }

  SUBCASE("radiometric validation") {
    RadiometricParams rad;
    rad.ambient = 0.5;
    rad.contrast = 0.6;
    CHECK_THROWS_AS(rad.validate(), std::invalid_argument);
    rad = RadiometricParams{};
    rad.quantize_bits = 12;
    CHECK_THROWS_AS(rad.validate(), std::invalid_argument);
  }
}

TEST_CASE("background and contrast recovery from simulated captures") {
  // Noise-free captures of the default six-pattern set: at every pixel whose
  // pattern samples include a pure black and a pure white, the min/max
  // decomposition recovers ambient and contrast exactly; shadowed pixels
  // recover zero contrast and are masked.
  const CameraModel cam = testutil::small_camera(8);
  const ProjectorModel proj = testutil::small_projector(120.0, 8);
  SceneParams sp;
  sp.near_depth_mm = 1050.0;
  sp.far_depth_mm = 950.0;  // shallow side toward the projector: shadow band
  const SceneDepth scene = analytic_scene(SceneKind::Step, sp, cam);
  const auto patterns = default_pattern_set(proj.intrinsics.width, proj.intrinsics.height, 11);
  RadiometricParams rad;  // ambient 0.1, contrast 0.8, no noise, no quantization

  const auto caps = simulate_captures(scene, patterns, cam, proj, rad, 5);
  const PixelStats stats = compute_background_and_contrast(caps);
  const ImageU8 lit = illumination_mask(scene, cam, proj);

  int eligible = 0, shadowed = 0;
  for (int r = 0; r < cam.height; ++r) {
    for (int c = 0; c < cam.width; ++c) {
      if (!lit.at(r, c)) {
        ++shadowed;
        CHECK(stats.contrast.at(r, c) == 0.0f);
        CHECK(stats.valid.at(r, c) == 0);
        continue;
      }
      // Eligibility: the six pattern samples contain an exact 0 and an
      // exact 1.
      const Eigen::Vector3d x = lift_pixel(r, c, scene.depth.at(r, c), cam);
      const PatternPoint pp = project_to_pattern(x, proj);
      float lo = 1.0f, hi = 0.0f;
      for (const Pattern& pat : patterns) {
        const float v = static_cast<float>(bilinear_sample(pat.image, pp.u, pp.v));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (lo == 0.0f && hi == 1.0f) {
        ++eligible;
        // Exact up to the f32 storage of the captures: B equals the stored
        // ambient level and B + F the stored ambient + contrast.
        const float b_expect = static_cast<float>(rad.ambient);
        const float top_expect = static_cast<float>(rad.ambient + rad.contrast);
        CHECK(stats.background.at(r, c) == b_expect);
        CHECK(stats.background.at(r, c) + stats.contrast.at(r, c) == top_expect);
        CHECK(stats.valid.at(r, c) == 1);
      }
    }
  }
  // The check must actually bite: a large share of the image is eligible.
  CHECK(eligible > static_cast<int>(0.35 * scene.depth.size()));
  CHECK(shadowed > 0);
}

TEST_CASE("opaque slab at the ground-truth NDC depth reproduces the captures") {
  // Plane at depth 2n lands exactly at NDC z* = 0. With 96 z-nodes the
  // voxel size is 2/95 and 95 intervals put a sample midpoint exactly at
  // z* = 0. A two-sided wall (very negative, then very positive) keeps
  // every earlier sample transparent while the z* = 0 sample absorbs
  // everything, so the rendered ray reproduces the simulated image exactly
  // at lit pixels.
  const CameraModel cam = testutil::small_camera(8);
  const ProjectorModel proj = testutil::small_projector(120.0, 8);
  SceneParams sp;
  sp.depth_mm = 1000.0;
  const SceneDepth scene = analytic_scene(SceneKind::Plane, sp, cam);
  const auto patterns = default_pattern_set(proj.intrinsics.width, proj.intrinsics.height, 17);
  RadiometricParams rad;
  const auto caps = simulate_captures(scene, patterns, cam, proj, rad, 5);
  const PixelStats stats = compute_background_and_contrast(caps);

  const NdcFrame frame = ndc_frame_from_camera(cam, 500.0);
  // 96 z-nodes: z* = 0 falls halfway between nodes 47 and 48. Sampling with
  // 95 intervals puts midpoints at node+half positions, so each sample
  // interpolates exactly two nodes with weight 1/2. Node values are chosen
  // so the sample AT z* = 0 sees +2000 (opaque: sigma * delta = 42) while
  // the sample one step earlier sees -5000 (fully transparent).
  const int nz = 96;
  DensityGrid grid(2, 2, nz, 0.0);
  for (int ix = 0; ix < 2; ++ix)
    for (int iy = 0; iy < 2; ++iy)
      for (int iz = 0; iz < nz; ++iz) {
        float v = 5000.0f;
        if (iz <= 46) v = -9000.0f;
        if (iz == 47) v = -1000.0f;
        grid.raw[grid.index(ix, iy, iz)] = v;
      }

  const int k = nz - 1;  // sample midpoint 47 lands exactly on z* = 0
  int checked = 0;
  for (int r = 0; r < cam.height; r += 5) {
    for (int c = 0; c < cam.width; c += 7) {
      if (!stats.valid.at(r, c)) continue;
      const Ray ray = camera_ray(r, c, cam);
      RaySamples rs = sample_along_ray(ray, frame, k, false, 0);
      fill_densities(grid, rs);
      composite_ray(rs);
      for (size_t j = 0; j < patterns.size(); ++j) {
        // Render with the true radiometric levels: the comparison probes the
        // geometric agreement between renderer and simulator.
        std::vector<double> colors(rs.sample_count());
        for (int i = 0; i < rs.sample_count(); ++i)
          colors[i] = lookup_pattern_color(rs.x_world[i], rad.ambient, rad.contrast,
                                           patterns[j], proj);
        const double rendered = render_color(rs.weight, colors);
        CHECK(std::abs(rendered - caps[j].at(r, c)) <= 1.0 / 255.0);
      }
      ++checked;
    }
  }
  CHECK(checked > 200);
}

TEST_SUITE_END();

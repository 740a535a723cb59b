#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "test_util.hpp"
#include "voxsl/density_grid.hpp"
#include "voxsl/rng.hpp"

using namespace voxsl;

TEST_SUITE_BEGIN("density_grid");

TEST_CASE("grids start at zero and validate dims") {
  DensityGrid grid(4, 5, 6, 0.25);
  CHECK(grid.voxel_count() == 4u * 5u * 6u);
  for (float v : grid.raw) CHECK(v == 0.0f);
  CHECK(grid.bias == 0.25);
  CHECK_THROWS_AS(DensityGrid(1, 5, 6, 0.0), std::invalid_argument);
}

TEST_CASE("init_bias matches the closed form") {
  // alpha_init 1e-2 at unit step.
  CHECK(init_bias(1e-2, 1.0) == doctest::Approx(std::log(1.0 / 0.99 - 1.0)).epsilon(1e-12));
  CHECK(init_bias(1e-2, 1.0) == doctest::Approx(-4.59512).epsilon(1e-5));
  // alpha_init 0.5 at unit step: log(2 - 1) = 0.
  CHECK(init_bias(0.5, 1.0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));

  CHECK_THROWS_AS(init_bias(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(init_bias(1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(init_bias(0.5, 0.0), std::invalid_argument);
}

TEST_CASE("zero grid with init bias reproduces alpha_init") {
  // With b from init_bias and raw = 0, 1 - exp(-sigma * delta) = alpha_init.
  for (double delta : {1.0, 0.5, 1.0 / 96.0, 1.0 / 256.0}) {
    const double b = init_bias(1e-2, delta);
    const double sigma = activate(0.0, b);
    const double alpha = 1.0 - std::exp(-sigma * delta);
    CHECK(alpha == doctest::Approx(1e-2).epsilon(1e-12));
  }
}

TEST_CASE("query_raw interpolates the lattice") {
  DensityGrid grid(3, 3, 3, 0.0);

  SUBCASE("constant grid") {
    std::fill(grid.raw.begin(), grid.raw.end(), 1.0f);
    SplitMix64 rng(5);
    for (int i = 0; i < 50; ++i) {
      const Eigen::Vector3d x(rng.next_unit() * 2 - 1, rng.next_unit() * 2 - 1,
                              rng.next_unit() * 2 - 1);
      CHECK(query_raw(grid, x) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  SUBCASE("lattice node value") {
    grid.raw[grid.index(1, 2, 0)] = 7.5f;
    // Node (1,2,0) sits at NDC (0, 1, -1).
    CHECK(query_raw(grid, {0.0, 1.0, -1.0}) == doctest::Approx(7.5).epsilon(1e-12));
    CHECK(query_raw(grid, {0.0, 1.0, -0.9}) < 7.5);
  }

  SUBCASE("cell center averages the 8 corners") {
    SplitMix64 rng(9);
    double sum = 0;
    for (int ix = 0; ix < 2; ++ix)
      for (int iy = 0; iy < 2; ++iy)
        for (int iz = 0; iz < 2; ++iz) {
          const float v = static_cast<float>(rng.next_unit());
          grid.raw[grid.index(ix, iy, iz)] = v;
          sum += v;
        }
    // Center of the first cell: NDC (-0.5, -0.5, -0.5).
    CHECK(query_raw(grid, {-0.5, -0.5, -0.5}) == doctest::Approx(sum / 8).epsilon(1e-12));
  }

  SUBCASE("out-of-cube queries clamp to the surface") {
    SplitMix64 rng(13);
    for (float& v : grid.raw) v = static_cast<float>(rng.next_unit());
    CHECK(query_raw(grid, {1.7, 0.2, 0.3}) == query_raw(grid, {1.0, 0.2, 0.3}));
    CHECK(query_raw(grid, {0.1, -4.0, 0.3}) == query_raw(grid, {0.1, -1.0, 0.3}));
  }
}

TEST_CASE("trilinear weights form a partition of unity") {
  SplitMix64 rng(17);
  const std::array<int, 3> dims{5, 7, 9};
  for (int i = 0; i < 500; ++i) {
    const Eigen::Vector3d x(rng.next_unit() * 2.4 - 1.2, rng.next_unit() * 2.4 - 1.2,
                            rng.next_unit() * 2.4 - 1.2);
    const TrilinearStencil st = trilinear_stencil(dims, x);
    double sum = 0;
    for (int k = 0; k < 8; ++k) {
      CHECK(st.weight[k] >= 0.0);
      sum += st.weight[k];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("query_raw is continuous across cell faces") {
  DensityGrid grid(4, 4, 4, 0.0);
  SplitMix64 rng(21);
  for (float& v : grid.raw) v = static_cast<float>(rng.next_gaussian());
  // Node 1 of a 4-node axis sits at -1 + 2/3.
  const double face = -1.0 + 2.0 / 3.0;
  for (int i = 0; i < 50; ++i) {
    const double y = rng.next_unit() * 2 - 1, z = rng.next_unit() * 2 - 1;
    const double lo = query_raw(grid, {face - 1e-13, y, z});
    const double hi = query_raw(grid, {face + 1e-13, y, z});
    CHECK(lo == doctest::Approx(hi).epsilon(1e-10));
  }
}

TEST_CASE("activate is an overflow-safe softplus") {
  CHECK(activate(-0.3, 0.3) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(activate(100.0, 0.0) == doctest::Approx(100.0).epsilon(1e-9));
  CHECK(activate(-200.0, 0.0) > 0.0);
  CHECK(activate(-200.0, 0.0) == doctest::Approx(std::exp(-200.0)).epsilon(1e-12));

  SUBCASE("strictly positive and increasing, derivative matches FD") {
    double prev = activate(-40.0, 0.0);
    CHECK(prev > 0.0);
    for (double x = -39.5; x < 40.0; x += 0.5) {
      const double v = activate(x, 0.0);
      CHECK(v > prev);
      prev = v;
      const double h = 1e-6;
      const double fd = (activate(x + h, 0.0) - activate(x - h, 0.0)) / (2 * h);
      CHECK(activate_deriv(x, 0.0) == doctest::Approx(fd).epsilon(1e-7));
    }
  }

  SUBCASE("asymptote error below 1e-13 at the switch") {
    const double exact = std::log1p(std::exp(30.0));
    CHECK(std::abs(activate(30.0 + 1e-9, 0.0) - exact) < 1e-7);
    CHECK(std::abs(30.0 - exact) < 1e-13);
  }
}

TEST_CASE("accumulate_grad is the exact adjoint of query_raw") {
  const std::array<int, 3> dims{4, 5, 6};
  DensityGrid grid(dims[0], dims[1], dims[2], 0.0);
  SplitMix64 rng(31);

  SUBCASE("weight collapse at a node") {
    GridGradient grad(grid);
    accumulate_grad(grad, {-1.0, -1.0, -1.0}, 1.0);
    CHECK(grad.raw_grad[grid.index(0, 0, 0)] == doctest::Approx(1.0));
    double total = 0;
    for (double v : grad.raw_grad) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-7));
  }

  SUBCASE("scattered increments sum to upstream") {
    for (int i = 0; i < 100; ++i) {
      GridGradient grad(grid);
      const Eigen::Vector3d x(rng.next_unit() * 2 - 1, rng.next_unit() * 2 - 1,
                              rng.next_unit() * 2 - 1);
      const double upstream = rng.next_gaussian();
      accumulate_grad(grad, x, upstream);
      double total = 0;
      for (double v : grad.raw_grad) total += v;
      CHECK(total == doctest::Approx(upstream).epsilon(1e-5));
    }
  }

  SUBCASE("directional derivative matches the scatter") {
    // <grad, P> == d/de query_raw(grid + e P) for random perturbations P.
    for (int trial = 0; trial < 50; ++trial) {
      const Eigen::Vector3d x(rng.next_unit() * 2 - 1, rng.next_unit() * 2 - 1,
                              rng.next_unit() * 2 - 1);
      GridGradient grad(grid);
      accumulate_grad(grad, x, 1.0);

      std::vector<double> perturb(grid.voxel_count());
      for (double& p : perturb) p = rng.next_gaussian();

      double inner = 0;
      for (size_t i = 0; i < perturb.size(); ++i) inner += grad.raw_grad[i] * perturb[i];

      DensityGrid plus = grid, minus = grid;
      const double h = 1e-4;
      for (size_t i = 0; i < perturb.size(); ++i) {
        plus.raw[i] = static_cast<float>(grid.raw[i] + h * perturb[i]);
        minus.raw[i] = static_cast<float>(grid.raw[i] - h * perturb[i]);
      }
      const double fd = (query_raw(plus, x) - query_raw(minus, x)) / (2 * h);
      CHECK(inner == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    }
  }

  SUBCASE("finite differences of query_raw per voxel") {
    DensityGrid g2(dims[0], dims[1], dims[2], 0.0);
    for (float& v : g2.raw) v = static_cast<float>(rng.next_gaussian());
    for (int trial = 0; trial < 30; ++trial) {
      const Eigen::Vector3d x(rng.next_unit() * 2 - 1, rng.next_unit() * 2 - 1,
                              rng.next_unit() * 2 - 1);
      GridGradient grad(g2);
      accumulate_grad(grad, x, 1.0);
      const size_t voxel = rng.next_below(g2.voxel_count());
      const float saved = g2.raw[voxel];
      const double h = 1e-4;
      g2.raw[voxel] = static_cast<float>(saved + h);
      const double plus = query_raw(g2, x);
      const double plus_x = g2.raw[voxel];
      g2.raw[voxel] = static_cast<float>(saved - h);
      const double minus = query_raw(g2, x);
      const double minus_x = g2.raw[voxel];
      g2.raw[voxel] = saved;
      // Divide by the step the float storage actually realized.
      const double fd = (plus - minus) / (plus_x - minus_x);
      CHECK(grad.raw_grad[voxel] == doctest::Approx(fd).epsilon(1e-4).scale(1e-2));
    }
  }
}

TEST_CASE("checkpoint round trip") {
  DensityGrid grid(6, 5, 4, -4.59512);
  SplitMix64 rng(41);
  for (float& v : grid.raw) v = static_cast<float>(rng.next_gaussian());

  const std::string path = testutil::tmp_path("grid.vslg");
  save_checkpoint(grid, path);
  const DensityGrid loaded = load_checkpoint(path);
  CHECK(loaded.dims == grid.dims);
  CHECK(loaded.bias == grid.bias);
  CHECK(loaded.raw == grid.raw);

  SUBCASE("header starts with the magic") {
    std::ifstream f(path, std::ios::binary);
    char magic[4];
    f.read(magic, 4);
    CHECK(std::string(magic, 4) == "VSLG");
  }

  SUBCASE("corrupt files are rejected") {
    const std::string bad = testutil::tmp_path("bad.vslg");
    std::ofstream f(bad, std::ios::binary);
    f << "VSLGxxxx";
    f.close();
    CHECK_THROWS(load_checkpoint(bad));

    const std::string nomagic = testutil::tmp_path("nomagic.vslg");
    std::ofstream g(nomagic, std::ios::binary);
    g << "JUNKJUNKJUNKJUNK";
    g.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(nomagic),
                         doctest::Contains("bad magic"), std::runtime_error);
  }

  SUBCASE("no temp file remains") {
    CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
  }
}

TEST_SUITE_END();

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cli.hpp"
#include "test_util.hpp"
#include "voxsl/image_io.hpp"

using namespace voxsl;

TEST_SUITE_BEGIN("cli");

namespace {

namespace fs = std::filesystem;

std::string cli_dir(const std::string& name) {
  const std::string dir = testutil::tmp_path("cli/" + name);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("no arguments prints usage and exits 1") {
  CHECK(run_pipeline(std::vector<std::string>{}) == 1);
}

TEST_CASE("unknown subcommand exits 1") {
  CHECK(run_pipeline({"frobnicate"}) == 1);
}

TEST_CASE("gen-patterns writes numbered files and a manifest") {
  const std::string dir = cli_dir("pat");
  CHECK(run_pipeline({"gen-patterns", "--width", "128", "--height", "96", "--seed", "5",
                      "--out", dir}) == 0);
  CHECK(fs::exists(dir + "/pat_000.pgm"));
  CHECK(fs::exists(dir + "/pat_005.pgm"));
  CHECK(fs::exists(dir + "/manifest.json"));
  const ImageF pat = read_gray(dir + "/pat_000.pgm");
  CHECK(pat.width() == 128);
  CHECK(pat.height() == 96);
  for (float v : pat.pixels()) CHECK((v == 0.0f || v == 1.0f));
}

TEST_CASE("eval rejects mismatched map sizes with exit 2") {
  const std::string dir = cli_dir("eval");
  write_pfm(dir + "/a.pfm", ImageF(8, 8, 1000.0f));
  write_pfm(dir + "/b.pfm", ImageF(9, 8, 1000.0f));
  CHECK(run_pipeline({"eval", "--est", dir + "/a.pfm", "--gt", dir + "/b.pfm", "--fx", "600",
                      "--baseline", "120"}) == 2);
}

TEST_CASE("eval writes rounded metrics") {
  const std::string dir = cli_dir("eval2");
  write_pfm(dir + "/est.pfm", ImageF(8, 8, 1005.0f));
  write_pfm(dir + "/gt.pfm", ImageF(8, 8, 1000.0f));
  const std::string out = dir + "/metrics.json";
  CHECK(run_pipeline({"eval", "--est", dir + "/est.pfm", "--gt", dir + "/gt.pfm", "--fx",
                      "600", "--baseline", "120", "--out", out}) == 0);
  std::ifstream f(out);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  CHECK(text.find("\"mae_mm\": 5.0") != std::string::npos);
  CHECK(text.find("outlier_percent") != std::string::npos);
}

TEST_CASE("export-depth-vis produces an 8-bit image") {
  const std::string dir = cli_dir("vis");
  ImageF disp(16, 8);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 16; ++c) disp.at(r, c) = static_cast<float>(10 + c);
  write_pfm(dir + "/disp.pfm", disp);
  CHECK(run_pipeline({"export-depth-vis", "--in", dir + "/disp.pfm", "--out",
                      dir + "/vis.png"}) == 0);
  const ImageF vis = read_gray(dir + "/vis.png");
  CHECK(vis.same_size(disp));
  // Monotone mapping: brighter with larger disparity.
  CHECK(vis.at(0, 15) > vis.at(0, 0));
  CHECK(vis.at(0, 15) == 1.0f);
}

TEST_CASE("simulate requires camera and projector in the config") {
  const std::string dir = cli_dir("sim");
  std::ofstream(dir + "/params.json") << R"({"scene": {"kind": "plane"}})";
  CHECK(run_pipeline({"simulate", "--params", dir + "/params.json", "--patterns", dir,
                      "--out", dir}) == 2);
}

TEST_CASE("missing files exit 2") {
  CHECK(run_pipeline({"eval", "--est", "/nonexistent/a.pfm", "--gt", "/nonexistent/b.pfm",
                      "--fx", "600", "--baseline", "120"}) == 2);
  CHECK(run_pipeline({"train", "--config", "/nonexistent/c.json", "--patterns", "/nx",
                      "--captures", "/nx", "--out", "/tmp/x.vslg"}) == 2);
}

TEST_SUITE_END();

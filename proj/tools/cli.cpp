#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "voxsl/config.hpp"
#include "voxsl/image_io.hpp"
#include "voxsl/metrics.hpp"
#include "voxsl/patterns.hpp"
#include "voxsl/simulator.hpp"
#include "voxsl/trainer.hpp"

namespace voxsl {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

void write_text_atomic(const std::string& path, const std::string& text) {
  fs::path tmp = fs::path(path);
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string());
    f << text;
    if (!f.good()) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string pattern_file_name(size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "pat_%03zu.pgm", index);
  return buf;
}

std::string capture_file_name(size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "cap_%03zu.pgm", index);
  return buf;
}

void save_pattern_set(const std::vector<Pattern>& set, const std::string& dir, int width,
                      int height, uint64_t seed) {
  fs::create_directories(dir);
  json manifest;
  manifest["width"] = width;
  manifest["height"] = height;
  manifest["seed"] = seed;
  manifest["count"] = set.size();
  manifest["patterns"] = json::array();
  for (size_t i = 0; i < set.size(); ++i) {
    const std::string name = pattern_file_name(i);
    const std::string path = (fs::path(dir) / name).string();
    write_gray(path, set[i].image, 8);
    json entry;
    entry["file"] = name;
    entry["cell"] = set[i].cell;
    entry["seed"] = set[i].seed;
    entry["hash"] = content_hash_hex(path);
    manifest["patterns"].push_back(entry);
  }
  write_text_atomic((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

std::vector<Pattern> load_pattern_set(const std::string& dir) {
  std::vector<Pattern> set;
  const fs::path manifest_path = fs::path(dir) / "manifest.json";
  if (fs::exists(manifest_path)) {
    std::ifstream f(manifest_path);
    json manifest = json::parse(f);
    for (const auto& entry : manifest.at("patterns")) {
      Pattern p;
      p.image = read_gray((fs::path(dir) / entry.at("file").get<std::string>()).string());
      p.cell = entry.value("cell", 0);
      p.seed = entry.value("seed", uint64_t{0});
      set.push_back(std::move(p));
    }
  } else {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      const std::string name = e.path().filename().string();
      if (name.rfind("pat_", 0) == 0 && (name.ends_with(".pgm") || name.ends_with(".png")))
        files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
      Pattern pat;
      pat.image = read_gray(p.string());
      set.push_back(std::move(pat));
    }
  }
  if (set.empty()) throw std::runtime_error("no patterns found in " + dir);
  return set;
}

std::vector<ImageF> load_captures(const std::string& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("cap_", 0) == 0 && (name.ends_with(".pgm") || name.ends_with(".png")))
      files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<ImageF> captures;
  for (const auto& p : files) captures.push_back(read_gray(p.string()));
  if (captures.empty()) throw std::runtime_error("no captures found in " + dir);
  return captures;
}

// Depth maps travel as PFM with invalid pixels stored as 0.
DepthMap depth_map_from_pfm(const ImageF& img) {
  DepthMap d;
  d.depth = img;
  d.valid = ImageU8(img.width(), img.height(), 0);
  for (size_t i = 0; i < img.size(); ++i)
    d.valid.data()[i] = std::isfinite(img.data()[i]) && img.data()[i] > 0 ? 1 : 0;
  return d;
}

ImageF depth_map_to_pfm(const DepthMap& d) {
  ImageF img = d.depth;
  for (size_t i = 0; i < img.size(); ++i)
    if (!d.valid.data()[i]) img.data()[i] = 0.0f;
  return img;
}

int cmd_gen_patterns(const std::string& out_dir, int width, int height, uint64_t seed,
                     int count) {
  const std::vector<Pattern> set = pattern_set_for_count(count, width, height, seed);
  save_pattern_set(set, out_dir, width, height, seed);
  std::cout << "wrote " << set.size() << " patterns to " << out_dir << "\n";
  return kExitOk;
}

int cmd_simulate(const std::string& scene_kind, const std::string& params_path,
                 const std::string& patterns_dir, const std::string& out_dir) {
  RunConfig cfg = load_run_config(params_path);
  if (!cfg.has_camera || !cfg.has_projector)
    throw std::runtime_error("simulate: config must define camera and projector");
  if (!scene_kind.empty()) cfg.scene.kind = scene_kind_from_string(scene_kind);

  const std::vector<Pattern> patterns = load_pattern_set(patterns_dir);
  const SceneDepth scene = analytic_scene(cfg.scene.kind, cfg.scene.params, cfg.camera);
  const ImageU8 shadow = projector_shadow_mask(scene, cfg.camera, cfg.projector);
  const std::vector<ImageF> captures =
      simulate_captures(scene, patterns, cfg.camera, cfg.projector, cfg.radiometric,
                        cfg.train.seed);

  fs::create_directories(out_dir);
  json manifest;
  manifest["scene"] = to_string(cfg.scene.kind);
  manifest["pattern_dir"] = patterns_dir;
  manifest["captures"] = json::array();
  for (size_t j = 0; j < captures.size(); ++j) {
    const std::string name = capture_file_name(j);
    const std::string path = (fs::path(out_dir) / name).string();
    write_gray(path, captures[j], 16);
    json entry;
    entry["file"] = name;
    entry["hash"] = content_hash_hex(path);
    manifest["captures"].push_back(entry);
  }
  const std::string gt_path = (fs::path(out_dir) / "gt_depth.pfm").string();
  write_pfm(gt_path, scene.depth);
  manifest["gt_depth"] = json{{"file", "gt_depth.pfm"}, {"hash", content_hash_hex(gt_path)}};

  ImageF shadow_img(shadow.width(), shadow.height());
  for (size_t i = 0; i < shadow.size(); ++i)
    shadow_img.data()[i] = shadow.data()[i] ? 1.0f : 0.0f;
  const std::string shadow_path = (fs::path(out_dir) / "shadow_mask.pgm").string();
  write_gray(shadow_path, shadow_img, 8);
  manifest["shadow_mask"] =
      json{{"file", "shadow_mask.pgm"}, {"hash", content_hash_hex(shadow_path)}};

  // Illumination mask (inside the projector field and unoccluded): the
  // natural ground-truth validity mask for eval --gt-mask.
  const ImageU8 lit = illumination_mask(scene, cfg.camera, cfg.projector);
  ImageF lit_img(lit.width(), lit.height());
  for (size_t i = 0; i < lit.size(); ++i) lit_img.data()[i] = lit.data()[i] ? 1.0f : 0.0f;
  const std::string lit_path = (fs::path(out_dir) / "lit_mask.pgm").string();
  write_gray(lit_path, lit_img, 8);
  manifest["lit_mask"] = json{{"file", "lit_mask.pgm"}, {"hash", content_hash_hex(lit_path)}};

  write_text_atomic((fs::path(out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
  std::cout << "simulated " << captures.size() << " captures of a " << to_string(cfg.scene.kind)
            << " scene into " << out_dir << "\n";
  return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& patterns_dir,
              const std::string& captures_dir, const std::string& out_ckpt,
              const std::string& depth_out, const std::string& disp_out,
              const std::string& log_path, const std::string& stats_prefix, bool seed_set,
              uint64_t seed, int workers, bool deterministic) {
  RunConfig cfg = load_run_config(config_path);
  if (!cfg.has_camera || !cfg.has_projector)
    throw std::runtime_error("train: config must define camera and projector");
  apply_env_overrides(cfg.train);
  if (seed_set) cfg.train.seed = seed;
  if (workers > 0) cfg.train.workers = workers;
  if (deterministic) cfg.train.deterministic = true;

  const std::vector<Pattern> patterns = load_pattern_set(patterns_dir);
  const std::vector<ImageF> captures = load_captures(captures_dir);

  if (!stats_prefix.empty()) {
    const PixelStats stats = compute_background_and_contrast(captures, cfg.train.f_min);
    write_pfm(stats_prefix + "_B.pfm", stats.background);
    write_pfm(stats_prefix + "_F.pfm", stats.contrast);
  }

  std::ofstream log_file;
  std::ostream* log_sink = nullptr;
  if (!log_path.empty()) {
    log_file.open(log_path, std::ios::trunc);
    if (!log_file) throw std::runtime_error("cannot open log file " + log_path);
    log_sink = &log_file;
  }

  const TrainResult result = train(captures, patterns, cfg.camera, cfg.projector, cfg.train,
                                   log_sink, out_ckpt);
  save_checkpoint(result.grid, out_ckpt);

  const NdcFrame frame = ndc_frame_from_camera(cfg.camera, cfg.train.near_mm);
  const DepthMap depth =
      extract_depth_map(result.grid, cfg.camera, frame, cfg.train.samples_per_ray(),
                        cfg.train.w_min, cfg.train.normalize_depth, cfg.train.z_ndc_max);
  if (!depth_out.empty()) write_pfm(depth_out, depth_map_to_pfm(depth));
  if (!disp_out.empty()) {
    const DisparityMap disp =
        depth_to_disparity(depth, cfg.camera.fx, cfg.projector.baseline_mm);
    ImageF img = disp.disp;
    for (size_t i = 0; i < img.size(); ++i)
      if (!disp.valid.data()[i]) img.data()[i] = 0.0f;
    write_pfm(disp_out, img);
  }

  // Manifest linking the run's inputs and outputs by content hash.
  json manifest;
  manifest["config"] = json{{"file", config_path}, {"hash", content_hash_hex(config_path)}};
  const fs::path pat_manifest = fs::path(patterns_dir) / "manifest.json";
  if (fs::exists(pat_manifest))
    manifest["patterns"] =
        json{{"file", pat_manifest.string()}, {"hash", content_hash_hex(pat_manifest.string())}};
  std::vector<fs::path> cap_files;
  for (const auto& e : fs::directory_iterator(captures_dir))
    if (e.path().filename().string().rfind("cap_", 0) == 0) cap_files.push_back(e.path());
  std::sort(cap_files.begin(), cap_files.end());
  json caps = json::array();
  for (const auto& p : cap_files)
    caps.push_back(json{{"file", p.filename().string()}, {"hash", content_hash_hex(p.string())}});
  manifest["captures"] = json{{"dir", captures_dir}, {"files", caps}};
  manifest["checkpoint"] = json{{"file", out_ckpt}, {"hash", content_hash_hex(out_ckpt)}};
  if (!depth_out.empty())
    manifest["depth"] = json{{"file", depth_out}, {"hash", content_hash_hex(depth_out)}};
  manifest["iterations"] = cfg.train.total_iters();
  manifest["seed"] = cfg.train.seed;
  write_text_atomic(out_ckpt + ".manifest.json", manifest.dump(2) + "\n");

  std::printf("trained %d iterations in %.1f s; final loss %.6g (photo %.3g dist %.3g surface %.3g)\n",
              cfg.train.total_iters(), result.wall_seconds, result.final_report.total,
              result.final_report.photo, result.final_report.dist,
              result.final_report.surface);
  return kExitOk;
}

int cmd_eval(const std::string& est_path, const std::string& gt_path, double fx, double baseline,
             const std::string& gt_mask_path, const std::vector<double>& thresholds,
             double mae_outlier_threshold, const std::string& out_path) {
  DepthMap est = depth_map_from_pfm(read_pfm(est_path));
  DepthMap gt = depth_map_from_pfm(read_pfm(gt_path));
  if (!est.depth.same_size(gt.depth))
    throw std::runtime_error("eval: estimated and ground-truth map sizes differ");
  if (!gt_mask_path.empty()) {
    const ImageF mask = read_gray(gt_mask_path);
    if (!mask.same_size(gt.depth)) throw std::runtime_error("eval: mask size differs");
    for (size_t i = 0; i < mask.size(); ++i)
      if (mask.data()[i] < 0.5f) gt.valid.data()[i] = 0;
  }

  const double mae_plain = mae_depth(est, gt);
  std::optional<double> mae_subst;
  if (mae_outlier_threshold > 0)
    mae_subst = mae_depth(est, gt, OutlierSubstitution{mae_outlier_threshold, fx, baseline});

  const DisparityMap est_disp = depth_to_disparity(est, fx, baseline);
  const DisparityMap gt_disp = depth_to_disparity(gt, fx, baseline);

  json out;
  out["est"] = json{{"file", est_path}, {"hash", content_hash_hex(est_path)}};
  out["gt"] = json{{"file", gt_path}, {"hash", content_hash_hex(gt_path)}};
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", mae_plain);
  out["mae_mm"] = std::stod(buf);
  if (mae_subst) {
    std::snprintf(buf, sizeof(buf), "%.3f", *mae_subst);
    out["mae_substituted_mm"] = std::stod(buf);
  }
  json outliers = json::object();
  for (double t : thresholds) {
    const double o = outlier_percentage(est_disp, gt_disp, t);
    std::snprintf(buf, sizeof(buf), "%.2f", o);
    char key[32];
    std::snprintf(key, sizeof(key), "%g", t);
    outliers[key] = std::stod(buf);
  }
  out["outlier_percent"] = outliers;

  std::string text;
  if (out_path.ends_with(".csv")) {
    std::string header = "mae_mm", row;
    std::snprintf(buf, sizeof(buf), "%.3f", mae_plain);
    row = buf;
    if (mae_subst) {
      header += ",mae_substituted_mm";
      std::snprintf(buf, sizeof(buf), ",%.3f", *mae_subst);
      row += buf;
    }
    for (double t : thresholds) {
      std::snprintf(buf, sizeof(buf), ",o(%g)", t);
      header += buf;
      std::snprintf(buf, sizeof(buf), ",%.2f", outlier_percentage(est_disp, gt_disp, t));
      row += buf;
    }
    text = header + "\n" + row + "\n";
  } else {
    text = out.dump(2) + "\n";
  }
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_text_atomic(out_path, text);
    std::cout << text;
  }
  return kExitOk;
}

int cmd_export_depth_vis(const std::string& in_path, const std::string& out_path, double lo,
                         double hi) {
  const ImageF disp = read_pfm(in_path);
  double vmin = lo, vmax = hi;
  if (!(vmax > vmin)) {
    vmin = std::numeric_limits<double>::infinity();
    vmax = -vmin;
    for (size_t i = 0; i < disp.size(); ++i) {
      const float v = disp.data()[i];
      if (!std::isfinite(v) || v <= 0) continue;
      vmin = std::min(vmin, static_cast<double>(v));
      vmax = std::max(vmax, static_cast<double>(v));
    }
    if (!(vmax > vmin)) throw std::runtime_error("export-depth-vis: no finite values to scale");
  }
  ImageF vis(disp.width(), disp.height());
  for (size_t i = 0; i < disp.size(); ++i) {
    const float v = disp.data()[i];
    vis.data()[i] = (!std::isfinite(v) || v <= 0)
                        ? 0.0f
                        : static_cast<float>(std::clamp((v - vmin) / (vmax - vmin), 0.0, 1.0));
  }
  write_gray(out_path, vis, 8);
  std::cout << "wrote visualization to " << out_path << " (range " << vmin << ".." << vmax
            << ")\n";
  return kExitOk;
}

}  // namespace

int run_pipeline(const std::vector<std::string>& args) {
  CLI::App app{"voxsl: depth from structured light via density-grid inverse rendering"};
  app.require_subcommand(1);

  // gen-patterns
  auto* gen = app.add_subcommand("gen-patterns", "Generate random binary projector patterns");
  int gen_width = 1400, gen_height = 1512, gen_count = 6;
  uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("--width", gen_width, "Pattern width (px)");
  gen->add_option("--height", gen_height, "Pattern height (px)");
  gen->add_option("--seed", gen_seed, "Master seed");
  gen->add_option("--count", gen_count, "Pattern count (1-9; 6 = two per scale)");
  gen->add_option("--out", gen_out, "Output directory")->required();

  // simulate
  auto* sim = app.add_subcommand("simulate", "Synthesize captures of an analytic scene");
  std::string sim_scene, sim_params, sim_patterns, sim_out;
  sim->add_option("--scene", sim_scene, "Scene kind (plane|ramp|sphere|step)");
  sim->add_option("--params", sim_params, "Config JSON (camera, projector, radiometric, scene)")
      ->required();
  sim->add_option("--patterns", sim_patterns, "Pattern directory")->required();
  sim->add_option("--out", sim_out, "Output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "Optimize the density grid from captures");
  std::string tr_config, tr_patterns, tr_captures, tr_out, tr_depth, tr_disp, tr_log, tr_stats;
  uint64_t tr_seed = 0;
  int tr_workers = 0;
  bool tr_deterministic = false;
  tr->add_option("--config", tr_config, "Config JSON")->required();
  tr->add_option("--patterns", tr_patterns, "Pattern directory")->required();
  tr->add_option("--captures", tr_captures, "Capture directory")->required();
  tr->add_option("--out", tr_out, "Checkpoint output path")->required();
  tr->add_option("--depth-out", tr_depth, "Depth map output (PFM)");
  tr->add_option("--disp-out", tr_disp, "Disparity map output (PFM)");
  tr->add_option("--log", tr_log, "Loss log CSV path");
  tr->add_option("--export-stats", tr_stats,
                 "Write the background/contrast decomposition to <prefix>_B.pfm / _F.pfm");
  auto* seed_opt = tr->add_option("--seed", tr_seed, "Seed override");
  tr->add_option("--workers", tr_workers, "Worker threads");
  tr->add_flag("--deterministic", tr_deterministic, "Force deterministic accumulation");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a depth map against ground truth");
  std::string ev_est, ev_gt, ev_mask, ev_out;
  double ev_fx = 0, ev_baseline = 0, ev_mae_thresh = 0;
  std::vector<double> ev_thresholds{0.1, 0.5, 1.0};
  ev->add_option("--est", ev_est, "Estimated depth (PFM, invalid = 0)")->required();
  ev->add_option("--gt", ev_gt, "Ground-truth depth (PFM, invalid = 0)")->required();
  ev->add_option("--fx", ev_fx, "Camera focal length (px)")->required();
  ev->add_option("--baseline", ev_baseline, "Camera-projector baseline (mm)")->required();
  ev->add_option("--gt-mask", ev_mask, "Optional validity mask for the ground truth (PGM)");
  ev->add_option("--thresholds", ev_thresholds, "Outlier thresholds (px)")->delimiter(',');
  ev->add_option("--mae-outlier-threshold", ev_mae_thresh,
                 "Also report MAE with outlier substitution at this disparity error (px)");
  ev->add_option("--out", ev_out, "Metrics output (.json or .csv)");

  // export-depth-vis
  auto* vis = app.add_subcommand("export-depth-vis", "8-bit visualization of a PFM map");
  std::string vis_in, vis_out;
  double vis_min = 0, vis_max = 0;
  vis->add_option("--in", vis_in, "Input PFM (disparity or depth)")->required();
  vis->add_option("--out", vis_out, "Output image (.pgm or .png)")->required();
  vis->add_option("--min", vis_min, "Lower bound of the display range");
  vis->add_option("--max", vis_max, "Upper bound of the display range");

  std::vector<std::string> cli_args(args.rbegin(), args.rend());  // CLI11 wants reversed
  try {
    app.parse(cli_args);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints help / error text
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed())
      return cmd_gen_patterns(gen_out, gen_width, gen_height, gen_seed, gen_count);
    if (sim->parsed()) return cmd_simulate(sim_scene, sim_params, sim_patterns, sim_out);
    if (tr->parsed())
      return cmd_train(tr_config, tr_patterns, tr_captures, tr_out, tr_depth, tr_disp, tr_log,
                       tr_stats, seed_opt->count() > 0, tr_seed, tr_workers, tr_deterministic);
    if (ev->parsed())
      return cmd_eval(ev_est, ev_gt, ev_fx, ev_baseline, ev_mask, ev_thresholds, ev_mae_thresh,
                      ev_out);
    if (vis->parsed()) return cmd_export_depth_vis(vis_in, vis_out, vis_min, vis_max);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

int run_pipeline(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_pipeline(args);
}

}  // namespace voxsl

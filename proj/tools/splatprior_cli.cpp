#include "splatprior/config.hpp"
#include "splatprior/eval.hpp"
#include "splatprior/io.hpp"
#include "splatprior/optimizer.hpp"
#include "splatprior/parallel.hpp"
#include "splatprior/pipeline.hpp"
#include "splatprior/renderer.hpp"
#include "splatprior/scenes.hpp"
#include "splatprior/selftest.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace splatprior;

namespace {

constexpr const char* kOutputEnv = "SPLATPRIOR_OUTPUT_DIR";

struct Common {
  std::string config_path;
  std::string output;
  int threads = 0;
};

Config load_config(const std::string& path) {
  if (path.empty()) return {};
  if (!fs::exists(path)) throw IoError("config file not found: " + path);
  return Config::load(path);
}

// --output wins, then the environment, then [output] dir in the config.
fs::path output_dir(const Common& c, const Config& cfg) {
  fs::path dir;
  if (!c.output.empty()) {
    dir = c.output;
  } else if (const char* env = std::getenv(kOutputEnv); env && *env) {
    dir = env;
  } else {
    dir = cfg.get_string("output.dir", "out");
  }
  fs::create_directories(dir);
  return dir;
}

std::string view_name(int i, const char* ext) {
  std::ostringstream os;
  os << "view_" << std::setw(3) << std::setfill('0') << i << ext;
  return os.str();
}

ImageRGB normal_image(const RenderOutput& r) {
  ImageRGB img(r.width, r.height, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = 0.5 * (r.normal.data[i] + 1.0);
  return img;
}

SurfaceSettings surface_settings(const Config& cfg, const TrainConfig& tc) {
  SurfaceSettings s;
  s.grid_resolution = cfg.get_int("eval.grid_resolution", 128);
  s.truncation_voxels = cfg.get_double("eval.truncation_voxels", 4.0);
  s.gt_samples = cfg.get_int("eval.gt_samples", 20000);
  s.mesh_samples = static_cast<std::size_t>(cfg.get_int("eval.mesh_samples", 100000));
  s.seed = tc.seed;
  s.render = tc.render;
  s.valid_alpha = tc.valid_alpha;
  return s;
}

struct TrainFlags {
  bool no_prior = false, no_scp = false, no_remove = false, no_project = false;
  std::optional<double> bandwidth_fixed;
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations;
  bool deterministic = false;
  bool remove_unobserved = false;
  bool literal_projection = false;
  bool save_gt = false;
  int checkpoint_interval = 0;
};

int run_train(const Common& common, const TrainFlags& f) {
  const Config cfg = load_config(common.config_path);
  const fs::path out = output_dir(common, cfg);
  TrainConfig tc = train_config_from(cfg, TrainConfig::desk_defaults());
  if (f.no_prior) tc.flags.prior = false;
  if (f.no_scp) tc.flags.scp = false;
  if (f.no_remove) tc.flags.remove = false;
  if (f.no_project) tc.flags.project = false;
  if (f.bandwidth_fixed) tc.schedule.fixed_sigma = *f.bandwidth_fixed;
  if (f.seed) tc.seed = *f.seed;
  if (f.iterations) tc.iterations = *f.iterations;
  if (f.remove_unobserved) tc.flags.remove_unobserved = true;
  if (f.literal_projection) tc.flags.literal_projection = true;
  if (f.deterministic || common.threads == 1) set_thread_count(1);

  const AnalyticScene scene = scene_from_config(cfg);
  const std::vector<CameraView> views = render_ground_truth(scene);
  if (f.save_gt) {
    fs::create_directories(out / "gt");
    for (std::size_t i = 0; i < views.size(); ++i) {
      write_png(out / "gt" / view_name(static_cast<int>(i), ".png"), views[i].gt_rgb);
      write_pfm(out / "gt" / view_name(static_cast<int>(i), ".pfm"), views[i].gt_depth);
    }
  }
  const int count = cfg.get_int("init.count", 1500);
  const InitMode mode =
      cfg.get_string("init.mode", "random") == "surface" ? InitMode::Surface : InitMode::Random;
  std::vector<Gaussian> init = init_gaussians(scene, count, mode, tc.seed);

  TrainIo io;
  io.checkpoint_dir = out;
  io.checkpoint_interval = f.checkpoint_interval;
  io.log = &std::cout;
  io.log_interval = cfg.get_int("output.log_interval", 500);
  const TrainResult res = train(views, scene.bounds, std::move(init), tc, io);

  write_trace_csv(out / "trace.csv", res.trace);
  {
    std::ofstream log(out / "prior_updates.log");
    for (const PriorLogEntry& e : res.prior_log) log << e.line() << "\n";
    std::ofstream rem(out / "removals.log");
    for (const RemovalReport& r : res.removals) rem << r.line() << "\n";
  }
  save_checkpoint(out / "final.spck", res.gaussians, res.adam, res.iterations_run);

  const SurfaceReport rep = evaluate_gaussians(scene, views, res.gaussians, surface_settings(cfg, tc));
  if (!rep.mesh.empty()) write_ply(out / "mesh.ply", rep.mesh);
  std::map<std::string, double> metrics{
      {"chamfer_l1", rep.chamfer},
      {"voxel_size", rep.voxel_size},
      {"mean_psnr", rep.mean_psnr},
      {"num_gaussians", static_cast<double>(res.gaussians.size())},
      {"iterations", static_cast<double>(res.iterations_run)},
      {"prior_updates", static_cast<double>(res.counters.prior_updates)},
      {"classify_calls", static_cast<double>(res.counters.classify_calls)},
      {"remove_calls", static_cast<double>(res.counters.remove_calls)},
      {"project_calls", static_cast<double>(res.counters.project_calls)},
      {"scp_evaluations", static_cast<double>(res.counters.scp_evaluations)},
      {"skipped_gradients", static_cast<double>(res.adam.skipped)},
  };
  write_metrics_json(out / "metrics.json", metrics);
  std::cout << "chamfer_l1=" << rep.chamfer << " mean_psnr=" << rep.mean_psnr
            << " gaussians=" << res.gaussians.size()
            << " prior_ops=" << res.counters.prior_total() << "\n";
  if (rep.mesh.empty()) {
    std::cerr << "error: extracted mesh is empty\n";
    return 1;
  }
  return 0;
}

int run_fuse(const Common& common, const std::string& depth_dir, const std::string& grid_name) {
  const Config cfg = load_config(common.config_path);
  const fs::path out = output_dir(common, cfg);
  const AnalyticScene scene = scene_from_config(cfg);
  std::vector<DepthMap> depths;
  if (depth_dir.empty()) {
    fs::create_directories(out / "gt");
    for (std::size_t i = 0; i < scene.cameras.size(); ++i) {
      const CameraView v = render_ground_truth(scene, scene.cameras[i]);
      write_pfm(out / "gt" / view_name(static_cast<int>(i), ".pfm"), v.gt_depth);
      write_png(out / "gt" / view_name(static_cast<int>(i), ".png"), v.gt_rgb);
      depths.push_back(v.gt_depth);
    }
  } else {
    for (std::size_t i = 0; i < scene.cameras.size(); ++i) {
      depths.push_back(read_pfm(fs::path(depth_dir) / view_name(static_cast<int>(i), ".pfm")));
    }
  }
  const PriorSettings ps =
      PriorSettings::for_scene(scene.bounds, cfg.get_int("eval.grid_resolution", 128),
                               cfg.get_double("eval.truncation_voxels", 4.0));
  const TsdfGrid grid = fuse_depth_maps(scene.cameras, depths, ps.spec, ps.base_truncation);
  write_tsdf(out / grid_name, grid);
  std::cout << "wrote " << (out / grid_name).string() << " dims=" << grid.spec.dims[0] << "x"
            << grid.spec.dims[1] << "x" << grid.spec.dims[2]
            << " voxel=" << grid.spec.voxel_size << "\n";
  return 0;
}

int run_extract(const Common& common, const std::string& grid_path, const std::string& mesh_name) {
  const Config cfg = load_config(common.config_path);
  const fs::path out = output_dir(common, cfg);
  const TsdfGrid grid = read_tsdf(grid_path);
  const TriangleMesh mesh = extract_mesh(grid);
  write_ply(out / mesh_name, mesh);
  std::cout << "wrote " << (out / mesh_name).string() << " vertices=" << mesh.vertices.size()
            << " faces=" << mesh.faces.size() << "\n";
  return 0;
}

int run_render(const Common& common, const std::string& checkpoint, int view) {
  const Config cfg = load_config(common.config_path);
  const fs::path out = output_dir(common, cfg);
  const AnalyticScene scene = scene_from_config(cfg);
  if (view < 0 || view >= static_cast<int>(scene.cameras.size())) {
    throw InvalidInput("view index " + std::to_string(view) + " out of range");
  }
  const Checkpoint ck = load_checkpoint(checkpoint);
  const TrainConfig tc = train_config_from(cfg, TrainConfig::desk_defaults());
  const RenderOutput r = render_view(ck.gaussians, scene.cameras[view], tc.render);
  write_png(out / ("render_" + view_name(view, ".png")), r.rgb);
  write_png(out / ("normal_" + view_name(view, ".png")), normal_image(r));
  write_pfm(out / ("depth_" + view_name(view, ".pfm")), to_depth_map(r, tc.valid_alpha));
  const CameraView gt = render_ground_truth(scene, scene.cameras[view]);
  std::cout << "psnr=" << psnr(r.rgb, gt.gt_rgb) << "\n";
  return 0;
}

int run_eval(const Common& common, const std::string& mesh_path, const std::string& points_path) {
  const Config cfg = load_config(common.config_path);
  const fs::path out = output_dir(common, cfg);
  const AnalyticScene scene = scene_from_config(cfg);
  const TrainConfig tc = train_config_from(cfg, TrainConfig::desk_defaults());
  const SurfaceSettings s = surface_settings(cfg, tc);
  const std::vector<Vec3> gt = chamfer_pointcloud(scene, s.gt_samples, s.seed + 1);
  double cd = 0.0;
  if (!mesh_path.empty()) {
    cd = chamfer_l1(read_ply(mesh_path), gt, s.mesh_samples, s.seed + 2);
  } else {
    const TriangleMesh pts = read_ply(points_path);
    cd = chamfer_l1(pts.vertices, gt);
  }
  std::map<std::string, double> metrics{{"chamfer_l1", cd}};
  write_metrics_json(out / "eval_metrics.json", metrics);
  std::cout << "chamfer_l1=" << cd << "\n";
  return std::isfinite(cd) ? 0 : 1;
}

int run_checks(std::uint64_t seed) {
  int failed = 0;
  for (const SelftestResult& r : splatprior::run_selftest(seed)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name;
    if (!r.detail.empty()) std::cout << " (" << r.detail << ")";
    std::cout << "\n";
    failed += r.passed ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Planar Gaussian optimization under a self-constrained TSDF prior"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--threads", common.threads, "Worker threads (1 = deterministic)")
      ->check(CLI::NonNegativeNumber);

  const auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* opt = sub->add_option("-c,--config", common.config_path, "Scene and training config");
    if (need_config) opt->required();
    opt->check(CLI::ExistingFile);
    sub->add_option("-o,--output", common.output,
                    std::string("Output directory (overrides ") + kOutputEnv + " and config)");
  };

  TrainFlags tf;
  auto* train_cmd = app.add_subcommand("train", "Run the full pipeline");
  add_common(train_cmd, false);
  train_cmd->add_flag("--no-prior", tf.no_prior, "Disable the TSDF prior and all constraints");
  train_cmd->add_flag("--no-scp", tf.no_scp, "Disable the opacity loss");
  train_cmd->add_flag("--no-remove", tf.no_remove, "Disable outlier removal");
  train_cmd->add_flag("--no-project", tf.no_project, "Disable projection onto the surface");
  train_cmd->add_option("--bandwidth-fixed", tf.bandwidth_fixed, "Use one band scale for every update")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", tf.seed, "Random seed");
  train_cmd->add_option("--iterations", tf.iterations, "Override the iteration count")
      ->check(CLI::PositiveNumber);
  train_cmd->add_flag("--deterministic", tf.deterministic, "Single-threaded, bit-reproducible run");
  train_cmd->add_flag("--remove-unobserved", tf.remove_unobserved,
                      "Also remove Gaussians in never-observed voxels");
  train_cmd->add_flag("--literal-projection", tf.literal_projection,
                      "Project with mu -= s * grad f instead of the metric step");
  train_cmd->add_flag("--save-gt", tf.save_gt, "Write ground-truth rasters to <output>/gt");
  train_cmd->add_option("--checkpoint-interval", tf.checkpoint_interval,
                        "Write a checkpoint every N iterations (0 = final only)");

  std::string depth_dir, grid_name = "grid.tsdf";
  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse depth maps (PFM) into a TSDF file");
  add_common(fuse_cmd, true);
  fuse_cmd->add_option("--depths", depth_dir,
                       "Directory of view_NNN.pfm depth maps (default: ground truth)")
      ->check(CLI::ExistingDirectory);
  fuse_cmd->add_option("--grid", grid_name, "Output grid file name");

  std::string grid_path, mesh_name = "mesh.ply";
  auto* extract_cmd = app.add_subcommand("extract-mesh", "Marching cubes on a TSDF file");
  add_common(extract_cmd, false);
  extract_cmd->add_option("--grid", grid_path, "Input TSDF file")
      ->required()
      ->check(CLI::ExistingFile);
  extract_cmd->add_option("--mesh", mesh_name, "Output PLY file name");

  std::string checkpoint;
  int view = 0;
  auto* render_cmd = app.add_subcommand("render", "Render a checkpoint from one scene view");
  add_common(render_cmd, true);
  render_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  render_cmd->add_option("--view", view, "View index");

  std::string mesh_path, points_path;
  auto* eval_cmd = app.add_subcommand("eval", "Chamfer-L1 of a mesh or point PLY against the scene");
  add_common(eval_cmd, true);
  auto* mesh_opt = eval_cmd->add_option("--mesh", mesh_path, "Mesh PLY")->check(CLI::ExistingFile);
  auto* pts_opt =
      eval_cmd->add_option("--points", points_path, "Point PLY (vertices only)")->check(CLI::ExistingFile);
  mesh_opt->excludes(pts_opt);
  eval_cmd->callback([&] {
    if (mesh_path.empty() && points_path.empty()) {
      throw CLI::ValidationError("eval", "one of --mesh or --points is required");
    }
  });

  std::uint64_t selftest_seed = 0;
  auto* selftest_cmd = app.add_subcommand("selftest", "Run the built-in property checks");
  selftest_cmd->add_option("--seed", selftest_seed, "Random seed");

  CLI11_PARSE(app, argc, argv);
  if (common.threads > 0) set_thread_count(common.threads);

  try {
    if (*train_cmd) return run_train(common, tf);
    if (*fuse_cmd) return run_fuse(common, depth_dir, grid_name);
    if (*extract_cmd) return run_extract(common, grid_path, mesh_name);
    if (*render_cmd) return run_render(common, checkpoint, view);
    if (*eval_cmd) return run_eval(common, mesh_path, points_path);
    if (*selftest_cmd) return run_checks(selftest_seed);
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const TrainingError& e) {
    std::cerr << "training aborted: " << e.what() << "\n";
    return 4;
  }
  return 0;
}

#include "splatprior/optimizer.hpp"

#include "splatprior/io.hpp"
#include "splatprior/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

namespace splatprior {

TrainConfig TrainConfig::full_scale() { return {}; }

TrainConfig TrainConfig::desk_defaults() {
  TrainConfig c;
  c.iterations = 3000;
  c.scp_start = 1500;
  c.schedule.first_update = 1000;
  c.schedule.update_interval = 500;
  c.schedule.stop_iter = 2000;
  c.densify.start = 300;
  c.densify.stop = 2500;
  c.densify.interval = 100;
  c.densify.max_gaussians = 6000;
  return c;
}

void TrainConfig::validate() const {
  if (iterations < 1) throw InvalidInput("train: iterations must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvalidInput("train: Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw InvalidInput("train: Adam eps must be positive");
  for (double r : {lr.center_init, lr.center_final, lr.opacity, lr.scale, lr.rotation, lr.color}) {
    if (!(r > 0.0)) throw InvalidInput("train: learning rates must be positive");
  }
  for (double w : {weights.depth, weights.normal_smooth, weights.multiview, weights.scp}) {
    if (!(w >= 0.0)) throw InvalidInput("train: loss weights must be non-negative");
  }
  if (densify.interval < 1) throw InvalidInput("train: densify interval must be >= 1");
  if (densify.min_gaussians < 1) throw InvalidInput("train: Gaussian floor must be >= 1");
  if (!(rgb_beta >= 0.0 && rgb_beta <= 1.0)) throw InvalidInput("train: beta must lie in [0, 1]");
  if (!(planar_ratio > 0.0)) throw InvalidInput("train: planar ratio must be positive");
  if (grid_resolution < 2) throw InvalidInput("train: grid resolution must be >= 2");
  if (!(truncation_voxels > 0.0)) throw InvalidInput("train: truncation must be positive");
  schedule.validate();
}

TrainConfig train_config_from(const Config& c, TrainConfig b) {
  b.iterations = c.get_int("train.iterations", b.iterations);
  b.seed = static_cast<std::uint64_t>(c.get_int("train.seed", static_cast<int>(b.seed)));
  b.scp_start = c.get_int("train.scp_start", b.scp_start);
  b.rgb_beta = c.get_double("train.rgb_beta", b.rgb_beta);
  b.valid_alpha = c.get_double("train.valid_alpha", b.valid_alpha);
  b.use_ncc = c.get_bool("train.use_ncc", b.use_ncc);
  b.neighbors = c.get_int("train.neighbors", b.neighbors);
  b.planar_weight = c.get_double("train.planar_weight", b.planar_weight);
  b.planar_ratio = c.get_double("train.planar_ratio", b.planar_ratio);
  b.beta1 = c.get_double("train.adam_beta1", b.beta1);
  b.beta2 = c.get_double("train.adam_beta2", b.beta2);
  b.adam_eps = c.get_double("train.adam_eps", b.adam_eps);

  b.lr.center_init = c.get_double("lr.center_init", b.lr.center_init);
  b.lr.center_final = c.get_double("lr.center_final", b.lr.center_final);
  b.lr.opacity = c.get_double("lr.opacity", b.lr.opacity);
  b.lr.scale = c.get_double("lr.scale", b.lr.scale);
  b.lr.rotation = c.get_double("lr.rotation", b.lr.rotation);
  b.lr.color = c.get_double("lr.color", b.lr.color);

  b.weights.depth = c.get_double("loss.lambda_depth", b.weights.depth);
  b.weights.normal_smooth = c.get_double("loss.lambda_normal_smooth", b.weights.normal_smooth);
  b.weights.multiview = c.get_double("loss.lambda_multiview", b.weights.multiview);
  b.weights.scp = c.get_double("loss.lambda_scp", b.weights.scp);

  b.densify.interval = c.get_int("densify.interval", b.densify.interval);
  b.densify.start = c.get_int("densify.start", b.densify.start);
  b.densify.stop = c.get_int("densify.stop", b.densify.stop);
  b.densify.grad_threshold = c.get_double("densify.grad_threshold", b.densify.grad_threshold);
  b.densify.prune_opacity = c.get_double("densify.prune_opacity", b.densify.prune_opacity);
  b.densify.min_gaussians = static_cast<std::size_t>(
      c.get_int("densify.min_gaussians", static_cast<int>(b.densify.min_gaussians)));
  b.densify.max_gaussians = static_cast<std::size_t>(
      c.get_int("densify.max_gaussians", static_cast<int>(b.densify.max_gaussians)));
  b.densify.percent_dense = c.get_double("densify.percent_dense", b.densify.percent_dense);
  b.densify.split_factor = c.get_double("densify.split_factor", b.densify.split_factor);

  b.schedule.first_update = c.get_int("prior.first_update", b.schedule.first_update);
  b.schedule.update_interval = c.get_int("prior.update_interval", b.schedule.update_interval);
  b.schedule.stop_iter = c.get_int("prior.stop_iter", b.schedule.stop_iter);
  b.schedule.sigma_sequence = c.get_list("prior.sigmas", b.schedule.sigma_sequence);
  b.schedule.delta = c.get_double("prior.delta", b.schedule.delta);
  if (c.has("prior.fixed_sigma")) b.schedule.fixed_sigma = c.get_double("prior.fixed_sigma", 1.0);
  b.grid_resolution = c.get_int("prior.grid_resolution", b.grid_resolution);
  b.truncation_voxels = c.get_double("prior.truncation_voxels", b.truncation_voxels);
  b.flags.prior = c.get_bool("prior.enabled", b.flags.prior);
  b.flags.scp = c.get_bool("prior.scp", b.flags.scp);
  b.flags.remove = c.get_bool("prior.remove", b.flags.remove);
  b.flags.project = c.get_bool("prior.project", b.flags.project);
  b.flags.remove_unobserved = c.get_bool("prior.remove_unobserved", b.flags.remove_unobserved);
  b.flags.literal_projection = c.get_bool("prior.literal_projection", b.flags.literal_projection);

  b.render.near = c.get_double("render.near", b.render.near);
  b.render.far = c.get_double("render.far", b.render.far);
  b.render.cutoff_sigma = c.get_double("render.cutoff_sigma", b.render.cutoff_sigma);
  b.render.alpha_max = c.get_double("render.alpha_max", b.render.alpha_max);
  b.render.min_transmittance = c.get_double("render.min_transmittance", b.render.min_transmittance);
  b.render.tile_size = c.get_int("render.tile_size", b.render.tile_size);
  return b;
}

std::string PriorLogEntry::line() const {
  std::ostringstream os;
  os << "iter=" << iter << " sigma=" << sigma << " truncation=" << truncation
     << " observed=" << observed_voxels;
  return os.str();
}

std::vector<int> nearest_cameras(std::span<const CameraView> views, int index, int count) {
  std::vector<int> order;
  for (int i = 0; i < static_cast<int>(views.size()); ++i)
    if (i != index) order.push_back(i);
  const Vec3 c = views[index].camera.center();
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return (views[a].camera.center() - c).squaredNorm() <
           (views[b].camera.center() - c).squaredNorm();
  });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(std::max(count, 0))));
  return order;
}

namespace {

void add_grads(std::vector<ParamVector>& acc, const std::vector<ParamVector>& g) {
  for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += g[j];
}

double scene_extent(std::span<const CameraView> views, const Aabb& bounds) {
  double r = 0.0;
  for (const CameraView& v : views) r = std::max(r, (v.camera.center() - bounds.center()).norm());
  return 1.1 * r;
}

}  // namespace

TrainResult train(std::span<const CameraView> views, const Aabb& scene_bounds,
                  std::vector<Gaussian> gaussians, const TrainConfig& cfg, const TrainIo& io) {
  cfg.validate();
  if (views.size() < 2) throw InvalidInput("train: at least 2 views are required");
  if (gaussians.empty()) throw InvalidInput("train: no initial Gaussians");
  for (const CameraView& v : views) {
    v.camera.validate();
    if (v.gt_rgb.width != v.camera.width || v.gt_rgb.height != v.camera.height) {
      throw InvalidInput("train: ground truth does not match its camera");
    }
  }

  const int nviews = static_cast<int>(views.size());
  std::vector<Camera> cameras;
  for (const CameraView& v : views) cameras.push_back(v.camera);
  std::vector<std::vector<int>> nearest(nviews);
  for (int i = 0; i < nviews; ++i) nearest[i] = nearest_cameras(views, i, cfg.neighbors);

  const double extent = scene_extent(views, scene_bounds);
  PriorSettings prior_settings = PriorSettings::for_scene(scene_bounds, cfg.grid_resolution,
                                                          cfg.truncation_voxels);
  prior_settings.render = cfg.render;
  prior_settings.valid_alpha = cfg.valid_alpha;
  BandSchedule schedule = cfg.schedule;
  const ProjectionRule rule =
      cfg.flags.literal_projection ? ProjectionRule::Literal : ProjectionRule::Metric;

  TrainResult res;
  res.adam.resize(gaussians.size());
  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
  std::vector<double> grad_sum(gaussians.size(), 0.0);
  std::vector<int> grad_count(gaussians.size(), 0);
  std::vector<BandLabel> labels;
  const bool need_neighbor = cfg.neighbors > 0 && (cfg.use_ncc || cfg.weights.multiview > 0.0);

  const auto refresh_labels = [&] {
    if (!res.prior) return;
    labels = classify_all(*res.prior, schedule.delta, gaussians);
    ++res.counters.classify_calls;
  };

  for (int it = 1; it <= cfg.iterations; ++it) {
    const int vi = (it - 1) % nviews;
    const CameraView& ref = views[vi];
    int nb = -1;
    if (need_neighbor && !nearest[vi].empty()) {
      nb = nearest[vi][static_cast<std::size_t>((it - 1) / nviews) % nearest[vi].size()];
    }

    const RenderOutput render = render_view(gaussians, ref.camera, cfg.render);
    RenderGrad grad(render);
    LossTerms terms;
    std::optional<Neighbor> neighbor;
    if (nb >= 0 && cfg.use_ncc) neighbor = Neighbor{&views[nb].camera, &views[nb].gt_rgb};
    terms.rgb = rgb_loss(render, ref.camera, ref.gt_rgb, neighbor, cfg.rgb_beta, cfg.valid_alpha,
                         &grad, 1.0)
                    .total;
    terms.depth = depth_distortion_loss(render, &grad, cfg.weights.depth);
    terms.normal_smooth = normal_smooth_loss(render, ref.gt_rgb, ref.camera.intrinsics,
                                             cfg.valid_alpha, &grad, cfg.weights.normal_smooth);

    std::vector<ParamVector> grads(gaussians.size(), ParamVector::Zero());
    if (nb >= 0 && cfg.weights.multiview > 0.0) {
      const Camera& ncam = views[nb].camera;
      const RenderOutput nrender = render_view(gaussians, ncam, cfg.render);
      RenderGrad ngrad(nrender);
      terms.multiview = multiview_geom_loss(render, ref.camera, nrender, ncam, cfg.valid_alpha,
                                            &grad, &ngrad, cfg.weights.multiview)
                            .value;
      add_grads(grads, render_backward(gaussians, ncam, nrender, ngrad, cfg.render));
    }
    add_grads(grads, render_backward(gaussians, ref.camera, render, grad, cfg.render));

    const bool scp_active = cfg.flags.prior && cfg.flags.scp && it >= cfg.scp_start &&
                            res.prior.has_value() && labels.size() == gaussians.size();
    if (scp_active) {
      ++res.counters.scp_evaluations;
      const ScpLoss scp = scp_loss(gaussians, labels);
      terms.scp = scp.value;
      for (std::size_t j = 0; j < gaussians.size(); ++j) {
        grads[j][kOpacityOffset] += cfg.weights.scp * scp.grad_logit[j];
      }
    }
    if (cfg.planar_weight > 0.0) {
      planarity_penalty(gaussians, cfg.planar_ratio, cfg.planar_weight, &grads);
    }

    TraceRow row;
    row.iter = it;
    row.total = total_loss(terms, cfg.weights, scp_active);
    row.l_rgb = terms.rgb;
    row.l_depth = terms.depth;
    row.l_ns = terms.normal_smooth;
    row.l_nm = terms.multiview;
    row.l_scp = scp_active ? terms.scp : 0.0;
    row.num_gaussians = gaussians.size();
    res.trace.push_back(row);

    std::vector<char> visible(gaussians.size(), 0);
    for (const BlendRecord& r : render.records) visible[r.gaussian] = 1;
    for (std::size_t j = 0; j < gaussians.size(); ++j) {
      if (!visible[j]) continue;
      grad_sum[j] += screen_space_gradient(ref.camera, gaussians[j], grads[j]);
      ++grad_count[j];
    }

    adam_step(gaussians, grads, res.adam, cfg.lr.vector_at(it, cfg.iterations, extent), cfg.beta1,
              cfg.beta2, cfg.adam_eps);

    if (cfg.flags.prior) {
      if (auto up = maybe_update_prior(schedule, it, gaussians, cameras, prior_settings)) {
        ++res.counters.prior_updates;
        PriorLogEntry entry{it, up->sigma, up->grid.truncation, 0};
        for (float w : up->grid.weights) entry.observed_voxels += w > 0.0f ? 1 : 0;
        res.prior_log.push_back(entry);
        if (io.log) *io.log << "prior " << entry.line() << "\n";
        res.prior = std::move(up->grid);
        refresh_labels();
      }
    }

    const DensifySettings& ds = cfg.densify;
    if (it >= ds.start && it <= ds.stop && it % ds.interval == 0) {
      const DensifyResult dr = densify(gaussians, grad_sum, grad_count, ds, extent, rng);
      res.adam.remap(dr.source);
      grad_sum.assign(gaussians.size(), 0.0);
      grad_count.assign(gaussians.size(), 0);
      if (cfg.flags.prior && res.prior) {
        if (cfg.flags.project) {
          project_to_surface(gaussians, *res.prior, rule);
          ++res.counters.project_calls;
        }
        if (cfg.flags.remove) {
          RemovalResult rr =
              remove_outliers(gaussians, *res.prior, schedule.delta, cfg.flags.remove_unobserved);
          ++res.counters.remove_calls;
          rr.report.iter = it;
          if (rr.retained.empty()) {
            throw TrainingError("outlier removal emptied the Gaussian set at iteration " +
                                std::to_string(it));
          }
          std::vector<std::int64_t> src(rr.kept.begin(), rr.kept.end());
          res.adam.remap(src);
          gaussians = std::move(rr.retained);
          grad_sum.assign(gaussians.size(), 0.0);
          grad_count.assign(gaussians.size(), 0);
          if (io.log) *io.log << "removal " << rr.report.line() << "\n";
          res.removals.push_back(std::move(rr.report));
        }
        refresh_labels();
      }
      if (gaussians.empty()) {
        throw TrainingError("densification emptied the Gaussian set at iteration " +
                            std::to_string(it));
      }
    }

    if (io.log && io.log_interval > 0 && it % io.log_interval == 0) {
      *io.log << "iter " << it << " total=" << row.total << " rgb=" << row.l_rgb
              << " gaussians=" << gaussians.size() << std::endl;
    }
    if (!io.checkpoint_dir.empty() && io.checkpoint_interval > 0 &&
        it % io.checkpoint_interval == 0) {
      std::ostringstream name;
      name << "checkpoint_" << std::setw(6) << std::setfill('0') << it << ".spck";
      save_checkpoint(io.checkpoint_dir / name.str(), gaussians, res.adam, it);
    }
    res.iterations_run = it;
  }
  res.gaussians = std::move(gaussians);
  return res;
}

void write_trace_csv(const std::filesystem::path& path, std::span<const TraceRow> trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "iter,l_rgb,l_depth,l_ns,l_nm,l_scp,total,num_gaussians\n";
  out << std::setprecision(17);
  for (const TraceRow& r : trace) {
    out << r.iter << ',' << r.l_rgb << ',' << r.l_depth << ',' << r.l_ns << ',' << r.l_nm << ','
        << r.l_scp << ',' << r.total << ',' << r.num_gaussians << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<TraceRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    TraceRow r;
    if (!(ls >> r.iter >> r.l_rgb >> r.l_depth >> r.l_ns >> r.l_nm >> r.l_scp >> r.total >>
          r.num_gaussians)) {
      throw IoError("malformed trace row in " + path.string() + ": " + line);
    }
    rows.push_back(r);
  }
  return rows;
}

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const std::filesystem::path& path, std::span<const Gaussian> gaussians,
                     const AdamState& adam, int iter) {
  if (adam.m.size() != gaussians.size() || adam.v.size() != gaussians.size()) {
    throw InvalidInput("save_checkpoint: optimizer state does not match the Gaussians");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write("SPCK", 4);
  binio::put_u32(out, kCheckpointVersion);
  binio::put_u32(out, static_cast<std::uint32_t>(iter));
  binio::put_u64(out, gaussians.size());
  for (const Gaussian& g : gaussians) {
    const ParamVector p = g.pack();
    for (int i = 0; i < kParamCount; ++i) binio::put_f64(out, p[i]);
  }
  binio::put_u64(out, static_cast<std::uint64_t>(adam.step));
  for (std::size_t j = 0; j < gaussians.size(); ++j) {
    for (int i = 0; i < kParamCount; ++i) binio::put_f64(out, adam.m[j][i]);
    for (int i = 0; i < kParamCount; ++i) binio::put_f64(out, adam.v[j][i]);
  }
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "SPCK", 4) != 0) {
    throw IoError("not a checkpoint file: " + path.string());
  }
  try {
    const std::uint32_t version = binio::get_u32(in);
    if (version != kCheckpointVersion) {
      throw IoError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ck;
    ck.iter = static_cast<int>(binio::get_u32(in));
    const std::uint64_t n = binio::get_u64(in);
    if (n > (1ull << 32)) throw IoError("implausible Gaussian count");
    ck.gaussians.resize(n);
    for (Gaussian& g : ck.gaussians) {
      ParamVector p;
      for (int i = 0; i < kParamCount; ++i) p[i] = binio::get_f64(in);
      g = Gaussian::unpack(p);
    }
    ck.adam.step = static_cast<std::int64_t>(binio::get_u64(in));
    ck.adam.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      for (int i = 0; i < kParamCount; ++i) ck.adam.m[j][i] = binio::get_f64(in);
      for (int i = 0; i < kParamCount; ++i) ck.adam.v[j][i] = binio::get_f64(in);
    }
    return ck;
  } catch (const IoError& e) {
    throw IoError("bad checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace splatprior

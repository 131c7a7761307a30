#pragma once

#include "splatprior/config.hpp"
#include "splatprior/constraints.hpp"
#include "splatprior/core.hpp"
#include "splatprior/prior.hpp"
#include "splatprior/renderer.hpp"
#include "splatprior/tsdf.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace splatprior {

/// Raised when training cannot continue (non-finite loss, emptied Gaussian set).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LearningRates {
  double center_init = 1.6e-4;   ///< times the scene extent
  double center_final = 1.6e-6;  ///< times the scene extent
  double opacity = 0.05;
  double scale = 5e-3;
  double rotation = 1e-3;
  double color = 2.5e-3;

  /// Log-linear decay of the center rate from init to final over `total` iterations.
  [[nodiscard]] double center_at(int iter, int total, double extent) const;
  [[nodiscard]] ParamVector vector_at(int iter, int total, double extent) const;
};

struct LossWeights {
  double depth = 0.01;
  double normal_smooth = 0.1;
  double multiview = 0.1;
  double scp = 0.01;
};

struct DensifySettings {
  int interval = 100;
  int start = 500;
  int stop = 15000;
  double grad_threshold = 2e-4;
  double prune_opacity = 0.005;
  std::size_t min_gaussians = 16;
  std::size_t max_gaussians = 200000;
  double percent_dense = 0.01;  ///< clone/split boundary, fraction of the scene extent
  double split_factor = 1.6;
};

struct ConstraintFlags {
  bool prior = true;
  bool scp = true;
  bool remove = true;
  bool project = true;
  bool remove_unobserved = false;
  bool literal_projection = false;
};

struct TrainConfig {
  int iterations = 30000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-15;
  LearningRates lr;
  LossWeights weights;
  DensifySettings densify;
  int scp_start = 10000;
  BandSchedule schedule;
  ConstraintFlags flags;
  double rgb_beta = 0.2;
  double valid_alpha = 0.5;
  bool use_ncc = true;
  int neighbors = 2;
  double planar_weight = 1.0;
  double planar_ratio = 0.1;
  int grid_resolution = kDefaultGridResolution;
  double truncation_voxels = kDefaultTruncationVoxels;
  RenderOptions render;
  std::uint64_t seed = 0;

  /// 30000 iterations, prior at 5000/10000/15000, L_SCP from 10000.
  static TrainConfig full_scale();
  /// 3000 iterations, prior at 1000/1500/2000, L_SCP from 1500.
  static TrainConfig desk_defaults();

  void validate() const;
};

/// Overrides fields of `base` from the [train], [lr], [loss], [densify], [prior]
/// and [render] sections.
TrainConfig train_config_from(const Config& config, TrainConfig base);

struct LossTerms {
  double rgb = 0.0;
  double depth = 0.0;
  double normal_smooth = 0.0;
  double multiview = 0.0;
  double scp = 0.0;
};

/// L_RGB + w.depth L_Depth + w.normal_smooth L_NS + w.multiview L_NM + w.scp L_SCP,
/// with the last term dropped when `scp_active` is false. Throws TrainingError
/// naming the first non-finite component.
double total_loss(const LossTerms& terms, const LossWeights& weights, bool scp_active);

/// Penalty mean_j (ls_min - ls_mid - log(ratio))^2 on sorted log-scales; adds
/// `weight` times its gradient into the log-scale rows of `grads`.
double planarity_penalty(std::span<const Gaussian> gaussians, double ratio, double weight,
                         std::vector<ParamVector>* grads);

struct AdamState {
  std::vector<ParamVector> m;
  std::vector<ParamVector> v;
  std::int64_t step = 0;
  std::size_t skipped = 0;  ///< non-finite gradient entries ignored so far

  void resize(std::size_t n);
  /// Rebuilds rows; source[i] is the old row of new row i or -1 for zero moments.
  void remap(std::span<const std::int64_t> source);
};

/// One bias-corrected Adam step over all parameters with per-entry learning
/// rates. Non-finite gradient entries leave their parameter and moments
/// untouched. Quaternions are renormalized and colors clamped to [0, 1].
void adam_step(std::vector<Gaussian>& gaussians, std::span<const ParamVector> grads,
               AdamState& state, const ParamVector& lr, double beta1, double beta2, double eps);

struct DensifyStats {
  std::size_t cloned = 0;
  std::size_t split = 0;
  std::size_t pruned = 0;
};

struct DensifyResult {
  std::vector<std::int64_t> source;  ///< old index per new Gaussian, -1 for new children
  DensifyStats stats;
};

/// Clones small and splits large Gaussians whose mean screen-space gradient
/// exceeds the threshold, then prunes low-opacity ones down to the floor.
DensifyResult densify(std::vector<Gaussian>& gaussians, std::span<const double> grad_sum,
                      std::span<const int> grad_count, const DensifySettings& settings,
                      double extent, std::mt19937_64& rng);

struct TraceRow {
  int iter = 0;
  double l_rgb = 0.0, l_depth = 0.0, l_ns = 0.0, l_nm = 0.0, l_scp = 0.0, total = 0.0;
  std::size_t num_gaussians = 0;
};

struct PriorLogEntry {
  int iter = 0;
  double sigma = 0.0;
  double truncation = 0.0;
  std::size_t observed_voxels = 0;

  [[nodiscard]] std::string line() const;
};

struct OpCounters {
  std::size_t prior_updates = 0;
  std::size_t classify_calls = 0;
  std::size_t remove_calls = 0;
  std::size_t project_calls = 0;
  std::size_t scp_evaluations = 0;

  [[nodiscard]] std::size_t prior_total() const {
    return prior_updates + classify_calls + remove_calls + project_calls + scp_evaluations;
  }
};

struct TrainResult {
  std::vector<Gaussian> gaussians;
  AdamState adam;
  std::vector<TraceRow> trace;
  std::vector<PriorLogEntry> prior_log;
  std::vector<RemovalReport> removals;
  OpCounters counters;
  std::optional<TsdfGrid> prior;
  int iterations_run = 0;
};

struct TrainIo {
  std::filesystem::path checkpoint_dir;  ///< empty disables checkpoints
  int checkpoint_interval = 0;
  std::ostream* log = nullptr;  ///< progress lines
  int log_interval = 500;
};

/// Runs the optimization loop over the given views. Requires at least 2 views.
TrainResult train(std::span<const CameraView> views, const Aabb& scene_bounds,
                  std::vector<Gaussian> gaussians, const TrainConfig& config,
                  const TrainIo& io = {});

/// Indices of the `count` cameras closest to camera `index` by center distance.
std::vector<int> nearest_cameras(std::span<const CameraView> views, int index, int count);

void write_trace_csv(const std::filesystem::path& path, std::span<const TraceRow> trace);
std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path);

/// Binary container: magic "SPCK", u32 version, i32 iteration, u64 count,
/// parameters, then Adam moments and step.
void save_checkpoint(const std::filesystem::path& path, std::span<const Gaussian> gaussians,
                     const AdamState& adam, int iter);

struct Checkpoint {
  std::vector<Gaussian> gaussians;
  AdamState adam;
  int iter = 0;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace splatprior

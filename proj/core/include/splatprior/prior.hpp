#pragma once

#include "splatprior/renderer.hpp"
#include "splatprior/tsdf.hpp"

#include <optional>
#include <span>

namespace splatprior {

inline constexpr int kDefaultGridResolution = 128;
inline constexpr double kDefaultGridPadding = 0.05;
inline constexpr double kDefaultTruncationVoxels = 4.0;

/// Grid layout and base truncation of the self-constrained prior.
struct PriorSettings {
  GridSpec spec;
  double base_truncation = 0.0;  ///< world units, scaled by sigma at each rebuild
  double valid_alpha = 0.5;
  RenderOptions render;

  /// 128^3 cubic voxels over `scene_box` padded by 5%, truncation 4 voxels.
  static PriorSettings for_scene(const Aabb& scene_box, int resolution = kDefaultGridResolution,
                                 double truncation_voxels = kDefaultTruncationVoxels);
};

struct PriorUpdate {
  TsdfGrid grid;
  double sigma = 1.0;
  int iter = 0;
};

/// Rebuilds the prior from depth rendered with the current Gaussians when the
/// schedule fires at `iter`; records the iteration in `schedule.last_update_iter`.
std::optional<PriorUpdate> maybe_update_prior(BandSchedule& schedule, int iter,
                                              std::span<const Gaussian> gaussians,
                                              std::span<const Camera> cameras,
                                              const PriorSettings& settings);

}  // namespace splatprior

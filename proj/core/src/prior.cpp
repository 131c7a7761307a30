#include "splatprior/prior.hpp"

namespace splatprior {

PriorSettings PriorSettings::for_scene(const Aabb& scene_box, int resolution,
                                       double truncation_voxels) {
  PriorSettings s;
  s.spec = GridSpec::covering(scene_box.padded(kDefaultGridPadding), resolution);
  s.base_truncation = truncation_voxels * s.spec.voxel_size;
  return s;
}

std::optional<PriorUpdate> maybe_update_prior(BandSchedule& schedule, int iter,
                                              std::span<const Gaussian> gaussians,
                                              std::span<const Camera> cameras,
                                              const PriorSettings& settings) {
  schedule.validate();
  const std::optional<double> sigma = schedule.sigma_at(iter);
  if (!sigma) return std::nullopt;
  const std::vector<DepthMap> depths =
      render_depth_maps(gaussians, cameras, settings.render, settings.valid_alpha);
  PriorUpdate up;
  up.grid = fuse_depth_maps(cameras, depths, settings.spec, settings.base_truncation * *sigma);
  up.sigma = *sigma;
  up.iter = iter;
  schedule.last_update_iter = iter;
  return up;
}

}  // namespace splatprior

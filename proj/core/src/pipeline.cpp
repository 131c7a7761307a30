#include "splatprior/pipeline.hpp"

#include "splatprior/prior.hpp"

#include <limits>

namespace splatprior {

SurfaceReport evaluate_depths(const AnalyticScene& scene, std::span<const Camera> cameras,
                              std::span<const DepthMap> depths, const SurfaceSettings& s) {
  const PriorSettings ps =
      PriorSettings::for_scene(scene.bounds, s.grid_resolution, s.truncation_voxels);
  SurfaceReport rep;
  rep.grid = fuse_depth_maps(cameras, depths, ps.spec, ps.base_truncation);
  rep.voxel_size = ps.spec.voxel_size;
  rep.mesh = extract_mesh(rep.grid);
  if (rep.mesh.empty()) {
    rep.chamfer = std::numeric_limits<double>::infinity();
  } else {
    const std::vector<Vec3> gt = chamfer_pointcloud(scene, s.gt_samples, s.seed + 1);
    rep.chamfer = chamfer_l1(rep.mesh, gt, s.mesh_samples, s.seed + 2);
  }
  return rep;
}

SurfaceReport evaluate_gaussians(const AnalyticScene& scene, std::span<const CameraView> views,
                                 std::span<const Gaussian> gaussians, const SurfaceSettings& s) {
  std::vector<Camera> cams;
  std::vector<DepthMap> depths;
  double psnr_sum = 0.0;
  for (const CameraView& v : views) {
    const RenderOutput r = render_view(gaussians, v.camera, s.render);
    cams.push_back(v.camera);
    depths.push_back(to_depth_map(r, s.valid_alpha));
    psnr_sum += psnr(r.rgb, v.gt_rgb);
  }
  SurfaceReport rep = evaluate_depths(scene, cams, depths, s);
  rep.mean_psnr = views.empty() ? 0.0 : psnr_sum / static_cast<double>(views.size());
  return rep;
}

}  // namespace splatprior

#pragma once

#include "splatprior/eval.hpp"
#include "splatprior/renderer.hpp"
#include "splatprior/scenes.hpp"
#include "splatprior/tsdf.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace splatprior {

struct SurfaceSettings {
  int grid_resolution = 128;
  double truncation_voxels = 4.0;
  double valid_alpha = 0.5;
  int gt_samples = 20000;
  std::size_t mesh_samples = kMeshChamferSamples;
  std::uint64_t seed = 0;
  RenderOptions render;
};

struct SurfaceReport {
  TsdfGrid grid;
  TriangleMesh mesh;
  double chamfer = 0.0;  ///< +inf when the mesh is empty
  double voxel_size = 0.0;
  double mean_psnr = 0.0;
};

/// Fuses depth maps into a grid over the padded scene bounds, extracts the mesh
/// and measures Chamfer-L1 against area-uniform samples of the analytic surface.
SurfaceReport evaluate_depths(const AnalyticScene& scene, std::span<const Camera> cameras,
                              std::span<const DepthMap> depths, const SurfaceSettings& settings);

/// Renders the Gaussians from every view, then evaluates as above and adds the mean PSNR.
SurfaceReport evaluate_gaussians(const AnalyticScene& scene, std::span<const CameraView> views,
                                 std::span<const Gaussian> gaussians,
                                 const SurfaceSettings& settings);

}  // namespace splatprior

#pragma once

#include "splatprior/core.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace splatprior {

struct RenderOptions {
  double near = 0.01;
  double far = 100.0;
  /// Footprint radius in standard deviations.
  double cutoff_sigma = 3.0;
  double alpha_max = 0.999;
  /// Blending stops once transmittance drops below this; 0 disables.
  double min_transmittance = 1e-4;
  int tile_size = 8;
};

/// One Gaussian's contribution to one pixel.
struct BlendRecord {
  int gaussian = 0;
  double weight = 0.0;    ///< blend weight (alpha times transmittance)
  double depth = 0.0;     ///< camera depth of the ray-plane intersection
  double response = 0.0;  ///< Gaussian density at the intersection
  double alpha = 0.0;     ///< opacity times response, after clamping
  bool clamped = false;
};

struct RenderOutput {
  int width = 0;
  int height = 0;
  Raster<double> rgb;          ///< 3 channels
  Raster<double> depth;        ///< alpha-normalized blended depth
  Raster<double> normal;       ///< 3 channels, camera frame, unit length or zero
  Raster<double> alpha;        ///< accumulated weight
  Raster<double> normal_norm;  ///< length of the blended normal before normalization
  std::vector<std::size_t> offsets;  ///< per-pixel ranges into records (size W*H + 1)
  std::vector<BlendRecord> records;  ///< sorted by depth within each pixel

  [[nodiscard]] std::span<const BlendRecord> records_at(int x, int y) const {
    const std::size_t p = static_cast<std::size_t>(y) * width + x;
    return {records.data() + offsets[p], offsets[p + 1] - offsets[p]};
  }
  [[nodiscard]] std::size_t record_offset(int x, int y) const {
    return offsets[static_cast<std::size_t>(y) * width + x];
  }
};

/// Renders RGB, depth, normal and alpha maps by front-to-back blending of
/// ray-plane intersections. Throws InvalidInput for an empty set or near >= far.
RenderOutput render_view(std::span<const Gaussian> gaussians, const Camera& camera,
                         const RenderOptions& options = {});

/// Upstream gradients of a scalar loss with respect to a RenderOutput.
struct RenderGrad {
  Raster<double> rgb;
  Raster<double> depth;
  Raster<double> normal;
  Raster<double> alpha;
  std::vector<double> record_weight;  ///< direct dL/d(weight) per record
  std::vector<double> record_depth;   ///< direct dL/d(depth) per record

  RenderGrad() = default;
  explicit RenderGrad(const RenderOutput& render);
};

/// Reverse pass through the blending recurrence and ray-plane geometry.
/// Returns one gradient row per Gaussian (see kCenterOffset etc.).
std::vector<ParamVector> render_backward(std::span<const Gaussian> gaussians,
                                         const Camera& camera, const RenderOutput& render,
                                         const RenderGrad& grad,
                                         const RenderOptions& options = {});

/// View-space positional gradient magnitude used by densification.
double screen_space_gradient(const Camera& camera, const Gaussian& g, const ParamVector& grad);

/// Depth map with pixels of accumulated alpha <= valid_alpha marked invalid (0).
DepthMap to_depth_map(const RenderOutput& render, double valid_alpha = 0.5);

std::vector<DepthMap> render_depth_maps(std::span<const Gaussian> gaussians,
                                        std::span<const Camera> cameras,
                                        const RenderOptions& options, double valid_alpha = 0.5);

}  // namespace splatprior

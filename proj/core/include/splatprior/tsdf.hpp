#pragma once

#include "splatprior/core.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace splatprior {

/// Regular grid layout. Voxel (i, j, k) is centered at origin + voxel_size * (i, j, k).
struct GridSpec {
  Vec3 origin = Vec3::Zero();
  double voxel_size = 0.0;
  std::array<int, 3> dims{0, 0, 0};

  /// Cubic voxels spanning `box` with `resolution` samples along its longest axis.
  static GridSpec covering(const Aabb& box, int resolution);

  [[nodiscard]] std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  [[nodiscard]] std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(j) +
                                                static_cast<std::size_t>(dims[1]) * k);
  }
  [[nodiscard]] Vec3 voxel_center(int i, int j, int k) const {
    return origin + voxel_size * Vec3(i, j, k);
  }
  [[nodiscard]] Vec3 upper_corner() const {
    return origin + voxel_size * Vec3(dims[0] - 1, dims[1] - 1, dims[2] - 1);
  }
  /// Throws InvalidInput for a non-positive voxel size or fewer than 2 samples per axis.
  void validate() const;
};

/// Normalized truncated signed distance grid. Unobserved voxels hold
/// (value = +1, weight = 0). Values are stored as f32 to match the on-disk format.
struct TsdfGrid {
  GridSpec spec;
  double truncation = 0.0;  ///< metric truncation distance, world units
  std::vector<float> values;
  std::vector<float> weights;

  TsdfGrid() = default;
  TsdfGrid(const GridSpec& spec, double truncation);

  [[nodiscard]] float value(int i, int j, int k) const { return values[spec.index(i, j, k)]; }
  [[nodiscard]] float weight(int i, int j, int k) const { return weights[spec.index(i, j, k)]; }
};

/// Fuses depth maps (one per camera) into a TSDF with metric truncation `truncation`.
/// Contributions deeper than -truncation behind the observed surface are skipped.
TsdfGrid fuse_depth_maps(std::span<const Camera> cameras, std::span<const DepthMap> depths,
                         const GridSpec& spec, double truncation);

struct GridSample {
  double value = 1.0;
  bool inside = false;    ///< within the sampled extent of the grid
  bool observed = false;  ///< at least one of the 8 support voxels has weight > 0
};

/// Trilinear interpolation of the normalized field; +1 outside the grid.
double sample_trilinear(const TsdfGrid& grid, const Vec3& x);
GridSample sample_with_support(const TsdfGrid& grid, const Vec3& x);

inline constexpr double kGradientStep = 1e-4;

/// Central-difference gradient of the interpolated field. Returns nullopt when
/// x is closer than eps + one voxel to the grid boundary.
std::optional<Vec3> gradient_fd(const TsdfGrid& grid, const Vec3& x, double eps = kGradientStep);

/// When the prior is rebuilt and which band scale each rebuild uses.
struct BandSchedule {
  int first_update = 5000;
  int update_interval = 5000;
  int stop_iter = 20000;
  std::vector<double> sigma_sequence{1.0, 0.5, 0.25};
  double delta = 0.3;
  /// Replaces every scheduled sigma (fixed-bandwidth ablation).
  std::optional<double> fixed_sigma;
  int last_update_iter = -1;

  void validate() const;
  /// Band scale of the rebuild firing at `iter`, or nullopt if none fires.
  [[nodiscard]] std::optional<double> sigma_at(int iter) const;
};

}  // namespace splatprior

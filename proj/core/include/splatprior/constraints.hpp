#pragma once

#include "splatprior/core.hpp"
#include "splatprior/tsdf.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace splatprior {

enum class BandRegion { OnSurface, OffSurface, Outside, Unobserved };

const char* to_string(BandRegion r);

struct BandLabel {
  BandRegion region = BandRegion::Outside;
  double s = 1.0;  ///< interpolated normalized sdf at the center
};

inline constexpr double kOutsideTolerance = 1e-6;

BandLabel classify(const TsdfGrid& grid, double delta, const Gaussian& g);
std::vector<BandLabel> classify_all(const TsdfGrid& grid, double delta,
                                    std::span<const Gaussian> gaussians);

struct RemovalReport {
  int iter = 0;
  std::vector<std::size_t> removed;  ///< indices into the input collection
  std::size_t on = 0, off = 0, outside = 0, unobserved = 0;

  /// `iter=<n> removed=<k> on=<a> off=<b> outside=<c> unobserved=<d>`
  [[nodiscard]] std::string line() const;
};

struct RemovalResult {
  std::vector<Gaussian> retained;
  std::vector<std::size_t> kept;  ///< input index of each retained Gaussian
  RemovalReport report;
};

/// Drops Gaussians labeled Outside, and Unobserved ones when `remove_unobserved`.
RemovalResult remove_outliers(std::span<const Gaussian> gaussians, const TsdfGrid& grid,
                              double delta, bool remove_unobserved = false);

enum class ProjectionRule {
  Metric,   ///< mu -= s * T * grad / |grad|
  Literal,  ///< mu -= s * grad
};

struct ProjectionStats {
  std::size_t moved = 0;
  std::size_t skipped = 0;  ///< in band but no usable gradient
};

/// Moves every in-band Gaussian center toward the zero level set in place.
ProjectionStats project_to_surface(std::span<Gaussian> gaussians, const TsdfGrid& grid,
                                   ProjectionRule rule = ProjectionRule::Metric);

struct ScpLoss {
  double value = 0.0;
  std::vector<double> grad_logit;  ///< dL/d(opacity_logit) per Gaussian
};

/// Opacity loss over on/off-surface Gaussians, normalized by the total count.
ScpLoss scp_loss(std::span<const Gaussian> gaussians, std::span<const BandLabel> labels);

}  // namespace splatprior

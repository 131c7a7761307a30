#include "splatprior/constraints.hpp"

#include <cmath>
#include <sstream>

namespace splatprior {

const char* to_string(BandRegion r) {
  switch (r) {
    case BandRegion::OnSurface: return "on";
    case BandRegion::OffSurface: return "off";
    case BandRegion::Outside: return "outside";
    case BandRegion::Unobserved: return "unobserved";
  }
  return "?";
}

BandLabel classify(const TsdfGrid& grid, double delta, const Gaussian& g) {
  const GridSample smp = sample_with_support(grid, g.center);
  BandLabel label;
  label.s = smp.value;
  const double a = std::abs(smp.value);
  if (smp.inside && !smp.observed) {
    label.region = BandRegion::Unobserved;
  } else if (a >= 1.0 - kOutsideTolerance) {
    label.region = BandRegion::Outside;
  } else if (a <= delta) {
    label.region = BandRegion::OnSurface;
  } else {
    label.region = BandRegion::OffSurface;
  }
  return label;
}

std::vector<BandLabel> classify_all(const TsdfGrid& grid, double delta,
                                    std::span<const Gaussian> gaussians) {
  std::vector<BandLabel> labels(gaussians.size());
  const auto n = static_cast<std::ptrdiff_t>(gaussians.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < n; ++j) labels[j] = classify(grid, delta, gaussians[j]);
  return labels;
}

std::string RemovalReport::line() const {
  std::ostringstream os;
  os << "iter=" << iter << " removed=" << removed.size() << " on=" << on << " off=" << off
     << " outside=" << outside << " unobserved=" << unobserved;
  return os.str();
}

RemovalResult remove_outliers(std::span<const Gaussian> gaussians, const TsdfGrid& grid,
                              double delta, bool remove_unobserved) {
  const std::vector<BandLabel> labels = classify_all(grid, delta, gaussians);
  RemovalResult out;
  out.retained.reserve(gaussians.size());
  out.kept.reserve(gaussians.size());
  for (std::size_t j = 0; j < gaussians.size(); ++j) {
    bool drop = false;
    switch (labels[j].region) {
      case BandRegion::OnSurface: ++out.report.on; break;
      case BandRegion::OffSurface: ++out.report.off; break;
      case BandRegion::Outside:
        ++out.report.outside;
        drop = true;
        break;
      case BandRegion::Unobserved:
        ++out.report.unobserved;
        drop = remove_unobserved;
        break;
    }
    if (drop) {
      out.report.removed.push_back(j);
    } else {
      out.retained.push_back(gaussians[j]);
      out.kept.push_back(j);
    }
  }
  return out;
}

ProjectionStats project_to_surface(std::span<Gaussian> gaussians, const TsdfGrid& grid,
                                   ProjectionRule rule) {
  std::size_t moved = 0, skipped = 0;
  const auto n = static_cast<std::ptrdiff_t>(gaussians.size());
#pragma omp parallel for schedule(static) reduction(+ : moved, skipped)
  for (std::ptrdiff_t j = 0; j < n; ++j) {
    Gaussian& g = gaussians[j];
    const double s = sample_trilinear(grid, g.center);
    if (!(std::abs(s) < 1.0)) continue;
    const std::optional<Vec3> grad = gradient_fd(grid, g.center);
    const double norm = grad ? grad->norm() : 0.0;
    if (!(norm > 1e-8)) {
      ++skipped;
      continue;
    }
    if (rule == ProjectionRule::Metric) {
      g.center -= (s * grid.truncation / norm) * *grad;
    } else {
      g.center -= s * *grad;
    }
    ++moved;
  }
  return {moved, skipped};
}

ScpLoss scp_loss(std::span<const Gaussian> gaussians, std::span<const BandLabel> labels) {
  if (gaussians.empty()) throw InvalidInput("scp_loss: no Gaussians");
  if (labels.size() != gaussians.size()) throw InvalidInput("scp_loss: label count mismatch");
  const double inv_m = 1.0 / static_cast<double>(gaussians.size());
  ScpLoss out;
  out.grad_logit.assign(gaussians.size(), 0.0);
  for (std::size_t j = 0; j < gaussians.size(); ++j) {
    const BandRegion r = labels[j].region;
    if (r != BandRegion::OnSurface && r != BandRegion::OffSurface) continue;
    const double e = 1.0 / ((1.0 + std::abs(labels[j].s)) * (1.0 + std::abs(labels[j].s)));
    const double o = gaussians[j].opacity();
    const double target = r == BandRegion::OnSurface ? 1.0 : 0.0;
    const double d = o - target;
    out.value += e * d * d * inv_m;
    out.grad_logit[j] = 2.0 * e * d * inv_m * o * (1.0 - o);
  }
  return out;
}

}  // namespace splatprior

#pragma once

#include "splatprior/core.hpp"
#include "splatprior/tsdf.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace splatprior::oracles {

// Per-view accumulation written view-major, independent of the library's loop order.
inline TsdfGrid brute_force_fusion(const std::vector<Camera>& cams, const std::vector<DepthMap>& depths,
                            const GridSpec& spec, double trunc) {
  const std::size_t n = spec.voxel_count();
  std::vector<double> sum(n, 0.0), count(n, 0.0);
  for (std::size_t v = 0; v < cams.size(); ++v) {
    const Camera& c = cams[v];
    for (int k = 0; k < spec.dims[2]; ++k)
      for (int j = 0; j < spec.dims[1]; ++j)
        for (int i = 0; i < spec.dims[0]; ++i) {
          const double px = spec.origin.x() + spec.voxel_size * i;
          const double py = spec.origin.y() + spec.voxel_size * j;
          const double pz = spec.origin.z() + spec.voxel_size * k;
          const Mat3& r = c.rotation;
          const double z = r(2, 0) * px + r(2, 1) * py + r(2, 2) * pz + c.translation.z();
          if (z <= 0.0) continue;
          const double x = r(0, 0) * px + r(0, 1) * py + r(0, 2) * pz + c.translation.x();
          const double y = r(1, 0) * px + r(1, 1) * py + r(1, 2) * pz + c.translation.y();
          const long u = std::lround(std::floor(c.intrinsics.fx * x / z + c.intrinsics.cx + 0.5));
          const long w = std::lround(std::floor(c.intrinsics.fy * y / z + c.intrinsics.cy + 0.5));
          if (u < 0 || w < 0 || u >= c.width || w >= c.height) continue;
          const float d = depths[v](static_cast<int>(u), static_cast<int>(w));
          if (!(d > 0.0f) || !std::isfinite(d)) continue;
          const double sdf = static_cast<double>(d) - z;
          if (sdf < -trunc) continue;
          sum[spec.index(i, j, k)] += std::min(1.0, std::max(-1.0, sdf * (1.0 / trunc)));
          count[spec.index(i, j, k)] += 1.0;
        }
  }
  TsdfGrid g(spec, trunc);
  for (std::size_t i = 0; i < n; ++i) {
    if (count[i] > 0.0) {
      g.values[i] = static_cast<float>(sum[i] / count[i]);
      g.weights[i] = static_cast<float>(count[i]);
    }
  }
  return g;
}

struct CellPoly {
  double a[8];
  double eval(double x, double y, double z) const {
    return a[0] + a[1] * x + a[2] * y + a[3] * z + a[4] * x * y + a[5] * x * z + a[6] * y * z +
           a[7] * x * y * z;
  }
  Vec3 grad(double x, double y, double z) const {
    return {a[1] + a[4] * y + a[5] * z + a[7] * y * z, a[2] + a[4] * x + a[6] * z + a[7] * x * z,
            a[3] + a[5] * x + a[6] * y + a[7] * x * y};
  }
};

inline CellPoly cell_poly(const TsdfGrid& g, int i, int j, int k) {
  const auto c = [&](int a, int b, int d) { return static_cast<double>(g.value(i + a, j + b, k + d)); };
  CellPoly p;
  p.a[0] = c(0, 0, 0);
  p.a[1] = c(1, 0, 0) - c(0, 0, 0);
  p.a[2] = c(0, 1, 0) - c(0, 0, 0);
  p.a[3] = c(0, 0, 1) - c(0, 0, 0);
  p.a[4] = c(1, 1, 0) - c(1, 0, 0) - c(0, 1, 0) + c(0, 0, 0);
  p.a[5] = c(1, 0, 1) - c(1, 0, 0) - c(0, 0, 1) + c(0, 0, 0);
  p.a[6] = c(0, 1, 1) - c(0, 1, 0) - c(0, 0, 1) + c(0, 0, 0);
  p.a[7] = c(1, 1, 1) - c(0, 1, 1) - c(1, 0, 1) - c(1, 1, 0) + c(1, 0, 0) + c(0, 1, 0) +
           c(0, 0, 1) - c(0, 0, 0);
  return p;
}

/// Exact clamped sphere distance sampled on a fully observed grid over `box`.
inline TsdfGrid analytic_sphere_grid(const Aabb& box, int res, double radius,
                                     double trunc_voxels) {
  const GridSpec spec = GridSpec::covering(box, res);
  TsdfGrid g(spec, trunc_voxels * spec.voxel_size);
  for (int k = 0; k < spec.dims[2]; ++k)
    for (int j = 0; j < spec.dims[1]; ++j)
      for (int i = 0; i < spec.dims[0]; ++i) {
        const double sdf = spec.voxel_center(i, j, k).norm() - radius;
        g.values[spec.index(i, j, k)] =
            static_cast<float>(std::clamp(sdf / g.truncation, -1.0, 1.0));
        g.weights[spec.index(i, j, k)] = 1.0f;
      }
  return g;
}

}  // namespace splatprior::oracles

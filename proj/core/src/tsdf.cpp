#include "splatprior/tsdf.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace splatprior {

GridSpec GridSpec::covering(const Aabb& box, int resolution) {
  if (resolution < 2) throw InvalidInput("GridSpec: resolution must be >= 2");
  const Vec3 ext = box.extent();
  const double longest = ext.maxCoeff();
  if (!(longest > 0.0)) throw InvalidInput("GridSpec: bounding box has zero extent");
  GridSpec spec;
  spec.voxel_size = longest / (resolution - 1);
  for (int a = 0; a < 3; ++a) {
    spec.dims[a] = std::max(2, static_cast<int>(std::ceil(ext[a] / spec.voxel_size - 1e-9)) + 1);
  }
  const Vec3 span(spec.dims[0] - 1, spec.dims[1] - 1, spec.dims[2] - 1);
  spec.origin = box.center() - 0.5 * spec.voxel_size * span;
  return spec;
}

void GridSpec::validate() const {
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
    throw InvalidInput("GridSpec: voxel size must be positive");
  }
  for (int d : dims) {
    if (d < 2) throw InvalidInput("GridSpec: every axis needs at least 2 samples");
  }
}

TsdfGrid::TsdfGrid(const GridSpec& s, double trunc)
    : spec(s), truncation(trunc), values(s.voxel_count(), 1.0f), weights(s.voxel_count(), 0.0f) {}

TsdfGrid fuse_depth_maps(std::span<const Camera> cameras, std::span<const DepthMap> depths,
                         const GridSpec& spec, double truncation) {
  if (cameras.empty()) throw InvalidInput("fuse_depth_maps: no views");
  if (cameras.size() != depths.size()) {
    throw InvalidInput("fuse_depth_maps: camera and depth counts differ");
  }
  spec.validate();
  if (!(truncation > 0.0)) throw InvalidInput("fuse_depth_maps: truncation must be positive");
  for (std::size_t v = 0; v < cameras.size(); ++v) {
    if (depths[v].width != cameras[v].width || depths[v].height != cameras[v].height) {
      throw InvalidInput("fuse_depth_maps: depth map " + std::to_string(v) +
                         " does not match its camera size");
    }
  }

  TsdfGrid grid(spec, truncation);
  const int nx = spec.dims[0], ny = spec.dims[1], nz = spec.dims[2];
  const double inv_trunc = 1.0 / truncation;

#pragma omp parallel for schedule(static)
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const double px = spec.origin.x() + spec.voxel_size * i;
        const double py = spec.origin.y() + spec.voxel_size * j;
        const double pz = spec.origin.z() + spec.voxel_size * k;
        double sum = 0.0;
        double count = 0.0;
        for (std::size_t v = 0; v < cameras.size(); ++v) {
          const Camera& cam = cameras[v];
          const Mat3& r = cam.rotation;
          const Vec3& t = cam.translation;
          const double cz = r(2, 0) * px + r(2, 1) * py + r(2, 2) * pz + t.z();
          if (!(cz > 0.0)) continue;
          const double cx = r(0, 0) * px + r(0, 1) * py + r(0, 2) * pz + t.x();
          const double cy = r(1, 0) * px + r(1, 1) * py + r(1, 2) * pz + t.y();
          const double u = cam.intrinsics.fx * cx / cz + cam.intrinsics.cx;
          const double w = cam.intrinsics.fy * cy / cz + cam.intrinsics.cy;
          const double ui = std::floor(u + 0.5);
          const double vi = std::floor(w + 0.5);
          if (ui < 0.0 || vi < 0.0 || ui >= cam.width || vi >= cam.height) continue;
          const float d = depths[v](static_cast<int>(ui), static_cast<int>(vi));
          if (!depth_valid(d)) continue;
          const double sdf = static_cast<double>(d) - cz;
          if (sdf < -truncation) continue;
          sum += std::clamp(sdf * inv_trunc, -1.0, 1.0);
          count += 1.0;
        }
        const std::size_t idx = spec.index(i, j, k);
        if (count > 0.0) {
          grid.values[idx] = static_cast<float>(sum / count);
          grid.weights[idx] = static_cast<float>(count);
        }
      }
    }
  }
  return grid;
}

namespace {

struct Cell {
  int i, j, k;
  double tx, ty, tz;
};

// Locates the cell containing x. Returns false outside [origin, upper corner].
bool locate(const GridSpec& spec, const Vec3& x, Cell& cell) {
  const Vec3 g = (x - spec.origin) / spec.voxel_size;
  int idx[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    if (!(g[a] >= 0.0) || g[a] > spec.dims[a] - 1) return false;
    idx[a] = std::min(static_cast<int>(std::floor(g[a])), spec.dims[a] - 2);
    frac[a] = g[a] - idx[a];
  }
  cell = {idx[0], idx[1], idx[2], frac[0], frac[1], frac[2]};
  return true;
}

double blend(const TsdfGrid& grid, const Cell& c) {
  const auto v = [&](int di, int dj, int dk) {
    return static_cast<double>(grid.value(c.i + di, c.j + dj, c.k + dk));
  };
  const double c00 = v(0, 0, 0) * (1 - c.tx) + v(1, 0, 0) * c.tx;
  const double c10 = v(0, 1, 0) * (1 - c.tx) + v(1, 1, 0) * c.tx;
  const double c01 = v(0, 0, 1) * (1 - c.tx) + v(1, 0, 1) * c.tx;
  const double c11 = v(0, 1, 1) * (1 - c.tx) + v(1, 1, 1) * c.tx;
  const double c0 = c00 * (1 - c.ty) + c10 * c.ty;
  const double c1 = c01 * (1 - c.ty) + c11 * c.ty;
  return c0 * (1 - c.tz) + c1 * c.tz;
}

}  // namespace

double sample_trilinear(const TsdfGrid& grid, const Vec3& x) {
  Cell c;
  if (!locate(grid.spec, x, c)) return 1.0;
  return blend(grid, c);
}

GridSample sample_with_support(const TsdfGrid& grid, const Vec3& x) {
  Cell c;
  GridSample s;
  if (!locate(grid.spec, x, c)) return s;
  s.inside = true;
  s.value = blend(grid, c);
  for (int dk = 0; dk < 2 && !s.observed; ++dk)
    for (int dj = 0; dj < 2 && !s.observed; ++dj)
      for (int di = 0; di < 2; ++di)
        if (grid.weight(c.i + di, c.j + dj, c.k + dk) > 0.0f) {
          s.observed = true;
          break;
        }
  return s;
}

std::optional<Vec3> gradient_fd(const TsdfGrid& grid, const Vec3& x, double eps) {
  const double margin = eps + grid.spec.voxel_size;
  const Vec3 lo = grid.spec.origin.array() + margin;
  const Vec3 hi = grid.spec.upper_corner().array() - margin;
  if (!((x.array() >= lo.array()).all() && (x.array() <= hi.array()).all())) return std::nullopt;
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    Vec3 xp = x, xm = x;
    xp[a] += eps;
    xm[a] -= eps;
    g[a] = (sample_trilinear(grid, xp) - sample_trilinear(grid, xm)) / (2.0 * eps);
  }
  return g;
}

void BandSchedule::validate() const {
  if (update_interval <= 0) throw InvalidInput("BandSchedule: update interval must be positive");
  if (first_update <= 0) throw InvalidInput("BandSchedule: first update must be positive");
  if (sigma_sequence.empty()) throw InvalidInput("BandSchedule: empty sigma sequence");
  for (std::size_t i = 0; i < sigma_sequence.size(); ++i) {
    if (!(sigma_sequence[i] > 0.0)) throw InvalidInput("BandSchedule: sigma must be positive");
    if (i > 0 && !(sigma_sequence[i] < sigma_sequence[i - 1])) {
      throw InvalidInput("BandSchedule: sigma sequence must be strictly decreasing");
    }
  }
  if (fixed_sigma && !(*fixed_sigma > 0.0)) {
    throw InvalidInput("BandSchedule: fixed sigma must be positive");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidInput("BandSchedule: delta must lie in (0, 1)");
}

std::optional<double> BandSchedule::sigma_at(int iter) const {
  if (iter < first_update || iter > stop_iter) return std::nullopt;
  if ((iter - first_update) % update_interval != 0) return std::nullopt;
  const auto k = static_cast<std::size_t>((iter - first_update) / update_interval);
  if (k >= sigma_sequence.size()) return std::nullopt;
  return fixed_sigma.value_or(sigma_sequence[k]);
}

}  // namespace splatprior

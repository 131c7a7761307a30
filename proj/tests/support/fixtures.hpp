#pragma once

#include "splatprior/core.hpp"
#include "splatprior/renderer.hpp"


#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace splatprior::fixtures {

inline Camera small_camera(const Vec3& eye, int size = 8) {
  Intrinsics k;
  k.fx = k.fy = 1.1 * size;
  k.cx = k.cy = 0.5 * (size - 1);
  return look_at(eye, Vec3::Zero(), Vec3(0, 1, 0), k, size, size);
}

/// An 8x8 camera's intrinsics on a 16x16 sensor, so 7x7 patches warped from an
/// 8x8 reference stay inside the image.
inline Camera wide_neighbor(const Vec3& eye) {
  Camera cam = small_camera(eye);
  cam.width = cam.height = 16;
  cam.intrinsics.cx += 4.0;
  cam.intrinsics.cy += 4.0;
  return cam;
}

/// Five broad, mostly camera-facing planar Gaussians between the origin and a
/// camera on the -z axis, opaque enough that every pixel is covered.
inline std::vector<Gaussian> five_gaussians(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Gaussian> gs;
  for (int i = 0; i < 5; ++i) {
    Gaussian g;
    g.center = Vec3(0.25 * u(rng), 0.25 * u(rng), -0.6 + 0.3 * i + 0.05 * u(rng));
    g.log_scale = Vec3(std::log(1.1 + 0.2 * u(rng)), std::log(1.0 + 0.2 * u(rng)), std::log(0.02));
    g.rotation = quat_multiply(quat_from_axis_angle(Vec3(u(rng), u(rng), 0.2).normalized(),
                                                    0.35 * u(rng)),
                               quat_from_axis_angle(Vec3::UnitZ(), u(rng)));
    g.opacity_logit = 0.6 + 0.4 * u(rng);
    g.color = Vec3(0.5 + 0.4 * u(rng), 0.5 + 0.4 * u(rng), 0.5 + 0.4 * u(rng));
    gs.push_back(g);
  }
  return gs;
}

inline ImageRGB smooth_texture(int w, int h, double phase) {
  ImageRGB img(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      img(x, y, 0) = 0.5 + 0.3 * std::sin(0.9 * x + phase) * std::cos(0.7 * y);
      img(x, y, 1) = 0.5 + 0.25 * std::cos(0.5 * x - 0.8 * y + phase);
      img(x, y, 2) = 0.4 + 0.2 * std::sin(0.3 * x * y + phase);
    }
  return img;
}

using ParamLoss = std::function<double(const std::vector<Gaussian>&)>;

/// Central differences over every parameter of every Gaussian.
inline std::vector<ParamVector> finite_difference(const std::vector<Gaussian>& gs,
                                                  const ParamLoss& loss, double h = 1e-6) {
  std::vector<ParamVector> out(gs.size(), ParamVector::Zero());
  for (std::size_t i = 0; i < gs.size(); ++i) {
    for (int p = 0; p < kParamCount; ++p) {
      std::vector<Gaussian> plus = gs, minus = gs;
      ParamVector a = gs[i].pack(), b = gs[i].pack();
      a[p] += h;
      b[p] -= h;
      plus[i] = Gaussian::unpack(a);
      minus[i] = Gaussian::unpack(b);
      out[i][p] = (loss(plus) - loss(minus)) / (2.0 * h);
    }
  }
  return out;
}

/// Largest entrywise |a - f| / (max(|a|, |f|) + floor).
inline double max_relative_error(const std::vector<ParamVector>& analytic,
                                 const std::vector<ParamVector>& numeric, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i)
    for (int p = 0; p < kParamCount; ++p) {
      const double a = analytic[i][p], f = numeric[i][p];
      worst = std::max(worst, std::abs(a - f) / (std::max(std::abs(a), std::abs(f)) + floor));
    }
  return worst;
}

inline double max_abs(const std::vector<ParamVector>& g) {
  double m = 0.0;
  for (const ParamVector& r : g) m = std::max(m, r.cwiseAbs().maxCoeff());
  return m;
}

}  // namespace splatprior::fixtures

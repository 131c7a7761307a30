#pragma once

#include "splatprior/losses.hpp"

#include <algorithm>
#include <cmath>

namespace splatprior::detail {

inline Vec3 pixel_ray(const Mat3& k_inv, double x, double y) { return k_inv * Vec3(x, y, 1.0); }

inline double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Gradient of (b0/b2, b1/b2) w.r.t. b given the gradient w.r.t. the pixel.
inline Vec3 dehomogenize_vjp(const Vec3& b, const Vec2& g) {
  const double inv = 1.0 / b.z();
  return {g.x() * inv, g.y() * inv, -(g.x() * b.x() + g.y() * b.y()) * inv * inv};
}

// Routes plane gradients at pixel (x, y) into the render's normal and depth maps.
// The plane is n = -normal(x, y), distance = depth * n . ray.
inline void plane_backward(const RenderOutput& r, const Mat3& k_inv, int x, int y, const Vec3& g_n,
                    double g_dist, RenderGrad& grad) {
  const Vec3 ray = pixel_ray(k_inv, x, y);
  const Vec3 n(-r.normal(x, y, 0), -r.normal(x, y, 1), -r.normal(x, y, 2));
  const double d = r.depth(x, y);
  const Vec3 g_n_total = g_n + g_dist * d * ray;
  for (int c = 0; c < 3; ++c) grad.normal(x, y, c) -= g_n_total[c];
  grad.depth(x, y) += g_dist * n.dot(ray);
}

struct Bilinear {
  int x0, y0;
  double fx, fy;
  [[nodiscard]] double w(int i) const {
    switch (i) {
      case 0: return (1 - fx) * (1 - fy);
      case 1: return fx * (1 - fy);
      case 2: return (1 - fx) * fy;
      default: return fx * fy;
    }
  }
  [[nodiscard]] int px(int i) const { return x0 + (i & 1); }
  [[nodiscard]] int py(int i) const { return y0 + (i >> 1); }
  // d w_i / d x and d w_i / d y
  [[nodiscard]] double dwx(int i) const {
    const double sy = (i >> 1) ? fy : 1 - fy;
    return (i & 1) ? sy : -sy;
  }
  [[nodiscard]] double dwy(int i) const {
    const double sx = (i & 1) ? fx : 1 - fx;
    return (i >> 1) ? sx : -sx;
  }
};

inline bool bilinear_at(const Vec2& p, int w, int h, Bilinear& b) {
  if (!(p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= w - 1 && p.y() <= h - 1)) return false;
  b.x0 = std::min(static_cast<int>(std::floor(p.x())), w - 2);
  b.y0 = std::min(static_cast<int>(std::floor(p.y())), h - 2);
  b.fx = p.x() - b.x0;
  b.fy = p.y() - b.y0;
  return true;
}

}  // namespace splatprior::detail

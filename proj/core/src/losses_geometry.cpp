#include "splatprior/losses.hpp"

#include "loss_detail.hpp"

#include <algorithm>
#include <cmath>

namespace splatprior {

using namespace detail;

Mask valid_mask(const RenderOutput& render, double valid_alpha) {
  Mask m(render.width, render.height);
  for (int y = 0; y < render.height; ++y)
    for (int x = 0; x < render.width; ++x)
      m(x, y) = render.alpha(x, y) > valid_alpha && render.normal_norm(x, y) > 1e-12;
  return m;
}

double depth_distortion(std::span<const double> weights, std::span<const double> depths) {
  double loss = 0.0;
  for (std::size_t u = 0; u < weights.size(); ++u) {
    for (std::size_t v = 0; v < u; ++v) {
      const double d = depths[u] - depths[v];
      loss += weights[u] * weights[v] * d * d;
    }
  }
  return loss;
}

double depth_distortion_loss(const RenderOutput& render, RenderGrad* grad, double scale) {
  const double inv_pixels = 1.0 / static_cast<double>(render.width * render.height);
  double total = 0.0;
  for (int y = 0; y < render.height; ++y) {
    for (int x = 0; x < render.width; ++x) {
      const auto recs = render.records_at(x, y);
      if (recs.size() < 2) continue;
      // sum_{u'<u} w w' (d - d')^2 = W*B - A^2 with moments taken about a shifted origin
      const double ref = recs.front().depth;
      double wsum = 0.0, a = 0.0, b = 0.0;
      for (const BlendRecord& r : recs) {
        const double d = r.depth - ref;
        wsum += r.weight;
        a += r.weight * d;
        b += r.weight * d * d;
      }
      total += wsum * b - a * a;
      if (grad) {
        const std::size_t base = render.record_offset(x, y);
        const double s = scale * inv_pixels;
        for (std::size_t u = 0; u < recs.size(); ++u) {
          const double d = recs[u].depth - ref;
          grad->record_weight[base + u] += s * (b + d * d * wsum - 2.0 * d * a);
          grad->record_depth[base + u] += s * 2.0 * recs[u].weight * (wsum * d - a);
        }
      }
    }
  }
  return total * inv_pixels;
}

DerivedNormals depth_to_normal(const Raster<double>& depth, const Mask& valid, const Intrinsics& k) {
  const int w = depth.width, h = depth.height;
  DerivedNormals out;
  out.normal = Raster<double>(w, h, 3);
  out.valid = Mask(w, h);
  out.x_lo = out.x_hi = out.y_lo = out.y_hi = Raster<int>(w, h);
  out.cross_norm = Raster<double>(w, h);
  const Mat3 k_inv = k.inverse();
  const auto ok = [&](int x, int y) { return x >= 0 && y >= 0 && x < w && y < h && valid(x, y); };
  const auto point = [&](int x, int y) -> Vec3 { return depth(x, y) * pixel_ray(k_inv, x, y); };

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!valid(x, y)) continue;
      const int xl = ok(x - 1, y) ? x - 1 : x, xh = ok(x + 1, y) ? x + 1 : x;
      const int yl = ok(x, y - 1) ? y - 1 : y, yh = ok(x, y + 1) ? y + 1 : y;
      if (xl == xh || yl == yh) continue;
      const Vec3 dx = point(xh, y) - point(xl, y);
      const Vec3 dy = point(x, yh) - point(x, yl);
      const Vec3 c = dy.cross(dx);
      const double cn = c.norm();
      if (!(cn > 1e-300)) continue;
      for (int ch = 0; ch < 3; ++ch) out.normal(x, y, ch) = c[ch] / cn;
      out.valid(x, y) = 1;
      out.x_lo(x, y) = xl;
      out.x_hi(x, y) = xh;
      out.y_lo(x, y) = yl;
      out.y_hi(x, y) = yh;
      out.cross_norm(x, y) = cn;
    }
  }
  return out;
}

void depth_to_normal_backward(const Raster<double>& depth, const DerivedNormals& derived,
                              const Intrinsics& k, const Raster<double>& grad_normal,
                              Raster<double>& grad_depth) {
  const Mat3 k_inv = k.inverse();
  const auto point = [&](int x, int y) -> Vec3 { return depth(x, y) * pixel_ray(k_inv, x, y); };
  const auto push = [&](int x, int y, const Vec3& g) {
    grad_depth(x, y) += g.dot(pixel_ray(k_inv, x, y));
  };
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      if (!derived.valid(x, y)) continue;
      const Vec3 g_n(grad_normal(x, y, 0), grad_normal(x, y, 1), grad_normal(x, y, 2));
      if (g_n.isZero(0.0)) continue;
      const Vec3 n(derived.normal(x, y, 0), derived.normal(x, y, 1), derived.normal(x, y, 2));
      const Vec3 g_c = (g_n - n * n.dot(g_n)) / derived.cross_norm(x, y);
      const int xl = derived.x_lo(x, y), xh = derived.x_hi(x, y);
      const int yl = derived.y_lo(x, y), yh = derived.y_hi(x, y);
      const Vec3 dx = point(xh, y) - point(xl, y);
      const Vec3 dy = point(x, yh) - point(x, yl);
      // c = dy x dx
      const Vec3 g_dy = dx.cross(g_c);
      const Vec3 g_dx = g_c.cross(dy);
      push(xh, y, g_dx);
      push(xl, y, -g_dx);
      push(x, yh, g_dy);
      push(x, yl, -g_dy);
    }
  }
}

Raster<double> edge_aware_weights(const ImageRGB& image) {
  const Raster<double> gray = grayscale(image);
  const int w = gray.width, h = gray.height;
  Raster<double> eta(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = 0.5 * (gray(std::min(x + 1, w - 1), y) - gray(std::max(x - 1, 0), y));
      const double gy = 0.5 * (gray(x, std::min(y + 1, h - 1)) - gray(x, std::max(y - 1, 0)));
      const double g = std::min(1.0, std::sqrt(gx * gx + gy * gy));
      eta(x, y) = (1.0 - g) * (1.0 - g);
    }
  }
  return eta;
}

double normal_consistency(const Raster<double>& rendered, const Raster<double>& derived,
                          const Mask& mask, const Raster<double>& eta,
                          Raster<double>* grad_rendered, Raster<double>* grad_derived,
                          double scale) {
  std::size_t count = 0;
  for (unsigned char m : mask.data) count += m ? 1 : 0;
  if (count == 0) return 0.0;
  const double inv = 1.0 / static_cast<double>(count);
  double total = 0.0;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask(x, y)) continue;
      for (int c = 0; c < 3; ++c) {
        const double diff = rendered(x, y, c) - derived(x, y, c);
        total += eta(x, y) * std::abs(diff);
        const double g = scale * inv * eta(x, y) * sgn(diff);
        if (grad_rendered) (*grad_rendered)(x, y, c) += g;
        if (grad_derived) (*grad_derived)(x, y, c) -= g;
      }
    }
  }
  return total * inv;
}

double normal_smooth_loss(const RenderOutput& render, const ImageRGB& gt_rgb, const Intrinsics& k,
                          double valid_alpha, RenderGrad* grad, double scale) {
  if (gt_rgb.width != render.width || gt_rgb.height != render.height) {
    throw InvalidInput("normal_smooth_loss: image size mismatch");
  }
  Mask depth_ok(render.width, render.height);
  for (int y = 0; y < render.height; ++y)
    for (int x = 0; x < render.width; ++x) depth_ok(x, y) = render.alpha(x, y) > valid_alpha;
  const DerivedNormals derived = depth_to_normal(render.depth, depth_ok, k);
  Mask mask = valid_mask(render, valid_alpha);
  for (std::size_t i = 0; i < mask.data.size(); ++i) mask.data[i] &= derived.valid.data[i];
  const Raster<double> eta = edge_aware_weights(gt_rgb);
  if (!grad) return normal_consistency(render.normal, derived.normal, mask, eta, nullptr, nullptr);

  Raster<double> g_derived(render.width, render.height, 3);
  const double loss = normal_consistency(render.normal, derived.normal, mask, eta, &grad->normal,
                                         &g_derived, scale);
  depth_to_normal_backward(render.depth, derived, k, g_derived, grad->depth);
  return loss;
}

RelativePose relative_pose(const Camera& ref, const Camera& nbr) {
  RelativePose p;
  p.rotation = nbr.rotation * ref.rotation.transpose();
  p.translation = nbr.translation - p.rotation * ref.translation;
  return p;
}

Vec2 Homography::apply(const Vec2& pixel) const {
  const Vec3 h = matrix * Vec3(pixel.x(), pixel.y(), 1.0);
  return {h.x() / h.z(), h.y() / h.z()};
}

std::optional<Homography> compute_homography(const Camera& ref, const Camera& nbr,
                                             const Vec3& normal, double distance) {
  if (!(distance > 1e-6)) return std::nullopt;
  const RelativePose rel = relative_pose(ref, nbr);
  const Mat3 a = rel.rotation + rel.translation * normal.transpose() / distance;
  return Homography{nbr.intrinsics.matrix() * a * ref.intrinsics.inverse()};
}

PlaneMaps plane_maps(const RenderOutput& render, const Camera& camera, double valid_alpha) {
  PlaneMaps p;
  p.normal = Raster<double>(render.width, render.height, 3);
  p.distance = Raster<double>(render.width, render.height);
  p.valid = Mask(render.width, render.height);
  const Mat3 k_inv = camera.intrinsics.inverse();
  for (int y = 0; y < render.height; ++y) {
    for (int x = 0; x < render.width; ++x) {
      if (!(render.alpha(x, y) > valid_alpha && render.normal_norm(x, y) > 1e-12)) continue;
      const Vec3 n(-render.normal(x, y, 0), -render.normal(x, y, 1), -render.normal(x, y, 2));
      const double dist = render.depth(x, y) * n.dot(pixel_ray(k_inv, x, y));
      if (!(dist > 1e-6)) continue;
      for (int c = 0; c < 3; ++c) p.normal(x, y, c) = n[c];
      p.distance(x, y) = dist;
      p.valid(x, y) = 1;
    }
  }
  return p;
}

GeomLoss multiview_geom_loss(const RenderOutput& ref, const Camera& ref_cam,
                             const RenderOutput& nbr, const Camera& nbr_cam, double valid_alpha,
                             RenderGrad* ref_grad, RenderGrad* nbr_grad, double scale) {
  const PlaneMaps ref_planes = plane_maps(ref, ref_cam, valid_alpha);
  const PlaneMaps nbr_planes = plane_maps(nbr, nbr_cam, valid_alpha);
  const RelativePose fwd = relative_pose(ref_cam, nbr_cam);
  const RelativePose bwd = relative_pose(nbr_cam, ref_cam);
  const Mat3 kr = ref_cam.intrinsics.matrix(), kr_inv = ref_cam.intrinsics.inverse();
  const Mat3 km = nbr_cam.intrinsics.matrix(), km_inv = nbr_cam.intrinsics.inverse();
  const bool want_grad = ref_grad || nbr_grad;

  struct PixelTerm {
    int x, y;
    Bilinear bl;
    Vec3 y_ref, b_fwd, y_nbr, b_bwd, n_ref, n_nbr;
    double c_ref, c_nbr, dist_ref, dist_nbr;
    Vec2 err;
  };
  std::vector<PixelTerm> terms;
  GeomLoss out;
  double total = 0.0;

  for (int y = 0; y < ref.height; ++y) {
    for (int x = 0; x < ref.width; ++x) {
      if (!ref_planes.valid(x, y)) continue;
      PixelTerm t;
      t.x = x;
      t.y = y;
      t.n_ref = Vec3(ref_planes.normal(x, y, 0), ref_planes.normal(x, y, 1),
                     ref_planes.normal(x, y, 2));
      t.dist_ref = ref_planes.distance(x, y);
      t.y_ref = pixel_ray(kr_inv, x, y);
      t.c_ref = t.n_ref.dot(t.y_ref) / t.dist_ref;
      t.b_fwd = km * (fwd.rotation * t.y_ref + fwd.translation * t.c_ref);
      if (!(t.b_fwd.z() > 1e-12)) continue;
      const Vec2 pm(t.b_fwd.x() / t.b_fwd.z(), t.b_fwd.y() / t.b_fwd.z());
      if (!bilinear_at(pm, nbr.width, nbr.height, t.bl)) continue;
      bool ok = true;
      t.n_nbr.setZero();
      t.dist_nbr = 0.0;
      for (int i = 0; i < 4 && ok; ++i) {
        const int qx = t.bl.px(i), qy = t.bl.py(i);
        if (!nbr_planes.valid(qx, qy)) {
          ok = false;
          break;
        }
        const double wi = t.bl.w(i);
        for (int c = 0; c < 3; ++c) t.n_nbr[c] += wi * nbr_planes.normal(qx, qy, c);
        t.dist_nbr += wi * nbr_planes.distance(qx, qy);
      }
      if (!ok || !(t.dist_nbr > 1e-6)) continue;
      t.y_nbr = km_inv * Vec3(pm.x(), pm.y(), 1.0);
      t.c_nbr = t.n_nbr.dot(t.y_nbr) / t.dist_nbr;
      t.b_bwd = kr * (bwd.rotation * t.y_nbr + bwd.translation * t.c_nbr);
      if (!(t.b_bwd.z() > 1e-12)) continue;
      t.err = Vec2(x - t.b_bwd.x() / t.b_bwd.z(), y - t.b_bwd.y() / t.b_bwd.z());
      total += std::abs(t.err.x()) + std::abs(t.err.y());
      if (want_grad) terms.push_back(t);
      ++out.valid_pixels;
    }
  }
  if (out.valid_pixels == 0) return out;
  out.empty = false;
  const double inv = 1.0 / static_cast<double>(out.valid_pixels);
  out.value = total * inv;
  if (!want_grad) return out;

  const Mat3 nbr_k_inv = nbr_cam.intrinsics.inverse();
  for (const PixelTerm& t : terms) {
    // err = p - dehom(b_bwd)
    const Vec2 g_back(-scale * inv * sgn(t.err.x()), -scale * inv * sgn(t.err.y()));
    const Vec3 g_b_bwd = dehomogenize_vjp(t.b_bwd, g_back);
    const Vec3 g_a_bwd = kr.transpose() * g_b_bwd;
    const double g_c_nbr = bwd.translation.dot(g_a_bwd);
    const Vec3 g_y_nbr = bwd.rotation.transpose() * g_a_bwd + g_c_nbr * t.n_nbr / t.dist_nbr;
    const Vec3 g_n_nbr = g_c_nbr * t.y_nbr / t.dist_nbr;
    const double g_dist_nbr = -g_c_nbr * t.c_nbr / t.dist_nbr;

    // y_nbr = Km^-1 [pm, 1]; bilinear weights also depend on pm
    const Vec3 g_pm_h = km_inv.transpose() * g_y_nbr;
    Vec2 g_pm(g_pm_h.x(), g_pm_h.y());
    for (int i = 0; i < 4; ++i) {
      const int qx = t.bl.px(i), qy = t.bl.py(i);
      const Vec3 ni(nbr_planes.normal(qx, qy, 0), nbr_planes.normal(qx, qy, 1),
                    nbr_planes.normal(qx, qy, 2));
      const double di = nbr_planes.distance(qx, qy);
      const double sens = g_n_nbr.dot(ni) + g_dist_nbr * di;
      g_pm.x() += sens * t.bl.dwx(i);
      g_pm.y() += sens * t.bl.dwy(i);
      if (nbr_grad) {
        plane_backward(nbr, nbr_k_inv, qx, qy, t.bl.w(i) * g_n_nbr, t.bl.w(i) * g_dist_nbr,
                       *nbr_grad);
      }
    }

    if (ref_grad) {
      const Vec3 g_b_fwd = dehomogenize_vjp(t.b_fwd, g_pm);
      const Vec3 g_a_fwd = km.transpose() * g_b_fwd;
      const double g_c_ref = fwd.translation.dot(g_a_fwd);
      const Vec3 g_n_ref = g_c_ref * t.y_ref / t.dist_ref;
      const double g_dist_ref = -g_c_ref * t.c_ref / t.dist_ref;
      plane_backward(ref, kr_inv, t.x, t.y, g_n_ref, g_dist_ref, *ref_grad);
    }
  }
  return out;
}

}  // namespace splatprior

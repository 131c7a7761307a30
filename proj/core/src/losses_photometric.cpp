#include "splatprior/losses.hpp"

#include "loss_detail.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace splatprior {

using namespace detail;

namespace {

constexpr int kRadius = kSsimWindow / 2;

std::array<double, kSsimWindow> gaussian_kernel() {
  std::array<double, kSsimWindow> k{};
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kRadius;
    k[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
  }
  return k;
}

// Window mass that falls inside [0, n) for every position along one axis.
std::vector<double> window_mass(int n, const std::array<double, kSsimWindow>& k) {
  std::vector<double> z(n, 0.0);
  for (int p = 0; p < n; ++p)
    for (int i = -kRadius; i <= kRadius; ++i)
      if (p + i >= 0 && p + i < n) z[p] += k[i + kRadius];
  return z;
}

// Truncated separable convolution of a single-channel w*h buffer.
std::vector<double> convolve(const std::vector<double>& in, int w, int h,
                             const std::array<double, kSsimWindow>& k) {
  std::vector<double> tmp(in.size(), 0.0), out(in.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    const double* row = in.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      const int lo = std::max(-kRadius, -x), hi = std::min(kRadius, w - 1 - x);
      double s = 0.0;
      for (int i = lo; i <= hi; ++i) s += k[i + kRadius] * row[x + i];
      tmp[static_cast<std::size_t>(y) * w + x] = s;
    }
  }
  for (int y = 0; y < h; ++y) {
    double* dst = out.data() + static_cast<std::size_t>(y) * w;
    const int lo = std::max(-kRadius, -y), hi = std::min(kRadius, h - 1 - y);
    for (int i = lo; i <= hi; ++i) {
      const double* src = tmp.data() + static_cast<std::size_t>(y + i) * w;
      const double ki = k[i + kRadius];
      for (int x = 0; x < w; ++x) dst[x] += ki * src[x];
    }
  }
  return out;
}

void check_same(const ImageRGB& a, const ImageRGB& b, const char* what) {
  if (!a.same_shape(b)) throw InvalidInput(std::string(what) + ": image shape mismatch");
}

bool sample_gray(const Raster<double>& img, const Vec2& p, double& value, Vec2& grad) {
  Bilinear b;
  if (img.width < 2 || img.height < 2 || !bilinear_at(p, img.width, img.height, b)) return false;
  value = 0.0;
  grad.setZero();
  for (int i = 0; i < 4; ++i) {
    const double v = img(b.px(i), b.py(i));
    value += b.w(i) * v;
    grad.x() += b.dwx(i) * v;
    grad.y() += b.dwy(i) * v;
  }
  return true;
}

}  // namespace

double mae(const ImageRGB& pred, const ImageRGB& gt, ImageRGB* grad_pred, double scale) {
  check_same(pred, gt, "mae");
  if (pred.data.empty()) return 0.0;
  const double inv = 1.0 / static_cast<double>(pred.data.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double d = pred.data[i] - gt.data[i];
    total += std::abs(d);
    if (grad_pred) grad_pred->data[i] += scale * inv * sgn(d);
  }
  return total * inv;
}

double ssim(const ImageRGB& pred, const ImageRGB& gt, ImageRGB* grad_pred, double scale) {
  check_same(pred, gt, "ssim");
  const int w = pred.width, h = pred.height, nc = pred.channels;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (n == 0) return 1.0;
  const auto k = gaussian_kernel();
  const std::vector<double> zx = window_mass(w, k), zy = window_mass(h, k);
  std::vector<double> inv_z(n);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) inv_z[static_cast<std::size_t>(y) * w + x] = 1.0 / (zx[x] * zy[y]);
  const auto filter = [&](const std::vector<double>& in) {
    std::vector<double> out = convolve(in, w, h, k);
    for (std::size_t i = 0; i < n; ++i) out[i] *= inv_z[i];
    return out;
  };
  const auto filter_t = [&](std::vector<double> in) {
    for (std::size_t i = 0; i < n; ++i) in[i] *= inv_z[i];
    return convolve(in, w, h, k);
  };

  const double inv_count = 1.0 / static_cast<double>(n * nc);
  double total = 0.0;
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (int c = 0; c < nc; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = pred.data[i * nc + c];
      y[i] = gt.data[i * nc + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter(x), my = filter(y), fxx = filter(xx), fyy = filter(yy), fxy = filter(xy);
    std::vector<double> d_mu(grad_pred ? n : 0), d_fxx(grad_pred ? n : 0), d_fxy(grad_pred ? n : 0);
    for (std::size_t i = 0; i < n; ++i) {
      const double sxx = fxx[i] - mx[i] * mx[i];
      const double syy = fyy[i] - my[i] * my[i];
      const double sxy = fxy[i] - mx[i] * my[i];
      const double a1 = 2.0 * mx[i] * my[i] + kSsimC1, a2 = 2.0 * sxy + kSsimC2;
      const double b1 = mx[i] * mx[i] + my[i] * my[i] + kSsimC1, b2 = sxx + syy + kSsimC2;
      const double s = a1 * a2 / (b1 * b2);
      total += s;
      if (grad_pred) {
        d_mu[i] = (2.0 * my[i] * a2 - 2.0 * my[i] * a1) / (b1 * b2) -
                  s * (2.0 * mx[i] / b1 - 2.0 * mx[i] / b2);
        d_fxx[i] = -s / b2;
        d_fxy[i] = 2.0 * a1 / (b1 * b2);
      }
    }
    if (grad_pred) {
      const auto t_mu = filter_t(d_mu), t_xx = filter_t(d_fxx), t_xy = filter_t(d_fxy);
      for (std::size_t i = 0; i < n; ++i) {
        grad_pred->data[i * nc + c] +=
            scale * inv_count * (t_mu[i] + 2.0 * x[i] * t_xx[i] + y[i] * t_xy[i]);
      }
    }
  }
  return total * inv_count;
}

std::optional<double> ncc(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("ncc: sample size mismatch");
  if (a.empty()) return std::nullopt;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(a.size());
  mb /= static_cast<double>(b.size());
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
    sab += (a[i] - ma) * (b[i] - mb);
  }
  if (saa < 1e-10 || sbb < 1e-10) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

Raster<double> grayscale(const ImageRGB& image) {
  Raster<double> g(image.width, image.height);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      g(x, y) = image.channels >= 3
                    ? 0.299 * image(x, y, 0) + 0.587 * image(x, y, 1) + 0.114 * image(x, y, 2)
                    : image(x, y, 0);
    }
  return g;
}

NccTerm multiview_ncc(const RenderOutput& ref, const Camera& ref_cam, const ImageRGB& ref_gt,
                      const Camera& nbr_cam, const ImageRGB& nbr_gt, double valid_alpha,
                      RenderGrad* grad, double scale) {
  constexpr int kSide = 2 * kNccPatchRadius + 1;
  constexpr int kCount = kSide * kSide;
  const PlaneMaps planes = plane_maps(ref, ref_cam, valid_alpha);
  const Raster<double> gray_r = grayscale(ref_gt);
  const Raster<double> gray_m = grayscale(nbr_gt);
  const RelativePose rel = relative_pose(ref_cam, nbr_cam);
  const Mat3 kr_inv = ref_cam.intrinsics.inverse();
  const Mat3 km = nbr_cam.intrinsics.matrix();
  const Mat3 km_r = km * rel.rotation;
  const Vec3 km_t = km * rel.translation;
  const int w = ref.width;
  std::vector<Vec3> rays(static_cast<std::size_t>(w) * ref.height);
  std::vector<Vec3> rotated(rays.size());
  for (int y = 0; y < ref.height; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      rays[i] = pixel_ray(kr_inv, x, y);
      rotated[i] = km_r * rays[i];
    }

  struct PatchGrad {
    int x, y;
    Vec3 g_n;
    double g_dist;
  };
  std::vector<PatchGrad> pending;
  double sum = 0.0;
  std::size_t count = 0;

  std::array<double, kCount> r{}, m{}, c{};
  std::array<Vec3, kCount> yq{}, b{};
  std::array<Vec2, kCount> dm{};
  const int rad = kNccPatchRadius;
  for (int y = rad; y < ref.height - rad; ++y) {
    for (int x = rad; x < ref.width - rad; ++x) {
      if (!planes.valid(x, y)) continue;
      const Vec3 n(planes.normal(x, y, 0), planes.normal(x, y, 1), planes.normal(x, y, 2));
      const double dist = planes.distance(x, y);
      bool ok = true;
      for (int i = 0; i < kCount && ok; ++i) {
        const int qx = x + i % kSide - rad, qy = y + i / kSide - rad;
        const std::size_t qi = static_cast<std::size_t>(qy) * w + qx;
        yq[i] = rays[qi];
        c[i] = n.dot(yq[i]) / dist;
        b[i] = rotated[qi] + km_t * c[i];
        if (!(b[i].z() > 1e-12)) {
          ok = false;
          break;
        }
        r[i] = gray_r(qx, qy);
        ok = sample_gray(gray_m, Vec2(b[i].x() / b[i].z(), b[i].y() / b[i].z()), m[i], dm[i]);
      }
      if (!ok) continue;
      double mr = 0.0, mm = 0.0;
      for (int i = 0; i < kCount; ++i) {
        mr += r[i];
        mm += m[i];
      }
      mr /= kCount;
      mm /= kCount;
      double srr = 0.0, smm = 0.0, srm = 0.0;
      for (int i = 0; i < kCount; ++i) {
        srr += (r[i] - mr) * (r[i] - mr);
        smm += (m[i] - mm) * (m[i] - mm);
        srm += (r[i] - mr) * (m[i] - mm);
      }
      if (srr < 1e-10 || smm < 1e-10) continue;
      const double root = std::sqrt(srr * smm);
      const double value = srm / root;
      sum += value;
      ++count;
      if (!grad) continue;
      PatchGrad pg{x, y, Vec3::Zero(), 0.0};
      for (int i = 0; i < kCount; ++i) {
        const double d_sample = (r[i] - mr) / root - value * (m[i] - mm) / smm;
        const Vec3 g_b = dehomogenize_vjp(b[i], d_sample * dm[i]);
        const double g_c = km_t.dot(g_b);
        pg.g_n += g_c * yq[i] / dist;
        pg.g_dist -= g_c * c[i] / dist;
      }
      pending.push_back(pg);
    }
  }
  NccTerm out;
  out.valid_pixels = count;
  if (count == 0) return out;
  out.mean_ncc = sum / static_cast<double>(count);
  if (grad) {
    // d(1 - mean)/d(ncc_p) = -1/count
    const double s = -scale / static_cast<double>(count);
    for (const PatchGrad& pg : pending) {
      plane_backward(ref, kr_inv, pg.x, pg.y, s * pg.g_n, s * pg.g_dist, *grad);
    }
  }
  return out;
}

RgbLoss rgb_loss(const RenderOutput& render, const Camera& camera, const ImageRGB& gt_rgb,
                 std::optional<Neighbor> neighbor, double beta, double valid_alpha,
                 RenderGrad* grad, double scale) {
  if (gt_rgb.width != render.width || gt_rgb.height != render.height || gt_rgb.channels != 3) {
    throw InvalidInput("rgb_loss: ground truth does not match the render");
  }
  RgbLoss out;
  out.mae = mae(render.rgb, gt_rgb, grad ? &grad->rgb : nullptr, scale * (1.0 - beta));
  out.ssim = ssim(render.rgb, gt_rgb, grad ? &grad->rgb : nullptr, -scale * beta);
  double ncc_term = 0.0;
  if (neighbor && neighbor->camera && neighbor->gt_rgb) {
    const NccTerm t = multiview_ncc(render, camera, gt_rgb, *neighbor->camera, *neighbor->gt_rgb,
                                    valid_alpha, grad, scale);
    out.ncc = t.mean_ncc;
    out.ncc_pixels = t.valid_pixels;
    if (t.valid_pixels > 0) ncc_term = 1.0 - t.mean_ncc;
  }
  out.total = (1.0 - beta) * out.mae + beta * (1.0 - out.ssim) + ncc_term;
  return out;
}

}  // namespace splatprior

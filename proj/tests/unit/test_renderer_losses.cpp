#include "splatprior/losses.hpp"
#include "splatprior/renderer.hpp"
#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace splatprior {
namespace {

using fixtures::five_gaussians;
using fixtures::small_camera;
using fixtures::smooth_texture;

Camera axis_camera(int size, double f) {
  Camera c;
  c.intrinsics = {f, f, 0.5 * (size - 1), 0.5 * (size - 1)};
  c.width = c.height = size;
  return c;
}

TEST(Renderer, FrontToBackBlendingMatchesScalarOracle) {
  const Camera cam = axis_camera(9, 10.0);
  std::vector<Gaussian> gs(3);
  const double z[3] = {3.0, 2.0, 4.0};
  const double op[3] = {0.6, 0.3, 0.8};
  const Vec3 col[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (int i = 0; i < 3; ++i) {
    gs[i].center = Vec3(0.05 * i, -0.03 * i, z[i]);
    gs[i].log_scale = Vec3(std::log(0.6), std::log(0.4), std::log(1e-3));
    gs[i].opacity_logit = logit(op[i]);
    gs[i].color = col[i];
  }
  const RenderOutput r = render_view(gs, cam);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const double u = (x - cam.intrinsics.cx) / cam.intrinsics.fx;
      const double v = (y - cam.intrinsics.cy) / cam.intrinsics.fy;
      const int order[3] = {1, 0, 2};
      double t = 1.0, acc = 0.0, depth = 0.0;
      Vec3 c = Vec3::Zero();
      for (int i : order) {
        const double lx = u * z[i] - gs[i].center.x(), ly = v * z[i] - gs[i].center.y();
        const double q = lx * lx / 0.36 + ly * ly / 0.16;
        if (q > 9.0) continue;
        const double a = op[i] * std::exp(-0.5 * q);
        c += t * a * col[i];
        depth += t * a * z[i];
        acc += t * a;
        t *= 1.0 - a;
      }
      for (int ch = 0; ch < 3; ++ch) EXPECT_NEAR(r.rgb(x, y, ch), c[ch], 1e-12);
      EXPECT_NEAR(r.alpha(x, y), acc, 1e-12);
      EXPECT_NEAR(r.depth(x, y), depth / acc, 1e-12);
      EXPECT_NEAR(r.normal(x, y, 2), -1.0, 1e-12);
    }
}

TEST(Renderer, RayPlaneDepthOfTiltedGaussian) {
  const Camera cam = axis_camera(11, 12.0);
  Gaussian g;
  g.center = Vec3(0.1, -0.2, 3.0);
  g.log_scale = Vec3(std::log(2.0), std::log(2.0), std::log(1e-3));
  g.rotation = quat_from_axis_angle(Vec3(1, 1, 0).normalized(), 0.4);
  g.opacity_logit = 3.0;
  const std::vector<Gaussian> gs{g};
  const RenderOutput r = render_view(gs, cam);
  const Vec3 n = g.rotation_matrix().col(2);
  for (int y = 0; y < cam.height; y += 2)
    for (int x = 0; x < cam.width; x += 2) {
      const Vec3 d((x - cam.intrinsics.cx) / cam.intrinsics.fx,
                   (y - cam.intrinsics.cy) / cam.intrinsics.fy, 1.0);
      const double t = n.dot(g.center) / n.dot(d);
      ASSERT_EQ(r.records_at(x, y).size(), 1u);
      EXPECT_NEAR(r.records_at(x, y)[0].depth, t, 1e-12);
      EXPECT_NEAR(r.depth(x, y), t, 1e-12);
    }
}

TEST(Renderer, TransmittanceMonotoneAndRecordsSorted) {
  const auto gs = five_gaussians(4);
  const Camera cam = small_camera(Vec3(0, 0, -3), 12);
  const RenderOutput r = render_view(gs, cam);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const auto recs = r.records_at(x, y);
      double t = 1.0, sum = 0.0;
      for (std::size_t i = 0; i < recs.size(); ++i) {
        if (i > 0) EXPECT_LE(recs[i - 1].depth, recs[i].depth);
        EXPECT_NEAR(recs[i].weight, t * recs[i].alpha, 1e-14);
        const double next = t * (1.0 - recs[i].alpha);
        EXPECT_LE(next, t);
        t = next;
        sum += recs[i].weight;
      }
      EXPECT_NEAR(r.alpha(x, y), sum, 1e-12);
      EXPECT_LE(r.alpha(x, y), 1.0);
    }
}

TEST(Renderer, RejectsEmptyInput) {
  const Camera cam = axis_camera(4, 4.0);
  EXPECT_THROW(render_view(std::vector<Gaussian>{}, cam), InvalidInput);
  RenderOptions bad;
  bad.near = 2.0;
  bad.far = 1.0;
  EXPECT_THROW(render_view(five_gaussians(1), cam, bad), InvalidInput);
}

TEST(DepthDistortion, MatchesPairwiseDoubleLoop) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(9), d(9);
  for (int i = 0; i < 9; ++i) {
    w[i] = u(rng);
    d[i] = 1.0 + 3.0 * u(rng);
  }
  double expect = 0.0;
  for (int a = 0; a < 9; ++a)
    for (int b = 0; b < a; ++b) expect += w[a] * w[b] * (d[a] - d[b]) * (d[a] - d[b]);
  EXPECT_NEAR(depth_distortion(w, d), expect, 1e-12);

  const auto gs = five_gaussians(2);
  const Camera cam = small_camera(Vec3(0, 0, -3));
  const RenderOutput r = render_view(gs, cam);
  double mean = 0.0;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      std::vector<double> ww, dd;
      for (const BlendRecord& rec : r.records_at(x, y)) {
        ww.push_back(rec.weight);
        dd.push_back(rec.depth);
      }
      for (std::size_t a = 0; a < ww.size(); ++a)
        for (std::size_t b = 0; b < a; ++b) mean += ww[a] * ww[b] * (dd[a] - dd[b]) * (dd[a] - dd[b]);
    }
  mean /= static_cast<double>(cam.width * cam.height);
  EXPECT_NEAR(depth_distortion_loss(r), mean, 1e-12);
}

TEST(DepthToNormal, RecoversPlaneNormal) {
  const Camera cam = axis_camera(12, 14.0);
  const Vec3 n = Vec3(0.3, -0.2, -1.0).normalized();  // facing the camera
  const double dist = -2.5;                           // n . X for points on the plane
  Raster<double> depth(cam.width, cam.height);
  Mask valid(cam.width, cam.height, 1, 1);
  const Mat3 kinv = cam.intrinsics.inverse();
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) depth(x, y) = dist / n.dot(kinv * Vec3(x, y, 1));
  valid(5, 5) = 0;
  const DerivedNormals dn = depth_to_normal(depth, valid, cam.intrinsics);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      if (!dn.valid(x, y)) continue;
      const Vec3 got(dn.normal(x, y, 0), dn.normal(x, y, 1), dn.normal(x, y, 2));
      EXPECT_NEAR((got - n).norm(), 0.0, 1e-9) << x << "," << y;
    }
  EXPECT_FALSE(dn.valid(5, 5));
}

TEST(EdgeWeights, FlatImageIsOneAndStepIsZero) {
  ImageRGB flat(6, 6, 3, 0.4);
  for (double w : edge_aware_weights(flat).data) EXPECT_DOUBLE_EQ(w, 1.0);
  ImageRGB step(6, 6, 3, 0.0);
  for (int y = 0; y < 6; ++y)
    for (int x = 3; x < 6; ++x)
      for (int c = 0; c < 3; ++c) step(x, y, c) = 1.0;
  const Raster<double> e = edge_aware_weights(step);
  EXPECT_DOUBLE_EQ(e(0, 2), 1.0);
  // central difference across the step is 0.5
  EXPECT_NEAR(e(2, 2), 0.25, 1e-12);
}

TEST(Homography, MatchesLiftAndReproject) {
  const Camera ref = small_camera(Vec3(0.2, -0.1, -3.0), 16);
  const Camera nbr = small_camera(Vec3(-0.6, 0.4, -2.7), 16);
  const Vec3 n = Vec3(0.2, 0.1, 1.0).normalized();
  const double dist = 2.8;
  const auto h = compute_homography(ref, nbr, n, dist);
  ASSERT_TRUE(h.has_value());
  const Mat3 kinv = ref.intrinsics.inverse();
  for (int y = 0; y < 16; y += 3)
    for (int x = 0; x < 16; x += 3) {
      const Vec3 ray = kinv * Vec3(x, y, 1);
      const Vec3 x_cam = ray * (dist / n.dot(ray));
      const Vec3 world = ref.rotation.transpose() * (x_cam - ref.translation);
      const Projection p = project_point(nbr, world);
      const Vec2 got = h->apply(Vec2(x, y));
      EXPECT_NEAR((got - p.pixel).norm(), 0.0, 1e-9);
      EXPECT_NEAR((h->inverse().apply(got) - Vec2(x, y)).norm(), 0.0, 1e-9);
    }
  EXPECT_FALSE(compute_homography(ref, nbr, n, 0.0).has_value());
}

double ssim_oracle(const ImageRGB& a, const ImageRGB& b) {
  double total = 0.0;
  for (int c = 0; c < a.channels; ++c)
    for (int py = 0; py < a.height; ++py)
      for (int px = 0; px < a.width; ++px) {
        double z = 0, mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
        for (int qy = py - 5; qy <= py + 5; ++qy)
          for (int qx = px - 5; qx <= px + 5; ++qx) {
            if (qx < 0 || qy < 0 || qx >= a.width || qy >= a.height) continue;
            const double w =
                std::exp(-((qx - px) * (qx - px) + (qy - py) * (qy - py)) / (2.0 * 1.5 * 1.5));
            const double va = a(qx, qy, c), vb = b(qx, qy, c);
            z += w;
            mx += w * va;
            my += w * vb;
            xx += w * va * va;
            yy += w * vb * vb;
            xy += w * va * vb;
          }
        mx /= z;
        my /= z;
        const double sx = xx / z - mx * mx, sy = yy / z - my * my, sxy = xy / z - mx * my;
        const double c1 = 1e-4, c2 = 9e-4;
        total += (2 * mx * my + c1) * (2 * sxy + c2) / ((mx * mx + my * my + c1) * (sx + sy + c2));
      }
  return total / (a.pixel_count() * a.channels);
}

TEST(Ssim, MatchesDoubleLoopOracle) {
  const ImageRGB a = smooth_texture(13, 10, 0.0);
  const ImageRGB b = smooth_texture(13, 10, 0.4);
  EXPECT_NEAR(ssim(a, b), ssim_oracle(a, b), 1e-12);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  EXPECT_THROW(ssim(a, ImageRGB(3, 3, 3)), InvalidInput);
}

TEST(Ncc, PearsonDefinitionAndDegenerateCases) {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 4, 6, 8, 10}, c{5, 4, 3, 2, 1};
  EXPECT_NEAR(ncc(a, b).value(), 1.0, 1e-14);
  EXPECT_NEAR(ncc(a, c).value(), -1.0, 1e-14);
  const std::vector<double> flat{3, 3, 3, 3, 3};
  EXPECT_FALSE(ncc(a, flat).has_value());
}

bool bilinear(const Raster<double>& img, double x, double y, double& out) {
  if (x < 0 || y < 0 || x > img.width - 1 || y > img.height - 1) return false;
  const int x0 = std::min(static_cast<int>(x), img.width - 2);
  const int y0 = std::min(static_cast<int>(y), img.height - 2);
  const double fx = x - x0, fy = y - y0;
  out = (1 - fx) * (1 - fy) * img(x0, y0) + fx * (1 - fy) * img(x0 + 1, y0) +
        (1 - fx) * fy * img(x0, y0 + 1) + fx * fy * img(x0 + 1, y0 + 1);
  return true;
}

TEST(MultiviewNcc, MatchesPatchOracle) {
  const auto gs = five_gaussians(6);
  const Camera ref = small_camera(Vec3(0, 0, -3), 16);
  const Camera nbr = small_camera(Vec3(0.15, -0.1, -3.0), 16);
  const ImageRGB gt_r = smooth_texture(16, 16, 0.1);
  const ImageRGB gt_n = smooth_texture(16, 16, 0.3);
  const RenderOutput r = render_view(gs, ref);
  const NccTerm got = multiview_ncc(r, ref, gt_r, nbr, gt_n, 0.3);

  const Raster<double> gray_r = grayscale(gt_r), gray_n = grayscale(gt_n);
  const Mat3 kinv = ref.intrinsics.inverse();
  double sum = 0.0;
  std::size_t count = 0;
  for (int y = 3; y < 13; ++y)
    for (int x = 3; x < 13; ++x) {
      if (r.alpha(x, y) <= 0.3) continue;
      const Vec3 n = -Vec3(r.normal(x, y, 0), r.normal(x, y, 1), r.normal(x, y, 2));
      const double dist = r.depth(x, y) * n.dot(kinv * Vec3(x, y, 1));
      const auto h = compute_homography(ref, nbr, n, dist);
      if (!h) continue;
      std::vector<double> pa, pb;
      bool ok = true;
      for (int dy = -3; dy <= 3 && ok; ++dy)
        for (int dx = -3; dx <= 3 && ok; ++dx) {
          const Vec2 q = h->apply(Vec2(x + dx, y + dy));
          double v = 0.0;
          ok = bilinear(gray_n, q.x(), q.y(), v);
          pa.push_back(gray_r(x + dx, y + dy));
          pb.push_back(v);
        }
      if (!ok) continue;
      if (const auto c = ncc(pa, pb)) {
        sum += *c;
        ++count;
      }
    }
  ASSERT_GT(count, 0u);
  EXPECT_EQ(got.valid_pixels, count);
  EXPECT_NEAR(got.mean_ncc, sum / count, 1e-10);
}

TEST(RgbLossTest, CombinesTermsWithBeta) {
  const auto gs = five_gaussians(3);
  const Camera cam = small_camera(Vec3(0, 0, -3), 10);
  const ImageRGB gt = smooth_texture(10, 10, 0.5);
  const RenderOutput r = render_view(gs, cam);
  const RgbLoss l = rgb_loss(r, cam, gt, std::nullopt, 0.2, 0.5);
  EXPECT_NEAR(l.total, 0.8 * mae(r.rgb, gt) + 0.2 * (1.0 - ssim(r.rgb, gt)), 1e-14);
  EXPECT_EQ(l.ncc_pixels, 0u);
}

TEST(MultiviewGeom, IdenticalViewsGiveZeroError) {
  const auto gs = five_gaussians(8);
  const Camera cam = small_camera(Vec3(0, 0, -3), 10);
  const RenderOutput r = render_view(gs, cam);
  const GeomLoss l = multiview_geom_loss(r, cam, r, cam, 0.3);
  ASSERT_FALSE(l.empty);
  EXPECT_NEAR(l.value, 0.0, 1e-9);
}

}  // namespace
}  // namespace splatprior

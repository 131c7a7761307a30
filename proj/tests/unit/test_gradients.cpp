#include "splatprior/constraints.hpp"
#include "splatprior/losses.hpp"
#include "splatprior/renderer.hpp"
#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <random>

namespace splatprior {
namespace {

using fixtures::finite_difference;
using fixtures::five_gaussians;
using fixtures::max_abs;
using fixtures::max_relative_error;
using fixtures::small_camera;
using fixtures::smooth_texture;
using fixtures::wide_neighbor;

constexpr double kTolerance = 1e-3;
constexpr double kValidAlpha = 0.3;

const Camera& ref_camera() {
  static const Camera cam = small_camera(Vec3(0.0, 0.0, -3.0));
  return cam;
}

const Camera& nbr_camera() {
  static const Camera cam = small_camera(Vec3(0.35, 0.15, -2.95));
  return cam;
}

std::vector<ParamVector> backward(const std::vector<Gaussian>& gs, const Camera& cam,
                                  const RenderOutput& r, const RenderGrad& g) {
  return render_backward(gs, cam, r, g);
}

class GradientSuite : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(GradientSuite, RenderedMapsWeightedSum) {
  const auto gs = five_gaussians(GetParam());
  const Camera& cam = ref_camera();
  std::mt19937_64 rng(GetParam() + 100);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const RenderOutput base = render_view(gs, cam);
  RenderGrad w(base);
  for (double& v : w.rgb.data) v = u(rng);
  for (double& v : w.depth.data) v = u(rng);
  for (double& v : w.normal.data) v = u(rng);
  for (double& v : w.alpha.data) v = u(rng);
  const auto loss = [&](const std::vector<Gaussian>& g) {
    const RenderOutput r = render_view(g, cam);
    double s = 0.0;
    for (std::size_t i = 0; i < r.rgb.data.size(); ++i) s += w.rgb.data[i] * r.rgb.data[i];
    for (std::size_t i = 0; i < r.depth.data.size(); ++i) s += w.depth.data[i] * r.depth.data[i];
    for (std::size_t i = 0; i < r.normal.data.size(); ++i) s += w.normal.data[i] * r.normal.data[i];
    for (std::size_t i = 0; i < r.alpha.data.size(); ++i) s += w.alpha.data[i] * r.alpha.data[i];
    return s;
  };
  const auto analytic = backward(gs, cam, base, w);
  const auto numeric = finite_difference(gs, loss);
  EXPECT_GT(max_abs(numeric), 1e-3);
  EXPECT_LT(max_relative_error(analytic, numeric), kTolerance);
}

TEST_P(GradientSuite, DepthDistortion) {
  const auto gs = five_gaussians(GetParam());
  const Camera& cam = ref_camera();
  const RenderOutput base = render_view(gs, cam);
  RenderGrad g(base);
  depth_distortion_loss(base, &g);
  const auto analytic = backward(gs, cam, base, g);
  const auto numeric = finite_difference(
      gs, [&](const std::vector<Gaussian>& v) { return depth_distortion_loss(render_view(v, cam)); });
  EXPECT_GT(max_abs(numeric), 1e-5);
  EXPECT_LT(max_relative_error(analytic, numeric), kTolerance);
}

TEST_P(GradientSuite, NormalSmoothness) {
  const auto gs = five_gaussians(GetParam());
  const Camera& cam = ref_camera();
  const ImageRGB gt = smooth_texture(cam.width, cam.height, 0.3);
  const RenderOutput base = render_view(gs, cam);
  RenderGrad g(base);
  normal_smooth_loss(base, gt, cam.intrinsics, kValidAlpha, &g);
  const auto analytic = backward(gs, cam, base, g);
  const auto numeric = finite_difference(gs, [&](const std::vector<Gaussian>& v) {
    return normal_smooth_loss(render_view(v, cam), gt, cam.intrinsics, kValidAlpha);
  });
  EXPECT_GT(max_abs(numeric), 1e-5);
  EXPECT_LT(max_relative_error(analytic, numeric), kTolerance);
}

TEST_P(GradientSuite, MultiviewGeometry) {
  const auto gs = five_gaussians(GetParam());
  const Camera& ref = ref_camera();
  const Camera& nbr = nbr_camera();
  const RenderOutput r0 = render_view(gs, ref);
  const RenderOutput r1 = render_view(gs, nbr);
  RenderGrad g0(r0), g1(r1);
  const GeomLoss l = multiview_geom_loss(r0, ref, r1, nbr, kValidAlpha, &g0, &g1);
  ASSERT_FALSE(l.empty);
  auto analytic = backward(gs, ref, r0, g0);
  const auto from_nbr = backward(gs, nbr, r1, g1);
  for (std::size_t i = 0; i < analytic.size(); ++i) analytic[i] += from_nbr[i];
  const auto numeric = finite_difference(gs, [&](const std::vector<Gaussian>& v) {
    return multiview_geom_loss(render_view(v, ref), ref, render_view(v, nbr), nbr, kValidAlpha)
        .value;
  });
  EXPECT_GT(max_abs(numeric), 1e-5);
  EXPECT_LT(max_relative_error(analytic, numeric), kTolerance);
}

TEST_P(GradientSuite, MeanAbsoluteError) {
  const auto gs = five_gaussians(GetParam());
  const Camera& cam = ref_camera();
  const ImageRGB gt = smooth_texture(cam.width, cam.height, 1.1);
  const RenderOutput base = render_view(gs, cam);
  RenderGrad g(base);
  mae(base.rgb, gt, &g.rgb);
  const auto analytic = backward(gs, cam, base, g);
  const auto numeric = finite_difference(
      gs, [&](const std::vector<Gaussian>& v) { return mae(render_view(v, cam).rgb, gt); });
  EXPECT_LT(max_relative_error(analytic, numeric), kTolerance);
}

TEST_P(GradientSuite, Ssim) {
  const auto gs = five_gaussians(GetParam());
  const Camera& cam = ref_camera();
  const ImageRGB gt = smooth_texture(cam.width, cam.height, 0.7);
  const RenderOutput base = render_view(gs, cam);
  RenderGrad g(base);
  ssim(base.rgb, gt, &g.rgb);
  const auto analytic = backward(gs, cam, base, g);
  const auto numeric = finite_difference(
      gs, [&](const std::vector<Gaussian>& v) { return ssim(render_view(v, cam).rgb, gt); });
  EXPECT_GT(max_abs(numeric), 1e-5);
  EXPECT_LT(max_relative_error(analytic, numeric), kTolerance);
}

TEST_P(GradientSuite, MultiviewNcc) {
  const auto gs = five_gaussians(GetParam());
  const Camera& ref = ref_camera();
  const Camera nbr = wide_neighbor(Vec3(0.05, 0.03, -3.0));
  const ImageRGB gt_ref = smooth_texture(ref.width, ref.height, 0.2);
  const ImageRGB gt_nbr = smooth_texture(nbr.width, nbr.height, 0.25);
  const RenderOutput base = render_view(gs, ref);
  RenderGrad g(base);
  const NccTerm t = multiview_ncc(base, ref, gt_ref, nbr, gt_nbr, kValidAlpha, &g);
  ASSERT_GT(t.valid_pixels, 0u);
  const auto analytic = backward(gs, ref, base, g);
  const auto numeric = finite_difference(gs, [&](const std::vector<Gaussian>& v) {
    const NccTerm n = multiview_ncc(render_view(v, ref), ref, gt_ref, nbr, gt_nbr, kValidAlpha);
    return 1.0 - n.mean_ncc;
  });
  EXPECT_GT(max_abs(numeric), 1e-7);
  EXPECT_LT(max_relative_error(analytic, numeric, 1e-7), kTolerance);
}

TEST_P(GradientSuite, RgbTotal) {
  const auto gs = five_gaussians(GetParam());
  const Camera& ref = ref_camera();
  const Camera nbr = wide_neighbor(Vec3(0.05, 0.03, -3.0));
  const ImageRGB gt_ref = smooth_texture(ref.width, ref.height, 0.2);
  const ImageRGB gt_nbr = smooth_texture(nbr.width, nbr.height, 0.25);
  const Neighbor n{&nbr, &gt_nbr};
  const RenderOutput base = render_view(gs, ref);
  RenderGrad g(base);
  rgb_loss(base, ref, gt_ref, n, 0.2, kValidAlpha, &g);
  const auto analytic = backward(gs, ref, base, g);
  const auto numeric = finite_difference(gs, [&](const std::vector<Gaussian>& v) {
    return rgb_loss(render_view(v, ref), ref, gt_ref, n, 0.2, kValidAlpha).total;
  });
  EXPECT_LT(max_relative_error(analytic, numeric), kTolerance);
}

INSTANTIATE_TEST_SUITE_P(RandomScenes, GradientSuite, ::testing::Values(1u, 2u, 3u));

TEST(ScpGradient, MatchesFiniteDifferenceTightly) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Gaussian> gs(40);
  std::vector<BandLabel> labels(gs.size());
  for (std::size_t i = 0; i < gs.size(); ++i) {
    gs[i].opacity_logit = 3.0 * u(rng);
    const double s = 0.9 * u(rng);
    const BandRegion regions[] = {BandRegion::OnSurface, BandRegion::OffSurface,
                                  BandRegion::Outside, BandRegion::Unobserved};
    labels[i] = {regions[i % 4], s};
  }
  const ScpLoss l = scp_loss(gs, labels);
  for (std::size_t i = 0; i < gs.size(); ++i) {
    const double h = 1e-5;
    auto plus = gs, minus = gs;
    plus[i].opacity_logit += h;
    minus[i].opacity_logit -= h;
    const double fd = (scp_loss(plus, labels).value - scp_loss(minus, labels).value) / (2 * h);
    const double a = l.grad_logit[i];
    EXPECT_LT(std::abs(a - fd) / (std::max(std::abs(a), std::abs(fd)) + 1e-9), 1e-5) << i;
  }
}

}  // namespace
}  // namespace splatprior

#include "splatprior/prior.hpp"
#include "splatprior/scenes.hpp"
#include "splatprior/tsdf.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <random>

namespace splatprior {
namespace {

using oracles::brute_force_fusion;
using oracles::cell_poly;

AnalyticScene sphere_scene(int views, int size) {
  RigSettings rig;
  rig.views = views;
  rig.width = rig.height = size;
  return make_scene(Shape{}, rig);
}

TEST(Fusion, BitEqualToBruteForce) {
  const AnalyticScene scene = sphere_scene(4, 48);
  std::vector<DepthMap> depths;
  for (const Camera& c : scene.cameras) depths.push_back(render_ground_truth(scene, c).gt_depth);
  const GridSpec spec = GridSpec::covering(scene.bounds.padded(0.05), 32);
  const double trunc = 3.0 * spec.voxel_size;
  const TsdfGrid fused = fuse_depth_maps(scene.cameras, depths, spec, trunc);
  const TsdfGrid oracle = brute_force_fusion(scene.cameras, depths, spec, trunc);
  ASSERT_EQ(fused.values.size(), oracle.values.size());
  std::size_t observed = 0;
  for (std::size_t i = 0; i < fused.values.size(); ++i) {
    ASSERT_EQ(std::bit_cast<std::uint32_t>(fused.values[i]),
              std::bit_cast<std::uint32_t>(oracle.values[i]))
        << i;
    ASSERT_EQ(fused.weights[i], oracle.weights[i]) << i;
    observed += fused.weights[i] > 0.0f;
  }
  EXPECT_GT(observed, fused.values.size() / 4);
}

TEST(Fusion, ValuesBoundedAndUnobservedDefault) {
  const AnalyticScene scene = sphere_scene(3, 32);
  std::vector<DepthMap> depths;
  for (const Camera& c : scene.cameras) depths.push_back(render_ground_truth(scene, c).gt_depth);
  const GridSpec spec = GridSpec::covering(scene.bounds.padded(0.05), 24);
  const TsdfGrid g = fuse_depth_maps(scene.cameras, depths, spec, 2.0 * spec.voxel_size);
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    EXPECT_LE(std::abs(g.values[i]), 1.0f);
    if (g.weights[i] == 0.0f) EXPECT_EQ(g.values[i], 1.0f);
  }
}

TEST(Fusion, RejectsMismatchedInput) {
  const AnalyticScene scene = sphere_scene(2, 16);
  const GridSpec spec = GridSpec::covering(scene.bounds, 8);
  std::vector<DepthMap> one{DepthMap(16, 16)};
  EXPECT_THROW(fuse_depth_maps(scene.cameras, one, spec, 0.1), InvalidInput);
  std::vector<DepthMap> wrong{DepthMap(8, 8), DepthMap(16, 16)};
  EXPECT_THROW(fuse_depth_maps(scene.cameras, wrong, spec, 0.1), InvalidInput);
  std::vector<DepthMap> ok{DepthMap(16, 16), DepthMap(16, 16)};
  EXPECT_THROW(fuse_depth_maps(scene.cameras, ok, spec, 0.0), InvalidInput);
}

TsdfGrid random_grid(int n, std::uint64_t seed) {
  GridSpec spec;
  spec.origin = Vec3(-0.3, 0.1, 0.2);
  spec.voxel_size = 0.07;
  spec.dims = {n, n + 1, n + 2};
  TsdfGrid g(spec, 0.2);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (float& v : g.values) v = u(rng);
  std::fill(g.weights.begin(), g.weights.end(), 1.0f);
  return g;
}

TEST(Trilinear, MatchesCellPolynomial) {
  const TsdfGrid g = random_grid(6, 3);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 2000; ++t) {
    const int i = static_cast<int>(u(rng) * (g.spec.dims[0] - 1));
    const int j = static_cast<int>(u(rng) * (g.spec.dims[1] - 1));
    const int k = static_cast<int>(u(rng) * (g.spec.dims[2] - 1));
    const double x = u(rng), y = u(rng), z = u(rng);
    const Vec3 p = g.spec.voxel_center(i, j, k) + g.spec.voxel_size * Vec3(x, y, z);
    EXPECT_NEAR(sample_trilinear(g, p), cell_poly(g, i, j, k).eval(x, y, z), 1e-12);
  }
}

TEST(Trilinear, ExactAtVoxelCentersAndOneOutside) {
  const TsdfGrid g = random_grid(4, 5);
  for (int k = 0; k < g.spec.dims[2]; ++k)
    for (int j = 0; j < g.spec.dims[1]; ++j)
      for (int i = 0; i < g.spec.dims[0]; ++i)
        EXPECT_NEAR(sample_trilinear(g, g.spec.voxel_center(i, j, k)), g.value(i, j, k), 1e-12);
  EXPECT_EQ(sample_trilinear(g, g.spec.origin - Vec3::Constant(0.01)), 1.0);
  EXPECT_EQ(sample_trilinear(g, g.spec.upper_corner() + Vec3(0.0, 0.0, 1e-9)), 1.0);
  EXPECT_FALSE(sample_with_support(g, g.spec.origin - Vec3::Constant(0.01)).inside);
}

TEST(Trilinear, ContinuousAcrossCellFaces) {
  const TsdfGrid g = random_grid(5, 9);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const Vec3 face = g.spec.voxel_center(2, 1, 1) +
                      g.spec.voxel_size * Vec3(0.0, u(rng), u(rng));
    const Vec3 dx(1e-10, 0, 0);
    EXPECT_NEAR(sample_trilinear(g, face - dx), sample_trilinear(g, face + dx), 1e-8);
  }
}

TEST(GradientFd, MatchesAnalyticCellGradient) {
  const TsdfGrid g = random_grid(7, 21);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int t = 0; t < 500; ++t) {
    const int i = 1 + static_cast<int>(u(rng) * (g.spec.dims[0] - 4));
    const int j = 1 + static_cast<int>(u(rng) * (g.spec.dims[1] - 4));
    const int k = 1 + static_cast<int>(u(rng) * (g.spec.dims[2] - 4));
    const double x = u(rng), y = u(rng), z = u(rng);
    const Vec3 p = g.spec.voxel_center(i, j, k) + g.spec.voxel_size * Vec3(x, y, z);
    const auto fd = gradient_fd(g, p);
    ASSERT_TRUE(fd.has_value());
    const Vec3 exact = cell_poly(g, i, j, k).grad(x, y, z) / g.spec.voxel_size;
    EXPECT_LT((*fd - exact).norm(), 1e-6 * std::max(1.0, exact.norm()));
  }
}

TEST(GradientFd, NulloptNearBoundary) {
  const TsdfGrid g = random_grid(5, 1);
  EXPECT_FALSE(gradient_fd(g, g.spec.origin + Vec3::Constant(0.5 * g.spec.voxel_size)));
  EXPECT_TRUE(gradient_fd(g, g.spec.voxel_center(2, 2, 2) + Vec3::Constant(0.01)));
}

TEST(BandScheduleTest, FiresAtScheduledIterations) {
  BandSchedule s;
  std::vector<std::pair<int, double>> fired;
  for (int it = 1; it <= 30000; ++it)
    if (auto sig = s.sigma_at(it)) fired.emplace_back(it, *sig);
  ASSERT_EQ(fired.size(), 3u);
  EXPECT_EQ(fired[0], std::make_pair(5000, 1.0));
  EXPECT_EQ(fired[1], std::make_pair(10000, 0.5));
  EXPECT_EQ(fired[2], std::make_pair(15000, 0.25));
  s.fixed_sigma = 1.0;
  EXPECT_EQ(s.sigma_at(15000).value(), 1.0);
}

TEST(BandScheduleTest, ValidateRejectsBadSettings) {
  BandSchedule s;
  s.sigma_sequence = {0.5, 1.0};
  EXPECT_THROW(s.validate(), InvalidInput);
  s = BandSchedule{};
  s.delta = 1.0;
  EXPECT_THROW(s.validate(), InvalidInput);
  s = BandSchedule{};
  s.update_interval = 0;
  EXPECT_THROW(s.validate(), InvalidInput);
}

TEST(Prior, UpdateScalesTruncationBySigma) {
  const AnalyticScene scene = sphere_scene(6, 24);
  std::vector<Gaussian> gs = init_gaussians(scene, 400, InitMode::Surface, 3);
  PriorSettings ps = PriorSettings::for_scene(scene.bounds, 32);
  EXPECT_NEAR(ps.base_truncation, 4.0 * ps.spec.voxel_size, 1e-15);
  BandSchedule sched;
  sched.first_update = 10;
  sched.update_interval = 10;
  EXPECT_FALSE(maybe_update_prior(sched, 9, gs, scene.cameras, ps).has_value());
  const auto up = maybe_update_prior(sched, 20, gs, scene.cameras, ps);
  ASSERT_TRUE(up.has_value());
  EXPECT_EQ(up->sigma, 0.5);
  EXPECT_NEAR(up->grid.truncation, 0.5 * ps.base_truncation, 1e-15);
  EXPECT_EQ(sched.last_update_iter, 20);
}

}  // namespace
}  // namespace splatprior

#include "splatprior/eval.hpp"
#include "splatprior/tsdf.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <random>

namespace splatprior {
namespace {

namespace fs = std::filesystem;

double brute_mean_nn(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double s = 0.0;
  for (const Vec3& p : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& q : b) best = std::min(best, (p - q).norm());
    s += best;
  }
  return s / a.size();
}

std::vector<Vec3> random_points(std::size_t n, std::uint64_t seed, double spread) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, spread);
  std::vector<Vec3> v(n);
  for (Vec3& p : v) p = Vec3(g(rng), 0.3 * g(rng), g(rng));
  return v;
}

TEST(Chamfer, MatchesBruteForce) {
  const auto a = random_points(700, 1, 1.0);
  const auto b = random_points(500, 2, 0.7);
  const double expect = 0.5 * (brute_mean_nn(a, b) + brute_mean_nn(b, a));
  EXPECT_NEAR(chamfer_l1(a, b), expect, 1e-12);
  EXPECT_NEAR(chamfer_l1(a, b), chamfer_l1(b, a), 1e-12);
  EXPECT_EQ(chamfer_l1(a, a), 0.0);
  EXPECT_THROW(chamfer_l1(std::vector<Vec3>{}, b), InvalidInput);
}

TEST(NearestNeighbor, ExactForFarAndDegenerateQueries) {
  const auto pts = random_points(300, 5, 0.2);
  const NearestNeighborGrid grid(pts);
  for (const Vec3& q : {Vec3(10, -4, 3), Vec3(0, 0, 0), Vec3(-0.5, 2, 0.1)}) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& p : pts) best = std::min(best, (p - q).norm());
    EXPECT_DOUBLE_EQ(grid.distance(q), best);
  }
  const std::vector<Vec3> same(20, Vec3(1, 2, 3));
  EXPECT_NEAR(NearestNeighborGrid(same).distance(Vec3(1, 2, 4)), 1.0, 1e-15);
}

TsdfGrid sphere_grid(int res, double radius) {
  return oracles::analytic_sphere_grid({Vec3::Constant(-1.2), Vec3::Constant(1.2)}, res, radius, 3.0);
}

TEST(MarchingCubes, ClosedOrientedManifoldSphere) {
  const TsdfGrid g = sphere_grid(40, 0.9);
  const TriangleMesh m = extract_mesh(g);
  ASSERT_FALSE(m.empty());
  std::map<std::pair<int, int>, int> directed;
  for (const auto& f : m.faces) {
    for (int e = 0; e < 3; ++e) ++directed[{f[e], f[(e + 1) % 3]}];
    const Vec3 a = m.vertices[f[0]], b = m.vertices[f[1]], c = m.vertices[f[2]];
    const Vec3 n = (b - a).cross(c - a);
    const Vec3 centroid = (a + b + c) / 3.0;
    if (n.norm() > 1e-12) EXPECT_GT(n.dot(centroid), 0.0);
  }
  // each directed edge once and its reverse once: closed and consistently oriented
  for (const auto& [e, count] : directed) {
    EXPECT_EQ(count, 1);
    const auto rev = directed.find({e.second, e.first});
    ASSERT_NE(rev, directed.end());
  }
  const long v = static_cast<long>(m.vertices.size());
  const long f = static_cast<long>(m.faces.size());
  const long e = static_cast<long>(directed.size()) / 2;
  EXPECT_EQ(v - e + f, 2);
  for (const Vec3& p : m.vertices) EXPECT_NEAR(p.norm(), 0.9, g.spec.voxel_size);
  EXPECT_NEAR(m.area(), 4.0 * M_PI * 0.81, 0.03 * 4.0 * M_PI * 0.81);
}

TEST(MarchingCubes, TableOnlyUsesCrossingEdges) {
  const auto& table = marching_cubes_table();
  const auto& edges = cube_edges();
  ASSERT_EQ(table.size(), 256u);
  EXPECT_TRUE(table[0].empty());
  EXPECT_TRUE(table[255].empty());
  for (int c = 0; c < 256; ++c) {
    std::set<int> used;
    for (const auto& tri : table[c])
      for (int e : tri) {
        const bool a = (c >> edges[e][0]) & 1, b = (c >> edges[e][1]) & 1;
        EXPECT_NE(a, b) << "case " << c << " edge " << e;
        used.insert(e);
      }
    for (int e = 0; e < 12; ++e) {
      const bool crossing = ((c >> edges[e][0]) & 1) != ((c >> edges[e][1]) & 1);
      EXPECT_EQ(crossing, used.count(e) == 1) << "case " << c << " edge " << e;
    }
  }
}

TEST(MarchingCubes, SkipsUnobservedCells) {
  TsdfGrid g = sphere_grid(20, 0.8);
  std::fill(g.weights.begin(), g.weights.end(), 0.0f);
  EXPECT_TRUE(extract_mesh(g).empty());
}

TEST(Ply, RoundTripAndSampling) {
  TriangleMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  m.faces = {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}};
  const fs::path p = fs::temp_directory_path() / "splatprior_unit_mesh.ply";
  write_ply(p, m);
  const TriangleMesh back = read_ply(p);
  ASSERT_EQ(back.vertices.size(), 4u);
  EXPECT_EQ(back.faces, m.faces);
  EXPECT_EQ(back.vertices[3], m.vertices[3]);
  const auto s = sample_mesh(m, 2000, 1);
  ASSERT_EQ(s.size(), 2000u);
  std::size_t slanted = 0;
  for (const Vec3& x : s) {
    EXPECT_GE(x.minCoeff(), -1e-12);
    EXPECT_LE(x.sum(), 1.0 + 1e-12);
    const bool on_axis_face = std::abs(x.x()) < 1e-12 || std::abs(x.y()) < 1e-12 || std::abs(x.z()) < 1e-12;
    if (!on_axis_face) {
      EXPECT_NEAR(x.sum(), 1.0, 1e-12);
      ++slanted;
    }
  }
  // the slanted face holds sqrt(3) / (3 + sqrt(3)) of the area
  const double frac = std::sqrt(3.0) / (3.0 + std::sqrt(3.0));
  EXPECT_NEAR(static_cast<double>(slanted) / 2000.0, frac, 0.05);
}

TEST(Psnr, KnownValueAndCap) {
  ImageRGB a(4, 4, 3, 0.5), b(4, 4, 3, 0.6);
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
  EXPECT_EQ(psnr(a, a), kPsnrCap);
}

TEST(Metrics, JsonHasEveryKey) {
  const fs::path p = fs::temp_directory_path() / "splatprior_unit_metrics.json";
  write_metrics_json(p, {{"chamfer_l1", 0.125}, {"psnr", 31.5}});
  std::ifstream in(p);
  const nlohmann::json j = nlohmann::json::parse(in);
  EXPECT_EQ(j.at("chamfer_l1").get<double>(), 0.125);
  EXPECT_EQ(j.at("psnr").get<double>(), 31.5);
}

}  // namespace
}  // namespace splatprior

#include "splatprior/constraints.hpp"
#include "splatprior/eval.hpp"
#include "splatprior/losses.hpp"
#include "splatprior/renderer.hpp"
#include "splatprior/scenes.hpp"
#include "splatprior/tsdf.hpp"

#include <benchmark/benchmark.h>

#include <map>

namespace splatprior {
namespace {

struct Fixture {
  AnalyticScene scene;
  std::vector<CameraView> views;
  std::vector<Gaussian> gaussians;

  explicit Fixture(int count) {
    RigSettings rig;
    rig.views = 4;
    scene = make_scene(Shape{}, rig);
    views = render_ground_truth(scene);
    gaussians = init_gaussians(scene, count, InitMode::Surface, 1);
  }
};

const Fixture& fixture(int count) {
  static std::map<int, Fixture> cache;
  auto it = cache.find(count);
  if (it == cache.end()) it = cache.emplace(count, Fixture(count)).first;
  return it->second;
}

TsdfGrid fused_grid(int resolution) {
  const Fixture& f = fixture(16);
  std::vector<DepthMap> depths;
  for (const CameraView& v : f.views) depths.push_back(v.gt_depth);
  const GridSpec spec = GridSpec::covering(f.scene.bounds.padded(0.05), resolution);
  return fuse_depth_maps(f.scene.cameras, depths, spec, 4.0 * spec.voxel_size);
}

void BM_RenderView(benchmark::State& state) {
  const Fixture& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(render_view(f.gaussians, f.scene.cameras[0]));
}
BENCHMARK(BM_RenderView)->Arg(1000)->Arg(6000)->Unit(benchmark::kMillisecond);

void BM_RenderBackward(benchmark::State& state) {
  const Fixture& f = fixture(static_cast<int>(state.range(0)));
  const Camera& cam = f.scene.cameras[0];
  const RenderOutput r = render_view(f.gaussians, cam);
  RenderGrad g(r);
  mae(r.rgb, f.views[0].gt_rgb, &g.rgb);
  for (auto _ : state) benchmark::DoNotOptimize(render_backward(f.gaussians, cam, r, g));
}
BENCHMARK(BM_RenderBackward)->Arg(1000)->Arg(6000)->Unit(benchmark::kMillisecond);

void BM_MultiviewNcc(benchmark::State& state) {
  const Fixture& f = fixture(6000);
  const RenderOutput r = render_view(f.gaussians, f.scene.cameras[0]);
  for (auto _ : state) {
    RenderGrad g(r);
    benchmark::DoNotOptimize(multiview_ncc(r, f.scene.cameras[0], f.views[0].gt_rgb,
                                           f.scene.cameras[1], f.views[1].gt_rgb, 0.5, &g));
  }
}
BENCHMARK(BM_MultiviewNcc)->Unit(benchmark::kMillisecond);

void BM_Fusion(benchmark::State& state) {
  const int res = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fused_grid(res));
}
BENCHMARK(BM_Fusion)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_ClassifyAll(benchmark::State& state) {
  const TsdfGrid grid = fused_grid(128);
  const Fixture& f = fixture(6000);
  for (auto _ : state) benchmark::DoNotOptimize(classify_all(grid, 0.3, f.gaussians));
}
BENCHMARK(BM_ClassifyAll)->Unit(benchmark::kMillisecond);

void BM_MarchingCubes(benchmark::State& state) {
  const TsdfGrid grid = fused_grid(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(extract_mesh(grid));
}
BENCHMARK(BM_MarchingCubes)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace splatprior

BENCHMARK_MAIN();

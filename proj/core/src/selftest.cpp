#include "splatprior/selftest.hpp"

#include "splatprior/constraints.hpp"
#include "splatprior/eval.hpp"
#include "splatprior/losses.hpp"
#include "splatprior/optimizer.hpp"
#include "splatprior/renderer.hpp"
#include "splatprior/scenes.hpp"
#include "splatprior/tsdf.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <sstream>

namespace splatprior {

namespace {

Quat random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Quat q(n(rng), n(rng), n(rng), n(rng));
  return q / q.norm();
}

std::vector<Gaussian> random_scene(std::mt19937_64& rng, int count) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Gaussian> gs(count);
  for (Gaussian& g : gs) {
    g.center = Vec3(0.3 * u(rng), 0.3 * u(rng), 0.5 * u(rng));
    g.log_scale = Vec3(std::log(0.4), std::log(0.3), std::log(0.03));
    g.rotation = random_quat(rng);
    g.opacity_logit = u(rng);
    g.color = Vec3(0.5 + 0.4 * u(rng), 0.5, 0.5 - 0.4 * u(rng));
  }
  return gs;
}

Camera test_camera(int size) {
  Intrinsics k{1.2 * size, 1.2 * size, 0.5 * (size - 1), 0.5 * (size - 1)};
  return look_at(Vec3(0.0, 0.0, -3.0), Vec3::Zero(), Vec3::UnitY(), k, size, size);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

SelftestResult check(const std::string& name, const std::function<std::string()>& body) {
  SelftestResult r{name, true, ""};
  try {
    r.detail = body();
    if (!r.detail.empty()) r.passed = false;
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  return r;
}

}  // namespace

std::vector<SelftestResult> run_selftest(std::uint64_t seed) {
  std::vector<SelftestResult> out;
  std::mt19937_64 rng(seed);

  out.push_back(check("rotation frames are orthonormal", [&]() -> std::string {
    for (int i = 0; i < 200; ++i) {
      const Mat3 r = quat_to_rotation(random_quat(rng));
      const double err = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
      if (err > 1e-9) return "max deviation " + fmt(err);
    }
    return {};
  }));

  out.push_back(check("transmittance telescopes", [&]() -> std::string {
    const auto gs = random_scene(rng, 8);
    const RenderOptions opt{.min_transmittance = 0.0};
    const RenderOutput r = render_view(gs, test_camera(12), opt);
    for (int y = 0; y < r.height; ++y)
      for (int x = 0; x < r.width; ++x) {
        double t = 1.0;
        for (const BlendRecord& rec : r.records_at(x, y)) t *= 1.0 - rec.alpha;
        if (std::abs(r.alpha(x, y) + t - 1.0) > 1e-6) return "pixel residual too large";
      }
    return {};
  }));

  out.push_back(check("homography round trip", [&]() -> std::string {
    const Camera a = test_camera(16);
    Intrinsics k = a.intrinsics;
    const Camera b = look_at(Vec3(0.5, 0.2, -2.8), Vec3::Zero(), Vec3::UnitY(), k, 16, 16);
    const auto h = compute_homography(a, b, Vec3(0.1, -0.2, 1.0).normalized(), 2.5);
    if (!h) return "degenerate plane";
    const double err =
        (h->inverse().matrix * h->matrix - Mat3::Identity()).cwiseAbs().maxCoeff();
    return err < 1e-9 ? std::string() : "residual " + fmt(err);
  }));

  out.push_back(check("fusion idempotence and range", [&]() -> std::string {
    const Camera cam = test_camera(16);
    DepthMap d(16, 16);
    for (float& v : d.data) v = 3.0f;
    const Aabb box{Vec3::Constant(-0.5), Vec3::Constant(0.5)};
    const GridSpec spec = GridSpec::covering(box, 12);
    const Camera cams1[] = {cam};
    const Camera cams2[] = {cam, cam};
    const DepthMap d1[] = {d};
    const DepthMap d2[] = {d, d};
    const TsdfGrid g1 = fuse_depth_maps(cams1, d1, spec, 0.2);
    const TsdfGrid g2 = fuse_depth_maps(cams2, d2, spec, 0.2);
    for (std::size_t i = 0; i < g1.values.size(); ++i) {
      if (g1.values[i] != g2.values[i]) return "values differ after double fusion";
      if (std::abs(g1.values[i]) > 1.0f) return "value outside [-1, 1]";
    }
    return {};
  }));

  out.push_back(check("trilinear continuity across faces", [&]() -> std::string {
    GridSpec spec;
    spec.voxel_size = 0.1;
    spec.dims = {4, 4, 4};
    TsdfGrid grid(spec, 0.4);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    for (float& v : grid.values) v = u(rng);
    std::uniform_real_distribution<double> t(0.0, 0.1);
    for (int i = 0; i < 100; ++i) {
      const Vec3 p(0.1, t(rng) + 0.05, t(rng) + 0.05);
      const double a = sample_trilinear(grid, p - Vec3(1e-13, 0, 0));
      const double b = sample_trilinear(grid, p + Vec3(1e-13, 0, 0));
      if (std::abs(a - b) > 1e-11) return "jump " + fmt(a - b);
    }
    return {};
  }));

  out.push_back(check("opacity loss sign and positivity", [&]() -> std::string {
    auto gs = random_scene(rng, 20);
    std::vector<BandLabel> labels(gs.size());
    for (std::size_t j = 0; j < gs.size(); ++j) {
      labels[j] = {j % 2 ? BandRegion::OnSurface : BandRegion::OffSurface, 0.1 * (j % 5)};
    }
    const ScpLoss l = scp_loss(gs, labels);
    if (l.value < 0.0) return "negative loss";
    for (std::size_t j = 0; j < gs.size(); ++j) {
      const bool on = labels[j].region == BandRegion::OnSurface;
      if (on && !(l.grad_logit[j] < 0.0)) return "on-surface gradient not negative";
      if (!on && !(l.grad_logit[j] > 0.0)) return "off-surface gradient not positive";
    }
    return {};
  }));

  out.push_back(check("chamfer symmetry", [&]() -> std::string {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<Vec3> a(300), b(500);
    for (Vec3& p : a) p = Vec3(n(rng), n(rng), n(rng));
    for (Vec3& p : b) p = Vec3(n(rng), n(rng), n(rng)) + Vec3(0.1, 0, 0);
    const double d = std::abs(chamfer_l1(a, b) - chamfer_l1(b, a));
    return d <= 1e-12 ? std::string() : "asymmetry " + fmt(d);
  }));

  out.push_back(check("marching cubes mesh is closed on a sphere", [&]() -> std::string {
    GridSpec spec = GridSpec::covering({Vec3::Constant(-1.3), Vec3::Constant(1.3)}, 24);
    TsdfGrid grid(spec, 4 * spec.voxel_size);
    for (int k = 0; k < spec.dims[2]; ++k)
      for (int j = 0; j < spec.dims[1]; ++j)
        for (int i = 0; i < spec.dims[0]; ++i) {
          const double s = (spec.voxel_center(i, j, k).norm() - 1.0) / grid.truncation;
          grid.values[spec.index(i, j, k)] = static_cast<float>(std::clamp(s, -1.0, 1.0));
          grid.weights[spec.index(i, j, k)] = 1.0f;
        }
    const TriangleMesh mesh = extract_mesh(grid);
    std::map<std::pair<int, int>, int> edges;
    for (const auto& f : mesh.faces)
      for (int e = 0; e < 3; ++e) {
        const int a = f[e], b = f[(e + 1) % 3];
        ++edges[{std::min(a, b), std::max(a, b)}];
      }
    for (const auto& [key, count] : edges)
      if (count != 2) return "edge shared by " + std::to_string(count) + " faces";
    return mesh.empty() ? "empty mesh" : std::string();
  }));

  out.push_back(check("zero gradient leaves parameters unchanged", [&]() -> std::string {
    auto gs = random_scene(rng, 5);
    const auto before = gs;
    AdamState st;
    st.resize(gs.size());
    std::vector<ParamVector> g(gs.size(), ParamVector::Zero());
    adam_step(gs, g, st, ParamVector::Constant(0.1), 0.9, 0.999, 1e-15);
    for (std::size_t j = 0; j < gs.size(); ++j)
      if ((gs[j].pack() - before[j].pack()).cwiseAbs().maxCoeff() > 1e-15) return "moved";
    return {};
  }));

  out.push_back(check("ground truth on-axis depth", [&]() -> std::string {
    Shape sphere;
    RigSettings rig;
    rig.views = 2;
    rig.width = rig.height = 33;
    const AnalyticScene scene = make_scene(sphere, rig);
    const CameraView v = render_ground_truth(scene, scene.cameras[0]);
    const double d = v.gt_depth(16, 16);
    return std::abs(d - 2.0) < 1e-4 ? std::string() : "depth " + fmt(d);
  }));

  return out;
}

}  // namespace splatprior

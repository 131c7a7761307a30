#include "splatprior/scenes.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace splatprior {

ShapeKind parse_shape_kind(const std::string& name) {
  if (name == "sphere") return ShapeKind::Sphere;
  if (name == "box") return ShapeKind::Box;
  if (name == "torus") return ShapeKind::Torus;
  throw InvalidInput("unknown shape '" + name + "' (expected sphere, box or torus)");
}

const char* to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Sphere: return "sphere";
    case ShapeKind::Box: return "box";
    case ShapeKind::Torus: return "torus";
  }
  return "?";
}

double Shape::sdf(const Vec3& p) const {
  const Vec3 q = p - center;
  switch (kind) {
    case ShapeKind::Sphere: return q.norm() - radius;
    case ShapeKind::Box: {
      const Vec3 d = q.cwiseAbs() - half_extents;
      return d.cwiseMax(0.0).norm() + std::min(d.maxCoeff(), 0.0);
    }
    case ShapeKind::Torus: {
      const double ring = std::hypot(q.x(), q.y()) - major_radius;
      return std::hypot(ring, q.z()) - minor_radius;
    }
  }
  return 0.0;
}

Vec3 Shape::normal(const Vec3& p) const {
  const Vec3 q = p - center;
  switch (kind) {
    case ShapeKind::Sphere: return q.normalized();
    case ShapeKind::Torus: {
      const double rho = std::hypot(q.x(), q.y());
      if (rho < 1e-12) return Vec3::UnitZ();
      const Vec3 ring(q.x() / rho * major_radius, q.y() / rho * major_radius, 0.0);
      return (q - ring).normalized();
    }
    case ShapeKind::Box: break;
  }
  const double h = 1e-6 * bounding_radius();
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    Vec3 e = Vec3::Zero();
    e[a] = h;
    g[a] = sdf(p + e) - sdf(p - e);
  }
  return g.normalized();
}

Aabb Shape::bounds() const {
  Vec3 half;
  switch (kind) {
    case ShapeKind::Sphere: half = Vec3::Constant(radius); break;
    case ShapeKind::Box: half = half_extents; break;
    case ShapeKind::Torus:
      half = Vec3(major_radius + minor_radius, major_radius + minor_radius, minor_radius);
      break;
  }
  return {center - half, center + half};
}

double Shape::bounding_radius() const {
  switch (kind) {
    case ShapeKind::Sphere: return radius;
    case ShapeKind::Box: return half_extents.norm();
    case ShapeKind::Torus: return major_radius + minor_radius;
  }
  return 0.0;
}

void Shape::validate() const {
  switch (kind) {
    case ShapeKind::Sphere:
      if (!(radius > 0.0)) throw InvalidInput("sphere radius must be positive");
      break;
    case ShapeKind::Box:
      if (!(half_extents.minCoeff() > 0.0)) throw InvalidInput("box half extents must be positive");
      break;
    case ShapeKind::Torus:
      if (!(minor_radius > 0.0 && major_radius > minor_radius)) {
        throw InvalidInput("torus needs 0 < minor radius < major radius");
      }
      break;
  }
}

Vec3 Checker::albedo(const Vec3& p) const {
  const auto cell = [&](double v) { return static_cast<long long>(std::floor(v / period)); };
  const long long parity = cell(p.x()) + cell(p.y()) + cell(p.z());
  return (parity % 2 == 0) ? color_a : color_b;
}

std::vector<Camera> fibonacci_cameras(const Vec3& target, const RigSettings& rig) {
  if (rig.views < 2) throw InvalidInput("camera rig needs at least 2 views");
  if (rig.width < 2 || rig.height < 2) throw InvalidInput("camera rig image is too small");
  if (!(rig.fov_deg > 0.0 && rig.fov_deg < 180.0)) throw InvalidInput("fov must be in (0, 180)");
  Intrinsics k;
  k.fx = k.fy = 0.5 * rig.width / std::tan(0.5 * rig.fov_deg * std::numbers::pi / 180.0);
  k.cx = 0.5 * (rig.width - 1);
  k.cy = 0.5 * (rig.height - 1);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<Camera> cams;
  cams.reserve(rig.views);
  for (int i = 0; i < rig.views; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / rig.views;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    const Vec3 dir(r * std::cos(phi), r * std::sin(phi), z);
    const Vec3 up = std::abs(dir.z()) > 0.99 ? Vec3::UnitY() : Vec3::UnitZ();
    cams.push_back(look_at(target + rig.distance * dir, target, up, k, rig.width, rig.height));
  }
  return cams;
}

AnalyticScene make_scene(const Shape& shape, const RigSettings& rig, const Checker& checker) {
  shape.validate();
  if (!(checker.period > 0.0)) throw InvalidInput("checker period must be positive");
  AnalyticScene scene;
  scene.shape = shape;
  scene.checker = checker;
  scene.rig = rig;
  scene.cameras = fibonacci_cameras(shape.center, rig);
  for (const Camera& cam : scene.cameras) {
    if (!(shape.sdf(cam.center()) > 0.0)) throw InvalidInput("camera inside the shape");
  }
  scene.bounds = shape.bounds();
  return scene;
}

AnalyticScene scene_from_config(const Config& c) {
  Shape shape;
  shape.kind = parse_shape_kind(c.get_string("scene.shape", "sphere"));
  shape.center = c.get_vec3("scene.center", shape.center);
  shape.radius = c.get_double("scene.radius", shape.radius);
  shape.half_extents = c.get_vec3("scene.half_extents", shape.half_extents);
  shape.major_radius = c.get_double("scene.major_radius", shape.major_radius);
  shape.minor_radius = c.get_double("scene.minor_radius", shape.minor_radius);
  Checker checker;
  checker.period = c.get_double("scene.checker_period", checker.period);
  checker.color_a = c.get_vec3("scene.color_a", checker.color_a);
  checker.color_b = c.get_vec3("scene.color_b", checker.color_b);
  RigSettings rig;
  rig.views = c.get_int("rig.views", rig.views);
  rig.width = c.get_int("rig.width", rig.width);
  rig.height = c.get_int("rig.height", rig.height);
  rig.distance = c.get_double("rig.distance", rig.distance);
  rig.fov_deg = c.get_double("rig.fov_deg", rig.fov_deg);
  return make_scene(shape, rig, checker);
}

namespace {

struct TraceHit {
  bool hit = false;
  double t = 0.0;
};

TraceHit sphere_trace(const Shape& shape, const Vec3& origin, const Vec3& dir) {
  const double rb = 1.01 * shape.bounding_radius();
  const Vec3 oc = origin - shape.center;
  const double b = oc.dot(dir);
  const double disc = b * b - (oc.squaredNorm() - rb * rb);
  if (disc < 0.0) return {};
  const double root = std::sqrt(disc);
  const double t_exit = -b + root;
  if (t_exit <= 0.0) return {};
  double t = std::max(0.0, -b - root);
  const double tol = kTraceTolerance * shape.bounding_radius();
  for (int step = 0; step < kTraceSteps; ++step) {
    const double d = shape.sdf(origin + t * dir);
    if (d < tol) return {true, t};
    t += d;
    if (t > t_exit) return {};
  }
  return {};
}

}  // namespace

CameraView render_ground_truth(const AnalyticScene& scene, const Camera& camera) {
  CameraView view;
  view.camera = camera;
  view.gt_rgb = ImageRGB(camera.width, camera.height, 3);
  view.gt_depth = DepthMap(camera.width, camera.height);
  const Vec3 origin = camera.center();
#pragma omp parallel for schedule(dynamic, 4)
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      const Vec3 d = camera.pixel_direction(x, y);
      const double len = d.norm();
      const Vec3 dir = d / len;
      const TraceHit h = sphere_trace(scene.shape, origin, dir);
      if (!h.hit) continue;
      const Vec3 p = origin + h.t * dir;
      view.gt_depth(x, y) = static_cast<float>(h.t / len);
      const double lambert = std::max(0.0, -scene.shape.normal(p).dot(dir));
      const Vec3 c = scene.checker.albedo(p) * lambert;
      for (int ch = 0; ch < 3; ++ch) view.gt_rgb(x, y, ch) = std::clamp(c[ch], 0.0, 1.0);
    }
  }
  return view;
}

std::vector<CameraView> render_ground_truth(const AnalyticScene& scene) {
  std::vector<CameraView> views;
  views.reserve(scene.cameras.size());
  for (const Camera& cam : scene.cameras) views.push_back(render_ground_truth(scene, cam));
  return views;
}

namespace {

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    const Vec3 v(n(rng), n(rng), n(rng));
    const double len = v.norm();
    if (len > 1e-12) return v / len;
  }
}

Vec3 sample_surface(const Shape& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  switch (s.kind) {
    case ShapeKind::Sphere: return s.center + s.radius * random_unit(rng);
    case ShapeKind::Box: {
      const Vec3& h = s.half_extents;
      const double areas[3] = {h.y() * h.z(), h.x() * h.z(), h.x() * h.y()};
      const double total = areas[0] + areas[1] + areas[2];
      double pick = u01(rng) * total;
      int axis = 0;
      while (axis < 2 && pick > areas[axis]) pick -= areas[axis++];
      Vec3 q;
      for (int a = 0; a < 3; ++a) q[a] = (2.0 * u01(rng) - 1.0) * h[a];
      q[axis] = u01(rng) < 0.5 ? -h[axis] : h[axis];
      return s.center + q;
    }
    case ShapeKind::Torus: {
      const double two_pi = 2.0 * std::numbers::pi;
      const double big = s.major_radius, small = s.minor_radius;
      double v = 0.0;
      for (;;) {
        v = two_pi * u01(rng);
        if (u01(rng) * (big + small) <= big + small * std::cos(v)) break;
      }
      const double u = two_pi * u01(rng);
      const double ring = big + small * std::cos(v);
      return s.center + Vec3(ring * std::cos(u), ring * std::sin(u), small * std::sin(v));
    }
  }
  return s.center;
}

Quat to_quat(const Eigen::Quaterniond& q) { return {q.w(), q.x(), q.y(), q.z()}; }

}  // namespace

std::vector<Gaussian> init_gaussians(const AnalyticScene& scene, int count, InitMode mode,
                                     std::uint64_t seed) {
  if (count < 16) throw InvalidInput("init_gaussians: count must be >= 16");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const Aabb box = scene.bounds.padded(0.05);
  const double in_plane = box.diagonal() / (std::cbrt(static_cast<double>(count)) * 4.0);
  const Vec3 log_scale(std::log(in_plane), std::log(in_plane), std::log(0.1 * in_plane));
  std::vector<Gaussian> out(static_cast<std::size_t>(count));
  for (Gaussian& g : out) {
    if (mode == InitMode::Random) {
      for (int a = 0; a < 3; ++a) g.center[a] = box.min[a] + u01(rng) * (box.max[a] - box.min[a]);
      std::normal_distribution<double> n(0.0, 1.0);
      Quat q(n(rng), n(rng), n(rng), n(rng));
      g.rotation = q / q.norm();
    } else {
      g.center = sample_surface(scene.shape, rng);
      const Vec3 nrm = scene.shape.normal(g.center);
      g.rotation = to_quat(Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), nrm).normalized());
    }
    g.log_scale = log_scale;
    g.opacity_logit = 0.1;
    g.color = Vec3::Constant(0.5);
  }
  return out;
}

std::vector<Vec3> chamfer_pointcloud(const AnalyticScene& scene, int samples, std::uint64_t seed) {
  if (samples < 1000) throw InvalidInput("chamfer_pointcloud: need at least 1000 samples");
  std::mt19937_64 rng(seed);
  std::vector<Vec3> pts(static_cast<std::size_t>(samples));
  for (Vec3& p : pts) p = sample_surface(scene.shape, rng);
  return pts;
}

}  // namespace splatprior

#pragma once

#include "splatprior/config.hpp"
#include "splatprior/core.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace splatprior {

enum class ShapeKind { Sphere, Box, Torus };

ShapeKind parse_shape_kind(const std::string& name);
const char* to_string(ShapeKind kind);

/// Analytic solid. The torus lies in the xy plane around its center.
struct Shape {
  ShapeKind kind = ShapeKind::Sphere;
  Vec3 center = Vec3::Zero();
  double radius = 1.0;                       ///< sphere
  Vec3 half_extents = Vec3::Constant(0.75);  ///< box
  double major_radius = 0.8;                 ///< torus
  double minor_radius = 0.3;                 ///< torus

  [[nodiscard]] double sdf(const Vec3& p) const;
  [[nodiscard]] Vec3 normal(const Vec3& p) const;
  [[nodiscard]] Aabb bounds() const;
  /// Radius of the bounding sphere around the center.
  [[nodiscard]] double bounding_radius() const;
  void validate() const;
};

struct Checker {
  double period = 0.25;
  Vec3 color_a{0.9, 0.65, 0.3};
  Vec3 color_b{0.2, 0.35, 0.8};

  [[nodiscard]] Vec3 albedo(const Vec3& p) const;
};

struct RigSettings {
  int views = 20;
  int width = 96;
  int height = 96;
  double distance = 3.0;  ///< camera distance from the shape center
  double fov_deg = 50.0;
};

struct AnalyticScene {
  Shape shape;
  Checker checker;
  RigSettings rig;
  std::vector<Camera> cameras;
  Aabb bounds;
};

/// Cameras on a Fibonacci sphere around `target`, all looking at it.
std::vector<Camera> fibonacci_cameras(const Vec3& target, const RigSettings& rig);

/// Throws InvalidInput when fewer than 2 views are requested or a camera is inside the shape.
AnalyticScene make_scene(const Shape& shape, const RigSettings& rig, const Checker& checker = {});

/// Reads the [scene] and [rig] sections.
AnalyticScene scene_from_config(const Config& config);

inline constexpr int kTraceSteps = 64;
inline constexpr double kTraceTolerance = 1e-5;

/// Sphere-traced ground truth for one camera. Missed pixels get depth 0 and a black color.
CameraView render_ground_truth(const AnalyticScene& scene, const Camera& camera);
std::vector<CameraView> render_ground_truth(const AnalyticScene& scene);

enum class InitMode { Random, Surface };

/// Random mode: centers uniform in the padded bounding box; surface mode:
/// centers on the analytic surface with the plane normal along the surface normal.
std::vector<Gaussian> init_gaussians(const AnalyticScene& scene, int count, InitMode mode,
                                     std::uint64_t seed);

/// Area-uniform samples on the analytic surface.
std::vector<Vec3> chamfer_pointcloud(const AnalyticScene& scene, int samples, std::uint64_t seed);

}  // namespace splatprior

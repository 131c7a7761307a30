#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace splatprior {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Quaternion stored as (w, x, y, z).
using Quat = Eigen::Vector4d;

/// Raised when an operation receives arguments that violate its contract.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for file and stream failures; the message carries the offending path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Rasters
// ---------------------------------------------------------------------------

/// Dense row-major image with interleaved channels.
template <typename T>
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> data;

  Raster() = default;
  Raster(int w, int h, int c = 1, T fill = T{})
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, fill) {}

  [[nodiscard]] bool empty() const { return data.empty(); }
  [[nodiscard]] std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * height;
  }
  [[nodiscard]] std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  T& operator()(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  const T& operator()(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
  [[nodiscard]] bool same_shape(const Raster& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

using ImageRGB = Raster<double>;
/// Depth raster; non-positive or non-finite entries are invalid.
using DepthMap = Raster<float>;

[[nodiscard]] inline bool depth_valid(float d) { return d > 0.0f && d < 1e30f; }

// ---------------------------------------------------------------------------
// Rotations
// ---------------------------------------------------------------------------

/// Rotation matrix of a quaternion. The input is normalized first; a zero
/// quaternion throws InvalidInput.
Mat3 quat_to_rotation(const Quat& q);

/// Hamilton product a * b.
Quat quat_multiply(const Quat& a, const Quat& b);

/// Quaternion for a rotation of `angle` radians about `axis`.
Quat quat_from_axis_angle(const Vec3& axis, double angle);

/// Vector-Jacobian product of quat_to_rotation: given dL/dR returns dL/dq for
/// the unnormalized input quaternion q.
Quat rotation_vjp(const Quat& q, const Mat3& grad_rotation);

// ---------------------------------------------------------------------------
// Gaussians
// ---------------------------------------------------------------------------

inline constexpr int kParamCount = 14;
inline constexpr int kCenterOffset = 0;
inline constexpr int kLogScaleOffset = 3;
inline constexpr int kRotationOffset = 6;
inline constexpr int kOpacityOffset = 10;
inline constexpr int kColorOffset = 11;

using ParamVector = Eigen::Matrix<double, kParamCount, 1>;

[[nodiscard]] inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
[[nodiscard]] inline double logit(double p) { return std::log(p / (1.0 - p)); }

struct Gaussian {
  Vec3 center = Vec3::Zero();
  Vec3 log_scale = Vec3::Zero();
  Quat rotation = Quat(1.0, 0.0, 0.0, 0.0);
  double opacity_logit = 0.0;
  Vec3 color = Vec3::Constant(0.5);

  [[nodiscard]] Vec3 scale() const { return log_scale.array().exp(); }
  [[nodiscard]] double opacity() const { return sigmoid(opacity_logit); }
  [[nodiscard]] Mat3 rotation_matrix() const { return quat_to_rotation(rotation); }
  /// Axis with the smallest activated scale; ties go to the lowest index.
  [[nodiscard]] int normal_axis() const;

  [[nodiscard]] ParamVector pack() const;
  static Gaussian unpack(const ParamVector& p);
};

struct Plane {
  Vec3 normal;
  Vec3 point;
};

/// Plane of a planar Gaussian: normal is the rotation column of the minimum
/// scale axis, point is the center. When `viewer` is given the normal is
/// flipped to face it.
Plane gaussian_plane(const Gaussian& g);
Plane gaussian_plane(const Gaussian& g, const Vec3& viewer);

// ---------------------------------------------------------------------------
// Cameras
// ---------------------------------------------------------------------------

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  [[nodiscard]] Mat3 matrix() const;
  [[nodiscard]] Mat3 inverse() const;
};

/// Pinhole camera with world-to-camera pose x_cam = R * x_world + T.
/// Pixel (x, y) has its center at image coordinates (x, y).
struct Camera {
  Intrinsics intrinsics;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  int width = 0;
  int height = 0;

  [[nodiscard]] Vec3 center() const { return -rotation.transpose() * translation; }
  /// World-space direction through pixel coordinates (u, v) whose camera-z
  /// component is 1, so the ray parameter equals camera depth.
  [[nodiscard]] Vec3 pixel_direction(double u, double v) const;
  /// Throws InvalidInput if intrinsics are singular or R is not a rotation.
  void validate() const;
};

struct Projection {
  Vec2 pixel;
  double depth;
};

/// Perspective projection of a world point. Depth may be non-positive; callers cull.
Projection project_point(const Intrinsics& k, const Mat3& r, const Vec3& t, const Vec3& x);
inline Projection project_point(const Camera& cam, const Vec3& x) {
  return project_point(cam.intrinsics, cam.rotation, cam.translation, x);
}

/// Camera looking from `eye` at `target`; image y axis points along -up.
Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, const Intrinsics& k,
               int width, int height);

struct CameraView {
  Camera camera;
  ImageRGB gt_rgb;    ///< H x W x 3 in [0, 1]
  DepthMap gt_depth;  ///< invalid pixels hold 0
};

struct Ray {
  Vec3 origin;
  Vec3 direction;

  /// Normalizes the direction; throws InvalidInput on a zero direction.
  static Ray make(const Vec3& origin, const Vec3& direction);
  [[nodiscard]] Vec3 at(double t) const { return origin + t * direction; }
};

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  [[nodiscard]] Vec3 extent() const { return max - min; }
  [[nodiscard]] Vec3 center() const { return 0.5 * (min + max); }
  [[nodiscard]] double diagonal() const { return extent().norm(); }
  [[nodiscard]] Aabb padded(double fraction) const;
  [[nodiscard]] bool contains(const Vec3& p) const;
};

}  // namespace splatprior

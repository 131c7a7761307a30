#include "splatprior/core.hpp"

#include <algorithm>
#include <cmath>

namespace splatprior {

Mat3 quat_to_rotation(const Quat& q) {
  const double n = q.norm();
  if (!(n > 1e-12)) throw InvalidInput("quat_to_rotation: zero-norm quaternion");
  const double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Quat quat_multiply(const Quat& a, const Quat& b) {
  return {a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
          a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
          a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
          a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]};
}

Quat quat_from_axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (!(n > 0.0)) throw InvalidInput("quat_from_axis_angle: zero axis");
  const Vec3 a = axis / n * std::sin(0.5 * angle);
  return {std::cos(0.5 * angle), a.x(), a.y(), a.z()};
}

Quat rotation_vjp(const Quat& q, const Mat3& g) {
  const double n = q.norm();
  if (!(n > 1e-12)) throw InvalidInput("rotation_vjp: zero-norm quaternion");
  const Quat u = q / n;
  const double w = u[0], x = u[1], y = u[2], z = u[3];
  Quat gu;
  gu[0] = 2 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) +
               x * g(2, 1));
  gu[1] = 2 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2 * x * g(1, 1) - w * g(1, 2) +
               z * g(2, 0) + w * g(2, 1) - 2 * x * g(2, 2));
  gu[2] = 2 * (-2 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) -
               w * g(2, 0) + z * g(2, 1) - 2 * y * g(2, 2));
  gu[3] = 2 * (-2 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) -
               2 * z * g(1, 1) + y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
  // project through q / |q|
  return (gu - u * u.dot(gu)) / n;
}

int Gaussian::normal_axis() const {
  int axis = 0;
  for (int i = 1; i < 3; ++i) {
    if (log_scale[i] < log_scale[axis]) axis = i;
  }
  return axis;
}

ParamVector Gaussian::pack() const {
  ParamVector p;
  p.segment<3>(kCenterOffset) = center;
  p.segment<3>(kLogScaleOffset) = log_scale;
  p.segment<4>(kRotationOffset) = rotation;
  p[kOpacityOffset] = opacity_logit;
  p.segment<3>(kColorOffset) = color;
  return p;
}

Gaussian Gaussian::unpack(const ParamVector& p) {
  Gaussian g;
  g.center = p.segment<3>(kCenterOffset);
  g.log_scale = p.segment<3>(kLogScaleOffset);
  g.rotation = p.segment<4>(kRotationOffset);
  g.opacity_logit = p[kOpacityOffset];
  g.color = p.segment<3>(kColorOffset);
  return g;
}

Plane gaussian_plane(const Gaussian& g) {
  return {g.rotation_matrix().col(g.normal_axis()), g.center};
}

Plane gaussian_plane(const Gaussian& g, const Vec3& viewer) {
  Plane p = gaussian_plane(g);
  if (p.normal.dot(viewer - g.center) < 0.0) p.normal = -p.normal;
  return p;
}

Mat3 Intrinsics::matrix() const {
  Mat3 k;
  k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
  return k;
}

Mat3 Intrinsics::inverse() const {
  Mat3 k;
  k << 1.0 / fx, 0, -cx / fx, 0, 1.0 / fy, -cy / fy, 0, 0, 1;
  return k;
}

Vec3 Camera::pixel_direction(double u, double v) const {
  const Vec3 d_cam((u - intrinsics.cx) / intrinsics.fx, (v - intrinsics.cy) / intrinsics.fy, 1.0);
  return rotation.transpose() * d_cam;
}

void Camera::validate() const {
  if (!(std::abs(intrinsics.fx) > 1e-12 && std::abs(intrinsics.fy) > 1e-12)) {
    throw InvalidInput("camera: singular intrinsics");
  }
  if (width <= 0 || height <= 0) throw InvalidInput("camera: empty image size");
  const double ortho = (rotation * rotation.transpose() - Mat3::Identity()).norm();
  if (ortho > 1e-6 || std::abs(rotation.determinant() - 1.0) > 1e-6) {
    throw InvalidInput("camera: rotation is not orthonormal with det +1");
  }
}

Projection project_point(const Intrinsics& k, const Mat3& r, const Vec3& t, const Vec3& x) {
  const Vec3 c = r * x + t;
  return {Vec2(k.fx * c.x() / c.z() + k.cx, k.fy * c.y() / c.z() + k.cy), c.z()};
}

Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, const Intrinsics& k,
               int width, int height) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) right = forward.cross(std::abs(forward.x()) < 0.9 ? Vec3::UnitX()
                                                                             : Vec3::UnitY());
  right.normalize();
  const Vec3 down = forward.cross(right);
  Camera cam;
  cam.intrinsics = k;
  cam.rotation.row(0) = right;
  cam.rotation.row(1) = down;
  cam.rotation.row(2) = forward;
  cam.translation = -cam.rotation * eye;
  cam.width = width;
  cam.height = height;
  return cam;
}

Ray Ray::make(const Vec3& origin, const Vec3& direction) {
  const double n = direction.norm();
  if (!(n > 0.0)) throw InvalidInput("Ray: zero direction");
  return {origin, direction / n};
}

Aabb Aabb::padded(double fraction) const {
  const Vec3 pad = 0.5 * fraction * extent();
  return {min - pad, max + pad};
}

bool Aabb::contains(const Vec3& p) const {
  return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
}

}  // namespace splatprior

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "mirror_splat/error.hpp"

namespace mirror_splat {

template <typename T> using Vec2 = Eigen::Matrix<T, 2, 1>;
template <typename T> using Vec3 = Eigen::Matrix<T, 3, 1>;
template <typename T> using Vec4 = Eigen::Matrix<T, 4, 1>;
template <typename T> using Mat2 = Eigen::Matrix<T, 2, 2>;
template <typename T> using Mat3 = Eigen::Matrix<T, 3, 3>;
template <typename T> using Mat4 = Eigen::Matrix<T, 4, 4>;
template <typename T> using Mat23 = Eigen::Matrix<T, 2, 3>;

// Infinite plane n.p + d = 0. Consumers expect a unit normal; see normalize_plane.
struct Plane {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double offset = 0.0;

  bool operator==(const Plane&) const = default;
};

inline bool is_normalized(const Plane& plane, double tol = 1e-9) {
  return std::abs(plane.normal.norm() - 1.0) <= tol;
}

inline Plane normalize_plane(const Plane& plane) {
  const double len = plane.normal.norm();
  if (!(len > 1e-12) || !std::isfinite(len) || !std::isfinite(plane.offset)) {
    throw InvalidPlane("plane normal is degenerate (norm " + std::to_string(len) + ")");
  }
  return Plane{plane.normal / len, plane.offset / len};
}

// Signed distance for a normalized plane.
template <typename T>
T plane_point_residual(const Plane& plane, const Vec3<T>& p) {
  return plane.normal.cast<T>().dot(p) + static_cast<T>(plane.offset);
}

// Householder form: p' = p - 2 (n.p + d) n.
template <typename T>
Vec3<T> reflect_point(const Plane& plane, const Vec3<T>& p) {
  const Vec3<T> n = plane.normal.cast<T>();
  return p - T(2) * (n.dot(p) + static_cast<T>(plane.offset)) * n;
}

// Homogeneous reflection about the plane (a, b, c, d):
//   [1-2a^2  -2ab   -2ac   -2ad]
//   [-2ab   1-2b^2  -2bc   -2bd]
//   [-2ac   -2bc   1-2c^2  -2cd]
//   [  0      0      0      1  ]
// Only a reflection when a^2 + b^2 + c^2 = 1.
inline Eigen::Matrix4d mirror_transform(const Plane& plane) {
  if (!is_normalized(plane)) {
    throw PreconditionError("mirror_transform requires a unit-normal plane (norm " +
                            std::to_string(plane.normal.norm()) + ")");
  }
  const double a = plane.normal.x(), b = plane.normal.y(), c = plane.normal.z();
  const double d = plane.offset;
  Eigen::Matrix4d m;
  m << 1 - 2 * a * a, -2 * a * b, -2 * a * c, -2 * a * d,
       -2 * a * b, 1 - 2 * b * b, -2 * b * c, -2 * b * d,
       -2 * a * c, -2 * b * c, 1 - 2 * c * c, -2 * c * d,
       0, 0, 0, 1;
  return m;
}

// Pinhole intrinsics. Pixel (x, y) has its center at (x + 0.5, y + 0.5).
struct CameraModel {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.5;
  double cy = 0.5;
  int width = 1;
  int height = 1;
  double znear = 0.01;

  bool valid() const {
    return fx > 0 && fy > 0 && width > 0 && height > 0 && cx > 0 && cx < width && cy > 0 &&
           cy < height && znear > 0;
  }
  bool operator==(const CameraModel&) const = default;
};

// World-to-camera rigid transform; the rotation block may be improper.
struct PoseTransform {
  Eigen::Matrix4d world_to_camera = Eigen::Matrix4d::Identity();

  Eigen::Matrix3d rotation() const { return world_to_camera.topLeftCorner<3, 3>(); }
  Eigen::Vector3d translation() const { return world_to_camera.topRightCorner<3, 1>(); }

  Eigen::Matrix4d camera_to_world() const {
    Eigen::Matrix4d inv = Eigen::Matrix4d::Identity();
    const Eigen::Matrix3d rt = rotation().transpose();
    inv.topLeftCorner<3, 3>() = rt;
    inv.topRightCorner<3, 1>() = -rt * translation();
    return inv;
  }

  Eigen::Vector3d center() const { return -rotation().transpose() * translation(); }

  double handedness() const { return rotation().determinant(); }

  bool valid(double tol = 1e-9) const {
    const Eigen::RowVector4d bottom = world_to_camera.row(3);
    if (bottom != Eigen::RowVector4d(0, 0, 0, 1)) return false;
    const Eigen::Matrix3d r = rotation();
    if (!((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol)) {
      return false;
    }
    return std::abs(std::abs(r.determinant()) - 1.0) <= tol;
  }

  static PoseTransform from_camera_to_world(const Eigen::Matrix4d& c2w) {
    PoseTransform cam_to_world{c2w};
    return PoseTransform{cam_to_world.camera_to_world()};
  }

  bool operator==(const PoseTransform&) const = default;
};

// Camera looking from `eye` toward `target`; image y points along -up.
inline PoseTransform look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                             const Eigen::Vector3d& up) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d right = forward.cross(up);
  if (right.norm() < 1e-9) right = forward.cross(Eigen::Vector3d::UnitX());
  right.normalize();
  const Eigen::Vector3d down = forward.cross(right);
  Eigen::Matrix4d c2w = Eigen::Matrix4d::Identity();
  c2w.block<3, 1>(0, 0) = right;
  c2w.block<3, 1>(0, 1) = down;
  c2w.block<3, 1>(0, 2) = forward;
  c2w.block<3, 1>(0, 3) = eye;
  return PoseTransform::from_camera_to_world(c2w);
}

// Reflects the camera-to-world frame about the plane. For world-to-camera W
// this is W * T_m (T_m is its own inverse).
inline PoseTransform mirror_camera(const Plane& plane, const PoseTransform& pose) {
  PoseTransform out{pose.world_to_camera * mirror_transform(plane)};
  out.world_to_camera.row(3) = Eigen::RowVector4d(0, 0, 0, 1);
  return out;
}

template <typename T>
struct ProjectedGaussian {
  Vec2<T> mean2d;
  Mat2<T> cov2d;
  T view_depth;
};

// d(u, v) / d(x, y, z) of the pinhole map at camera-space point t.
template <typename T>
Mat23<T> perspective_jacobian(const CameraModel& camera, const Vec3<T>& t) {
  const T fx = static_cast<T>(camera.fx), fy = static_cast<T>(camera.fy);
  const T inv_z = T(1) / t.z();
  Mat23<T> j;
  j << fx * inv_z, T(0), -fx * t.x() * inv_z * inv_z,
       T(0), fy * inv_z, -fy * t.y() * inv_z * inv_z;
  return j;
}

template <typename T>
Vec2<T> project_point(const CameraModel& camera, const Vec3<T>& t) {
  return Vec2<T>(static_cast<T>(camera.fx) * t.x() / t.z() + static_cast<T>(camera.cx),
                 static_cast<T>(camera.fy) * t.y() / t.z() + static_cast<T>(camera.cy));
}

// EWA projection of a 3D Gaussian. Returns nullopt (cull) when the camera-space
// depth is at or in front of znear. cov2d excludes the low-pass floor.
template <typename T>
std::optional<ProjectedGaussian<T>> project_gaussian(const CameraModel& camera,
                                                     const PoseTransform& pose,
                                                     const Vec3<T>& mean, const Mat3<T>& cov) {
  const Mat3<T> w = pose.rotation().cast<T>();
  const Vec3<T> t = w * mean + pose.translation().cast<T>();
  if (!(t.z() > static_cast<T>(camera.znear))) return std::nullopt;
  const Mat23<T> jw = perspective_jacobian(camera, t) * w;
  ProjectedGaussian<T> out;
  out.mean2d = project_point(camera, t);
  out.cov2d = jw * cov * jw.transpose();
  out.cov2d(1, 0) = out.cov2d(0, 1);
  out.view_depth = t.z();
  return out;
}

}  // namespace mirror_splat

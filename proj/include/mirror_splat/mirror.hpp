#pragma once

#include <cmath>
#include <optional>

#include "mirror_splat/geometry.hpp"
#include "mirror_splat/image.hpp"
#include "mirror_splat/oracle.hpp"
#include "mirror_splat/plane_fit.hpp"
#include "mirror_splat/rasterizer.hpp"

namespace mirror_splat {

// C_fuse = C_o (1 - M) + C_m M, with the single-channel M broadcast over color.
template <typename T>
Image<T> fuse_images(const Image<T>& original, const Image<T>& mirrored, const Image<T>& mask) {
  require_same_shape(original, mirrored, "fuse_images");
  if (mask.width != original.width || mask.height != original.height || mask.channels != 1)
    throw ShapeMismatch("fuse_images: mask must be single-channel with the image's size");
  Image<T> out(original.width, original.height, original.channels);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      const T m = mask.at(x, y);
      for (int c = 0; c < out.channels; ++c)
        out.at(x, y, c) = original.at(x, y, c) * (T(1) - m) + mirrored.at(x, y, c) * m;
    }
  return out;
}

template <typename T>
struct FuseGradients {
  Image<T> original;
  Image<T> mirrored;
  Image<T> mask;
};

template <typename T>
FuseGradients<T> fuse_images_backward(const Image<T>& original, const Image<T>& mirrored,
                                      const Image<T>& mask, const Image<T>& grad) {
  require_same_shape(original, grad, "fuse_images_backward");
  require_same_shape(original, mirrored, "fuse_images_backward");
  FuseGradients<T> g{Image<T>(grad.width, grad.height, grad.channels),
                     Image<T>(grad.width, grad.height, grad.channels),
                     Image<T>(grad.width, grad.height, 1)};
  for (int y = 0; y < grad.height; ++y)
    for (int x = 0; x < grad.width; ++x) {
      const T m = mask.at(x, y);
      T gm = 0;
      for (int c = 0; c < grad.channels; ++c) {
        const T gc = grad.at(x, y, c);
        g.original.at(x, y, c) = gc * (T(1) - m);
        g.mirrored.at(x, y, c) = gc * m;
        gm += gc * (mirrored.at(x, y, c) - original.at(x, y, c));
      }
      g.mask.at(x, y) = gm;
    }
  return g;
}

// Keeps only Gaussians on the viewer's side of the mirror, more than `margin`
// away from it. Without it the mirror surface itself (and anything behind it)
// would be drawn into the reflected view.
inline ClipPlane viewer_side_clip(const Plane& plane, const PoseTransform& pose, double margin) {
  return ClipPlane{orient_toward(plane, pose.center()), margin};
}

inline RenderOptions mirror_view_options(const Plane& plane, const PoseTransform& pose,
                                         std::optional<double> clip_margin) {
  RenderOptions options;
  if (clip_margin) options.clip = viewer_side_clip(plane, pose, *clip_margin);
  return options;
}

// Render from the camera reflected about `plane`. With a clip margin, only
// Gaussians in front of the mirror (as seen from `pose`) take part.
template <typename T>
RenderOutput<T> render_mirror_view(const GaussianScene<T>& scene, const CameraModel& camera,
                                   const PoseTransform& pose, const Plane& plane,
                                   std::optional<double> clip_margin = std::nullopt,
                                   ForwardState<T>* state = nullptr) {
  return render(scene, camera, mirror_camera(normalize_plane(plane), pose),
                mirror_view_options(plane, pose, clip_margin), state);
}

struct ReflectedRay {
  Eigen::Vector3d hit;
  Eigen::Vector3d direction;  // unit, after reflection
  double distance = 0.0;      // camera center to hit point
};

// Ray through the center of pixel (x, y), reflected at the plane. Empty if the
// ray is parallel to the plane or the plane is behind the camera.
inline std::optional<ReflectedRay> reflect_pixel_ray(const CameraModel& camera,
                                                     const PoseTransform& pose,
                                                     const Plane& plane, double x, double y) {
  const Eigen::Vector3d local((x - camera.cx) / camera.fx, (y - camera.cy) / camera.fy, 1.0);
  const Eigen::Vector3d origin = pose.center();
  const Eigen::Vector3d dir = (pose.rotation().transpose() * local).normalized();
  const double denom = plane.normal.dot(dir);
  if (std::abs(denom) < 1e-12) return std::nullopt;
  const double t = -plane_point_residual(plane, origin) / denom;
  if (!(t > 0)) return std::nullopt;
  ReflectedRay ray;
  ray.hit = origin + t * dir;
  ray.direction = (dir - 2.0 * denom * plane.normal).normalized();
  ray.distance = t;
  return ray;
}

// Reference for the mirrored view: for every pixel with mask > 0.5 the camera
// ray is reflected at the plane and the oracle blends along the reflected ray
// with a one-pixel camera. That camera sits on the unfolded ray at the hit
// point minus the travelled distance, so the pixel footprint keeps growing
// with the total path length. Other pixels are zero.
template <typename T, typename M>
Image<double> reflect_ray_oracle(const GaussianScene<T>& scene, const CameraModel& camera,
                                 const PoseTransform& pose, const Plane& plane,
                                 const Image<M>& mask, std::optional<double> clip_margin = std::nullopt) {
  const Plane unit = normalize_plane(plane);
  if (mask.width != camera.width || mask.height != camera.height || mask.channels != 1)
    throw ShapeMismatch("reflect_ray_oracle: mask does not match the camera");
  Image<double> out(camera.width, camera.height, 3);
  RenderOptions options = mirror_view_options(unit, pose, clip_margin);
  CameraModel pixel_cam;
  pixel_cam.fx = camera.fx;
  pixel_cam.fy = camera.fy;
  pixel_cam.cx = 0.5;
  pixel_cam.cy = 0.5;
  pixel_cam.width = 1;
  pixel_cam.height = 1;
  pixel_cam.znear = camera.znear;
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      if (!(static_cast<double>(mask.at(x, y)) > 0.5)) continue;
      const auto ray = reflect_pixel_ray(camera, pose, unit, x + 0.5, y + 0.5);
      if (!ray) continue;
      const Eigen::Vector3d eye = ray->hit - ray->distance * ray->direction;
      const Eigen::Vector3d up =
          std::abs(ray->direction.z()) < 0.9 ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitX();
      const PoseTransform view = look_at(eye, ray->hit, up);
      const auto px = oracle_render(scene, pixel_cam, view, options);
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = px.color.at(0, 0, c);
    }
  }
  return out;
}

}  // namespace mirror_splat

#pragma once

#include <cmath>

#include "mirror_splat/geometry.hpp"
#include "mirror_splat/random.hpp"
#include "mirror_splat/scene.hpp"

namespace mirror_splat::testing {

inline Eigen::Vector3d random_unit(Rng& rng) {
  Eigen::Vector3d v;
  do {
    v = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
  } while (v.norm() < 1e-6);
  return v.normalized();
}

inline Plane random_plane(Rng& rng) {
  return Plane{random_unit(rng), rng.uniform(-3.0, 3.0)};
}

inline Eigen::Vector4d random_quaternion(Rng& rng) {
  Eigen::Vector4d q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  return q.normalized();
}

inline CameraModel square_camera(int size, double focal) {
  CameraModel cam;
  cam.width = cam.height = size;
  cam.fx = cam.fy = focal;
  cam.cx = cam.cy = size / 2.0;
  cam.znear = 0.01;
  return cam;
}

// Camera on a sphere of radius `dist` around the origin looking at the origin.
inline PoseTransform random_pose(Rng& rng, double dist) {
  const Eigen::Vector3d eye = random_unit(rng) * dist;
  return look_at(eye, Eigen::Vector3d::Zero(), random_unit(rng));
}

// Reflected (improper) copy of a proper pose.
inline PoseTransform random_improper_pose(Rng& rng, double dist) {
  return mirror_camera(random_plane(rng), random_pose(rng, dist));
}

// Random Gaussians in a ball of radius `extent` around the origin.
template <typename T>
GaussianScene<T> random_scene(Rng& rng, int count, double extent, int sh_degree = 2,
                              double scale_lo = 0.05, double scale_hi = 0.3) {
  GaussianScene<T> scene;
  scene.sh_degree = sh_degree;
  for (int i = 0; i < count; ++i) {
    GaussianPrimitive<double> p;
    p.position = random_unit(rng) * extent * std::cbrt(rng.uniform());
    p.rotation = random_quaternion(rng);
    for (int k = 0; k < 3; ++k) p.log_scale[k] = std::log(rng.uniform(scale_lo, scale_hi));
    p.opacity_logit = rng.uniform(-2.0, 3.0);
    for (int k = 0; k < sh_coeff_count(sh_degree); ++k)
      for (int c = 0; c < 3; ++c) p.sh[k][c] = k == 0 ? rng.uniform(-1.5, 1.5) : rng.normal(0.0, 0.2);
    p.mirror_logit = rng.uniform(-4.0, 4.0);
    scene.primitives.push_back(p.cast<T>());
  }
  return scene;
}

}  // namespace mirror_splat::testing

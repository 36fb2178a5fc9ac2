#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "mirror_splat/dataset.hpp"
#include "mirror_splat/mirror.hpp"
#include "mirror_splat/oracle.hpp"
#include "mirror_splat/random.hpp"
#include "mirror_splat/scene.hpp"

namespace mirror_splat {

struct ToySceneConfig {
  int train_views = 30;
  int test_views = 8;
  int width = 64;
  int height = 64;
  double focal = 64.0;
  int sh_degree = 2;

  // Mirror rectangle: center, plane normal and half extents along two in-plane axes.
  Eigen::Vector3d mirror_center = Eigen::Vector3d(0.1, -0.05, 0.05);
  Eigen::Vector3d mirror_normal = Eigen::Vector3d(0.2, 0.1, 1.0);
  double mirror_half_u = 1.0;
  double mirror_half_v = 0.8;
  double mirror_spacing = 0.05;
  double mirror_scale = 0.05;
  double mirror_thickness = 1e-3;
  double mirror_gray = 0.1;

  int clusters = 6;
  int cluster_size = 30;
  double cluster_spread = 0.12;
  double cluster_height_min = 0.8;
  double cluster_height_max = 2.0;

  double camera_distance = 3.5;
  double camera_min_angle_deg = 8.0;
  double camera_max_angle_deg = 35.0;
  double target_jitter = 0.2;
  // When non-empty, these poses replace the sampled ones (train first, then test).
  std::vector<PoseTransform> poses;

  // Gaussians must be this far in front of the mirror to appear in the reflection.
  double clip_margin = 1e-3;
};

struct ToyScene {
  GaussianScene<float> scene;
  Plane plane;
  MirrorDataset dataset;
};

namespace synth_detail {

inline Eigen::Vector3d any_perpendicular(const Eigen::Vector3d& n) {
  const Eigen::Vector3d a = std::abs(n.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  return n.cross(a).normalized();
}

inline Vec4<double> random_rotation(Rng& rng) {
  Vec4<double> q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  return q.normalized();
}

inline Eigen::Vector3d hue_color(double h) {
  const double r = std::abs(h * 6.0 - 3.0) - 1.0;
  const double g = 2.0 - std::abs(h * 6.0 - 2.0);
  const double b = 2.0 - std::abs(h * 6.0 - 4.0);
  return Eigen::Vector3d(r, g, b).cwiseMax(0.0).cwiseMin(1.0);
}

// Quaternion (w, x, y, z) of a rotation matrix.
inline Vec4<double> matrix_to_quaternion(const Eigen::Matrix3d& m) {
  const Eigen::Quaterniond q(m);
  return Vec4<double>(q.w(), q.x(), q.y(), q.z());
}

}  // namespace synth_detail

// Camera-space depth of the pixel ray's hit point on the plane, or +inf.
inline double plane_depth_at_pixel(const CameraModel& camera, const PoseTransform& pose,
                                   const Plane& plane, double x, double y) {
  const Eigen::Vector3d local((x - camera.cx) / camera.fx, (y - camera.cy) / camera.fy, 1.0);
  const Eigen::Vector3d origin = pose.center();
  const Eigen::Vector3d dir = pose.rotation().transpose() * local;
  const double denom = plane.normal.dot(dir);
  if (std::abs(denom) < 1e-12) return std::numeric_limits<double>::infinity();
  const double s = -plane_point_residual(plane, origin) / denom;
  // local has unit z, so the ray parameter is the camera-space depth.
  return s > 0 ? s : std::numeric_limits<double>::infinity();
}

// One ground-truth view: oracle renders fused through the GT mirror, plus mask and depth.
inline ViewRecord synthesize_view(const GaussianScene<float>& scene, const Plane& plane,
                                  const CameraModel& camera, const PoseTransform& pose,
                                  const std::string& name, double clip_margin) {
  const RenderOutput<double> direct = oracle_render(scene, camera, pose);
  const RenderOutput<double> reflected = oracle_render(
      scene, camera, mirror_camera(plane, pose), mirror_view_options(plane, pose, clip_margin));
  const Image<double> fused = fuse_images(direct.color, reflected.color, direct.mask);
  ViewRecord v;
  v.name = name;
  v.camera = camera;
  v.pose = pose;
  v.image = fused.cast<float>();
  v.mask = direct.mask.cast<float>();
  Image<float> depth(camera.width, camera.height, 1);
  for (int y = 0; y < camera.height; ++y)
    for (int x = 0; x < camera.width; ++x) {
      double d = direct.alpha.at(x, y) >= 0.5 ? direct.depth.at(x, y)
                                              : std::numeric_limits<double>::infinity();
      if (direct.mask.at(x, y) > 0.5) d = plane_depth_at_pixel(camera, pose, plane, x + 0.5, y + 0.5);
      depth.at(x, y) = static_cast<float>(d);
    }
  v.depth = std::move(depth);
  return v;
}

inline ToyScene synthesize_toy_scene(std::uint64_t seed, const ToySceneConfig& config = {}) {
  if (config.train_views < 1 || config.train_views + config.test_views < 8)
    throw ConfigError("toy scene needs at least 8 views including at least one training view");
  if (config.width < 32 || config.height < 32)
    throw ConfigError("toy scene images must be at least 32x32");
  if (!config.poses.empty() &&
      static_cast<int>(config.poses.size()) != config.train_views + config.test_views)
    throw ConfigError("explicit pose count does not match the requested view count");
  if (config.sh_degree < 0 || config.sh_degree > kMaxShDegree)
    throw ConfigError("sh_degree must be in [0, 3]");

  using synth_detail::any_perpendicular;
  Rng rng(seed);
  ToyScene out;
  const Eigen::Vector3d n = config.mirror_normal.normalized();
  out.plane = normalize_plane(Plane{n, -n.dot(config.mirror_center)});
  const Eigen::Vector3d u = any_perpendicular(n);
  const Eigen::Vector3d v = n.cross(u);
  Eigen::Matrix3d frame;
  frame << u, v, n;
  const Vec4<double> mirror_rotation = synth_detail::matrix_to_quaternion(frame);

  GaussianScene<double> scene;
  scene.sh_degree = config.sh_degree;
  const int nu = static_cast<int>(std::floor(config.mirror_half_u / config.mirror_spacing));
  const int nv = static_cast<int>(std::floor(config.mirror_half_v / config.mirror_spacing));
  for (int i = -nu; i <= nu; ++i) {
    for (int j = -nv; j <= nv; ++j) {
      GaussianPrimitive<double> p;
      p.position = config.mirror_center + i * config.mirror_spacing * u + j * config.mirror_spacing * v;
      p.rotation = mirror_rotation;
      p.log_scale = Eigen::Vector3d(std::log(config.mirror_scale), std::log(config.mirror_scale),
                                    std::log(config.mirror_thickness));
      p.opacity_logit = 8.0;
      p.sh[0] = Eigen::Vector3d::Constant((config.mirror_gray - 0.5) / kShC0);
      p.mirror_logit = 20.0;
      scene.primitives.push_back(p);
    }
  }
  for (int c = 0; c < config.clusters; ++c) {
    const double h = rng.uniform(config.cluster_height_min, config.cluster_height_max);
    const Eigen::Vector3d center = config.mirror_center + h * n +
                                   rng.uniform(-1.0, 1.0) * config.mirror_half_u * 1.1 * u +
                                   rng.uniform(-1.0, 1.0) * config.mirror_half_v * 1.1 * v;
    const Eigen::Vector3d base = synth_detail::hue_color(rng.uniform());
    for (int k = 0; k < config.cluster_size; ++k) {
      GaussianPrimitive<double> p;
      p.position = center + config.cluster_spread *
                                Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
      p.rotation = synth_detail::random_rotation(rng);
      for (int a = 0; a < 3; ++a) p.log_scale[a] = std::log(rng.uniform(0.03, 0.07));
      p.opacity_logit = 3.0;
      const Eigen::Vector3d rgb =
          (0.15 + 0.75 * base.array()).matrix() + 0.05 * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
      p.sh[0] = (rgb.cwiseMax(0.02).cwiseMin(0.98) - Eigen::Vector3d::Constant(0.5)) / kShC0;
      p.mirror_logit = -20.0;
      scene.primitives.push_back(p);
    }
  }
  out.scene = scene.cast<float>();

  CameraModel camera;
  camera.fx = camera.fy = config.focal;
  camera.cx = config.width / 2.0;
  camera.cy = config.height / 2.0;
  camera.width = config.width;
  camera.height = config.height;

  const int total = config.train_views + config.test_views;
  std::vector<PoseTransform> poses = config.poses;
  if (poses.empty()) {
    const double deg = std::numbers::pi / 180.0;
    for (int k = 0; k < total; ++k) {
      const double theta = rng.uniform(config.camera_min_angle_deg, config.camera_max_angle_deg) * deg;
      const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const Eigen::Vector3d dir =
          std::cos(theta) * n + std::sin(theta) * (std::cos(phi) * u + std::sin(phi) * v);
      const Eigen::Vector3d eye = config.mirror_center + config.camera_distance * dir;
      const Eigen::Vector3d target =
          config.mirror_center + config.target_jitter * (rng.uniform(-1, 1) * u + rng.uniform(-1, 1) * v);
      poses.push_back(look_at(eye, target, v));
    }
  }

  bool any_facing = false;
  for (const auto& pose : poses) {
    const Eigen::Vector3d c = pose.world_to_camera.topLeftCorner<3, 3>() * config.mirror_center +
                              pose.translation();
    if (c.z() > camera.znear && plane_point_residual(out.plane, pose.center()) > 0) any_facing = true;
  }
  if (!any_facing) throw SynthesisError("the mirror is behind every camera");

  for (int k = 0; k < total; ++k) {
    const bool train = k < config.train_views;
    const int index = train ? k : k - config.train_views;
    char name[32];
    std::snprintf(name, sizeof name, "%s_%03d", train ? "train" : "test", index);
    ViewRecord view = synthesize_view(out.scene, out.plane, camera, poses[k], name, config.clip_margin);
    (train ? out.dataset.train_views : out.dataset.test_views).push_back(std::move(view));
  }
  out.dataset.gt_plane = out.plane;
  return out;
}

}  // namespace mirror_splat

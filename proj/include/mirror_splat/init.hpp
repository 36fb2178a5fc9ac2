#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "mirror_splat/dataset.hpp"
#include "mirror_splat/random.hpp"
#include "mirror_splat/scene.hpp"

namespace mirror_splat {

struct Box3 {
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = Eigen::Vector3d::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Eigen::Vector3d& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  bool contains(const Eigen::Vector3d& p, double tol = 0.0) const {
    return (p.array() >= lo.array() - tol).all() && (p.array() <= hi.array() + tol).all();
  }
};

// Far distance for a view: farthest finite GT depth (plus 10%), or twice the
// camera's distance to the world origin when no depth is available.
inline double view_far_distance(const ViewRecord& view) {
  double far = 0;
  if (view.depth) {
    for (float d : view.depth->data)
      if (std::isfinite(d)) far = std::max(far, static_cast<double>(d));
  }
  if (far > 0) return 1.1 * far;
  return std::max(1.0, 2.0 * view.pose.center().norm());
}

inline std::array<Eigen::Vector3d, 8> frustum_corners(const ViewRecord& view) {
  const CameraModel& c = view.camera;
  const Eigen::Matrix4d c2w = view.pose.camera_to_world();
  const double depths[2] = {c.znear, view_far_distance(view)};
  std::array<Eigen::Vector3d, 8> out;
  int k = 0;
  for (double z : depths)
    for (double y : {0.0, static_cast<double>(c.height)})
      for (double x : {0.0, static_cast<double>(c.width)}) {
        const Eigen::Vector3d local((x - c.cx) / c.fx * z, (y - c.cy) / c.fy * z, z);
        out[k++] = (c2w * local.homogeneous()).head<3>();
      }
  return out;
}

inline Box3 frustum_union_box(const MirrorDataset& dataset) {
  Box3 box;
  for (const auto& v : dataset.train_views)
    for (const auto& p : frustum_corners(v)) box.extend(p);
  return box;
}

inline bool inside_frustum(const ViewRecord& view, double far, const Eigen::Vector3d& p) {
  const Eigen::Vector3d t = view.pose.rotation() * p + view.pose.translation();
  const CameraModel& c = view.camera;
  if (!(t.z() > c.znear) || t.z() > far) return false;
  const double u = c.fx * t.x() / t.z() + c.cx, v = c.fy * t.y() / t.z() + c.cy;
  return u >= 0 && u <= c.width && v >= 0 && v <= c.height;
}

namespace init_detail {

// Isotropic Gaussians at `points`, scaled by the mean distance to their
// three nearest neighbours, with DC colors `colors`.
template <typename T>
GaussianScene<T> build_scene(const std::vector<Eigen::Vector3d>& points,
                             const std::vector<Eigen::Vector3d>& colors, int sh_degree) {
  const int n = static_cast<int>(points.size());
  std::vector<double> knn(n, 0.0);
  for (int i = 0; i < n; ++i) {
    std::array<double, 3> best{std::numeric_limits<double>::infinity(),
                               std::numeric_limits<double>::infinity(),
                               std::numeric_limits<double>::infinity()};
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = (points[i] - points[j]).squaredNorm();
      if (d < best[2]) {
        best[2] = d;
        std::sort(best.begin(), best.end());
      }
    }
    double sum = 0;
    int cnt = 0;
    for (double d : best)
      if (std::isfinite(d)) {
        sum += std::sqrt(d);
        ++cnt;
      }
    knn[i] = cnt ? sum / cnt : 0.1;
  }

  GaussianScene<T> scene;
  scene.sh_degree = sh_degree;
  scene.primitives.resize(n);
  for (int i = 0; i < n; ++i) {
    auto& p = scene.primitives[i];
    p.position = points[i].cast<T>();
    p.rotation = Vec4<T>(1, 0, 0, 0);
    p.log_scale = Vec3<T>::Constant(static_cast<T>(std::log(std::max(knn[i], 1e-7))));
    p.opacity_logit = static_cast<T>(logit(0.1));
    p.mirror_logit = static_cast<T>(logit(0.01));
    p.sh[0] = ((colors[i].array() - 0.5) / kShC0).matrix().template cast<T>();
  }
  return scene;
}

}  // namespace init_detail

// Random Gaussians spread uniformly over the union of the training frusta
// (rejection sampling inside its bounding box). Scales come from the mean
// distance to the three nearest neighbours.
template <typename T = float>
GaussianScene<T> init_scene(const MirrorDataset& dataset, int n_points, std::uint64_t seed,
                            int sh_degree = 2) {
  if (n_points < 1) throw ConfigError("init_scene needs at least one point");
  if (dataset.train_views.empty()) throw LoadError("dataset has no training views");
  const Box3 box = frustum_union_box(dataset);
  std::vector<double> fars;
  for (const auto& v : dataset.train_views) fars.push_back(view_far_distance(v));
  Rng rng(seed);
  std::vector<Eigen::Vector3d> points;
  points.reserve(n_points);
  const long max_attempts = 1000L * n_points;
  for (long attempt = 0; static_cast<int>(points.size()) < n_points; ++attempt) {
    const Eigen::Vector3d p(rng.uniform(box.lo.x(), box.hi.x()), rng.uniform(box.lo.y(), box.hi.y()),
                            rng.uniform(box.lo.z(), box.hi.z()));
    bool keep = attempt >= max_attempts;
    for (std::size_t k = 0; k < dataset.train_views.size() && !keep; ++k)
      keep = inside_frustum(dataset.train_views[k], fars[k], p);
    if (keep) points.push_back(p);
  }

  std::vector<Eigen::Vector3d> colors(points.size());
  for (auto& c : colors) c = Eigen::Vector3d::Constant(rng.uniform());
  return init_detail::build_scene<T>(points, colors, sh_degree);
}

// Points back-projected from the GT depth maps of random training pixels,
// colored by the GT image there.
template <typename T = float>
GaussianScene<T> init_scene_from_depth(const MirrorDataset& dataset, int n_points,
                                       std::uint64_t seed, int sh_degree = 2) {
  if (n_points < 1) throw ConfigError("init_scene needs at least one point");
  std::vector<std::pair<std::size_t, std::size_t>> pixels;
  for (std::size_t k = 0; k < dataset.train_views.size(); ++k) {
    const auto& v = dataset.train_views[k];
    if (!v.depth) continue;
    for (std::size_t i = 0; i < v.depth->data.size(); ++i)
      if (std::isfinite(v.depth->data[i])) pixels.emplace_back(k, i);
  }
  if (pixels.empty()) throw LoadError("no training view has finite GT depth");
  Rng rng(seed);
  std::vector<Eigen::Vector3d> points, colors;
  for (int n = 0; n < n_points; ++n) {
    const auto [k, i] = pixels[rng.index(pixels.size())];
    const auto& v = dataset.train_views[k];
    const int x = static_cast<int>(i % v.camera.width), y = static_cast<int>(i / v.camera.width);
    const double px = x + rng.uniform(), py = y + rng.uniform();
    const double z = v.depth->data[i];
    const Eigen::Vector3d local((px - v.camera.cx) / v.camera.fx * z,
                                (py - v.camera.cy) / v.camera.fy * z, z);
    points.push_back((v.pose.camera_to_world() * local.homogeneous()).head<3>());
    colors.emplace_back(v.image.at(x, y, 0), v.image.at(x, y, 1), v.image.at(x, y, 2));
  }
  return init_detail::build_scene<T>(points, colors, sh_degree);
}

}  // namespace mirror_splat

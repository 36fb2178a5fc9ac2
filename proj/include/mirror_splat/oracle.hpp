#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mirror_splat/rasterizer.hpp"

namespace mirror_splat {

// Reference renderer: double precision, one global sort, every Gaussian tested
// at every pixel. No tiles and no footprint bounds. Applies the same blending
// rules as `render` (sigma clip, skip threshold, transmittance cutoff).
template <typename T>
RenderOutput<double> oracle_render(const GaussianScene<T>& scene, const CameraModel& camera,
                                   const PoseTransform& pose, const RenderOptions& options = {}) {
  if (scene.empty()) throw RenderError("cannot render an empty scene");
  if (!camera.valid()) throw RenderError("invalid camera intrinsics");
  if (!pose.valid(1e-6)) throw RenderError("pose is not a rigid (possibly improper) transform");

  struct Item {
    double depth;
    std::uint64_t key;
    std::uint32_t index;
    Eigen::Vector2d mean;
    Eigen::Matrix2d conic;
    double opacity;
    Eigen::Vector3d color;
    double mirror;
  };

  const Eigen::Vector3d center = pose.center();
  std::vector<Item> items;
  items.reserve(scene.size());
  for (std::uint32_t i = 0; i < scene.size(); ++i) {
    const GaussianPrimitive<double> p = scene.primitives[i].template cast<double>();
    if (options.clip && !(plane_point_residual(options.clip->plane, p.position) > options.clip->margin))
      continue;
    const double opacity = 1.0 / (1.0 + std::exp(-p.opacity_logit));
    if (!(opacity > kMinSigma)) continue;
    const auto proj = project_gaussian<double>(camera, pose, p.position, covariance(p));
    if (!proj) continue;
    const Eigen::Matrix2d cov = proj->cov2d + kLowPassFloor * Eigen::Matrix2d::Identity();
    Item item;
    item.depth = proj->view_depth;
    item.key = position_hash(scene.primitives[i].position);
    item.index = i;
    item.mean = proj->mean2d;
    item.conic = cov.inverse();
    item.opacity = opacity;
    const Eigen::Vector3d dir = (p.position - center).normalized();
    item.color = evaluate_sh<double>(p.sh, dir, scene.sh_degree);
    item.mirror = 1.0 / (1.0 + std::exp(-p.mirror_logit));
    items.push_back(item);
  }
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    if (a.depth != b.depth) return a.depth < b.depth;
    if (a.key != b.key) return a.key < b.key;
    return a.index < b.index;
  });

  const int width = camera.width, height = camera.height;
  RenderOutput<double> out;
  out.color = Image<double>(width, height, 3);
  out.mask = Image<double>(width, height, 1);
  out.depth = Image<double>(width, height, 1);
  out.alpha = Image<double>(width, height, 1);
  parallel_for(static_cast<std::size_t>(height), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < width; ++x) {
      const Eigen::Vector2d pixel(x + 0.5, y + 0.5);
      double trans = 1.0, mask = 0.0, depth_num = 0.0, alpha = 0.0;
      Eigen::Vector3d color = Eigen::Vector3d::Zero();
      for (const auto& item : items) {
        const Eigen::Vector2d d = pixel - item.mean;
        const double sigma_raw = item.opacity * std::exp(-0.5 * d.dot(item.conic * d));
        if (sigma_raw < kMinSigma) continue;
        const double sigma = std::min(sigma_raw, kMaxSigma);
        const double next = trans * (1.0 - sigma);
        const double w = sigma * trans;
        color += w * item.color;
        mask += w * item.mirror;
        depth_num += w * item.depth;
        alpha += w;
        trans = next;
        if (trans < kMinTransmittance) break;
      }
      for (int c = 0; c < 3; ++c) out.color.at(x, y, c) = color[c];
      out.mask.at(x, y) = mask;
      out.alpha.at(x, y) = alpha;
      out.depth.at(x, y) = depth_num / std::max(alpha, kDepthAlphaEpsilon);
    }
  });
  return out;
}

}  // namespace mirror_splat

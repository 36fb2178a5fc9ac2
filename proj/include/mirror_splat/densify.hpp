#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mirror_splat/optim.hpp"
#include "mirror_splat/random.hpp"
#include "mirror_splat/rasterizer.hpp"
#include "mirror_splat/scene.hpp"

namespace mirror_splat {

struct DensifyConfig {
  double grad_threshold = 2e-4;  // mean screen-space position gradient, pixels
  double percent_dense = 0.01;   // clone below this fraction of the scene extent, split above
  double prune_opacity = 0.005;
  double split_scale_divisor = 1.6;
  std::size_t max_gaussians = 20000;
};

// Running sums of screen-space position gradient norms.
struct DensifyStats {
  std::vector<double> grad_sum;
  std::vector<int> seen;

  void resize(std::size_t n) {
    grad_sum.resize(n, 0.0);
    seen.resize(n, 0);
  }
  void reset(std::size_t n) {
    grad_sum.assign(n, 0.0);
    seen.assign(n, 0);
  }
  template <typename T>
  void add(const RenderGradients<T>& g) {
    resize(g.mean2d_norm.size());
    for (std::size_t i = 0; i < g.mean2d_norm.size(); ++i) {
      if (!g.visible[i]) continue;
      grad_sum[i] += static_cast<double>(g.mean2d_norm[i]);
      ++seen[i];
    }
  }
  double mean(std::size_t i) const { return seen[i] ? grad_sum[i] / seen[i] : 0.0; }
};

struct DensifyResult {
  std::size_t cloned = 0;
  std::size_t split = 0;
  std::size_t pruned = 0;
};

// Clones small high-gradient Gaussians, splits large ones into two samples
// with scales divided by `split_scale_divisor`, prunes low opacity, and keeps
// the count at or below `max_gaussians`. Optimizer moments follow the
// primitives (new ones start at zero). Stats are reset.
template <typename T>
DensifyResult densify_and_prune(GaussianScene<T>& scene, DensifyStats& stats, AdamState<T>& adam,
                                const DensifyConfig& config, double scene_extent, Rng& rng) {
  const std::size_t n = scene.size();
  stats.resize(n);
  adam.resize(n);
  DensifyResult result;

  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < n; ++i)
    if (stats.mean(i) > config.grad_threshold) candidates.push_back(i);
  // Highest gradients first so the cap keeps the most useful ones.
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) { return stats.mean(a) > stats.mean(b); });

  std::vector<unsigned char> remove(n, 0);
  std::size_t alive = 0;
  for (std::size_t i = 0; i < n; ++i) {
    remove[i] = static_cast<double>(scene.primitives[i].opacity()) < config.prune_opacity;
    alive += !remove[i];
  }
  result.pruned = n - alive;

  std::vector<GaussianPrimitive<T>> added;
  for (std::size_t i : candidates) {
    if (remove[i]) continue;
    if (alive + added.size() + 1 > config.max_gaussians) break;
    auto& p = scene.primitives[i];
    const double max_scale = static_cast<double>(p.scale().maxCoeff());
    if (max_scale <= config.percent_dense * scene_extent) {
      added.push_back(p);
      ++result.cloned;
    } else {
      // Replace the parent by one sample and append a second.
      const Mat3<T> rot = quaternion_to_matrix<T>(p.rotation.normalized());
      const Vec3<T> s = p.scale();
      GaussianPrimitive<T> base = p;
      base.log_scale = (s / static_cast<T>(config.split_scale_divisor)).array().log().matrix();
      for (int k = 0; k < 2; ++k) {
        const Vec3<T> z(static_cast<T>(rng.normal()), static_cast<T>(rng.normal()),
                        static_cast<T>(rng.normal()));
        GaussianPrimitive<T> child = base;
        child.position = p.position + rot * s.cwiseProduct(z);
        if (k == 0) {
          p = child;
          adam.m[i] = GaussianPrimitive<T>::zero();
          adam.v[i] = GaussianPrimitive<T>::zero();
        } else {
          added.push_back(child);
        }
      }
      ++result.split;
    }
  }

  std::vector<GaussianPrimitive<T>> prims, m, v;
  prims.reserve(alive + added.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (remove[i]) continue;
    prims.push_back(scene.primitives[i]);
    m.push_back(adam.m[i]);
    v.push_back(adam.v[i]);
  }
  for (const auto& p : added) {
    prims.push_back(p);
    m.push_back(GaussianPrimitive<T>::zero());
    v.push_back(GaussianPrimitive<T>::zero());
  }
  scene.primitives = std::move(prims);
  adam.m = std::move(m);
  adam.v = std::move(v);
  stats.reset(scene.size());
  return result;
}

}  // namespace mirror_splat

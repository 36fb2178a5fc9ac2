#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "mirror_splat/geometry.hpp"
#include "mirror_splat/scene.hpp"

namespace mirror_splat {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-15;
};

// Learning rate per parameter group, indexed by ParamGroup.
using GroupRates = std::array<double, kParamGroupCount>;

template <typename T>
struct AdamState {
  std::vector<GaussianPrimitive<T>> m;
  std::vector<GaussianPrimitive<T>> v;
  long step = 0;
  long skipped = 0;  // steps dropped because of non-finite gradients

  void resize(std::size_t n) {
    m.resize(n, GaussianPrimitive<T>::zero());
    v.resize(n, GaussianPrimitive<T>::zero());
  }
};

template <typename T>
bool gradients_finite(const std::vector<GaussianPrimitive<T>>& grads, int sh_degree) {
  bool ok = true;
  for (const auto& g : grads) {
    for_each_param_block(
        sh_degree,
        [&](ParamGroup, int n, const T* p) {
          for (int k = 0; k < n; ++k) ok = ok && std::isfinite(static_cast<double>(p[k]));
        },
        g);
    if (!ok) return false;
  }
  return true;
}

// One Adam update of every primitive; quaternions are renormalized afterwards.
// Non-finite gradients skip the whole step and bump `state.skipped`.
// Returns false when the step was skipped.
template <typename T>
bool adam_step(GaussianScene<T>& scene, const std::vector<GaussianPrimitive<T>>& grads,
               AdamState<T>& state, const GroupRates& rates, const AdamHyper& hyper = {}) {
  if (grads.size() != scene.size()) throw ShapeMismatch("adam_step: gradient count mismatch");
  state.resize(scene.size());
  if (!gradients_finite(grads, scene.sh_degree)) {
    ++state.skipped;
    return false;
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < scene.size(); ++i) {
    for_each_param_block(
        scene.sh_degree,
        [&](ParamGroup group, int n, T* p, const T* g, T* m, T* v) {
          const double lr = rates[static_cast<int>(group)];
          for (int k = 0; k < n; ++k) {
            const double gk = static_cast<double>(g[k]);
            const double mk = hyper.beta1 * static_cast<double>(m[k]) + (1 - hyper.beta1) * gk;
            const double vk = hyper.beta2 * static_cast<double>(v[k]) + (1 - hyper.beta2) * gk * gk;
            m[k] = static_cast<T>(mk);
            v[k] = static_cast<T>(vk);
            const double update = lr * (mk / bc1) / (std::sqrt(vk / bc2) + hyper.eps);
            p[k] = static_cast<T>(static_cast<double>(p[k]) - update);
          }
        },
        scene.primitives[i], grads[i], state.m[i], state.v[i]);
    auto& q = scene.primitives[i].rotation;
    const T len = q.norm();
    if (len > T(0) && std::isfinite(static_cast<double>(len))) {
      q /= len;
    } else {
      q = Vec4<T>(1, 0, 0, 0);
    }
  }
  return true;
}

// Adam over the raw plane parameters (n, d); the plane is renormalized after
// each step.
struct PlaneAdam {
  Eigen::Vector4d m = Eigen::Vector4d::Zero();
  Eigen::Vector4d v = Eigen::Vector4d::Zero();
  long step = 0;
  long skipped = 0;

  bool update(Plane& plane, const Eigen::Vector3d& grad_normal, double grad_offset, double lr,
              const AdamHyper& hyper = {}) {
    const Eigen::Vector4d g(grad_normal.x(), grad_normal.y(), grad_normal.z(), grad_offset);
    if (!g.allFinite()) {
      ++skipped;
      return false;
    }
    ++step;
    m = hyper.beta1 * m + (1 - hyper.beta1) * g;
    v = hyper.beta2 * v + (1 - hyper.beta2) * g.cwiseProduct(g);
    const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
    const Eigen::Vector4d delta =
        lr * (m / bc1).array() / ((v / bc2).array().sqrt() + hyper.eps);
    plane = normalize_plane(Plane{plane.normal - delta.head<3>(), plane.offset - delta[3]});
    return true;
  }
};

}  // namespace mirror_splat

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "mirror_splat/geometry.hpp"
#include "mirror_splat/sh.hpp"

namespace mirror_splat {

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
T logit(T p) {
  return std::log(p / (T(1) - p));
}

// One anisotropic Gaussian. Opacity and mirror attribute live in logit space,
// scales in log space. rotation is a (w, x, y, z) quaternion.
template <typename T>
struct GaussianPrimitive {
  Vec3<T> position = Vec3<T>::Zero();
  Vec4<T> rotation = Vec4<T>(1, 0, 0, 0);
  Vec3<T> log_scale = Vec3<T>::Zero();
  T opacity_logit = T(0);
  std::array<Vec3<T>, kMaxShCoeffs> sh = zero_sh();
  T mirror_logit = T(0);

  T opacity() const { return sigmoid(opacity_logit); }
  T mirror() const { return sigmoid(mirror_logit); }
  Vec3<T> scale() const { return log_scale.array().exp().matrix(); }

  static std::array<Vec3<T>, kMaxShCoeffs> zero_sh() {
    std::array<Vec3<T>, kMaxShCoeffs> sh;
    for (auto& c : sh) c.setZero();
    return sh;
  }

  // Zero-valued primitive, used as a gradient or optimizer-moment slot.
  static GaussianPrimitive zero() {
    GaussianPrimitive p;
    p.rotation.setZero();
    return p;
  }

  template <typename U>
  GaussianPrimitive<U> cast() const {
    GaussianPrimitive<U> out;
    out.position = position.template cast<U>();
    out.rotation = rotation.template cast<U>();
    out.log_scale = log_scale.template cast<U>();
    out.opacity_logit = static_cast<U>(opacity_logit);
    for (int k = 0; k < kMaxShCoeffs; ++k) out.sh[k] = sh[k].template cast<U>();
    out.mirror_logit = static_cast<U>(mirror_logit);
    return out;
  }
};

template <typename T>
struct GaussianScene {
  std::vector<GaussianPrimitive<T>> primitives;
  int sh_degree = 2;

  std::size_t size() const { return primitives.size(); }
  bool empty() const { return primitives.empty(); }

  template <typename U>
  GaussianScene<U> cast() const {
    GaussianScene<U> out;
    out.sh_degree = sh_degree;
    out.primitives.reserve(primitives.size());
    for (const auto& p : primitives) out.primitives.push_back(p.template cast<U>());
    return out;
  }
};

// Rotation matrix of a unit (w, x, y, z) quaternion.
template <typename T>
Mat3<T> quaternion_to_matrix(const Vec4<T>& q) {
  const T r = q[0], x = q[1], y = q[2], z = q[3];
  Mat3<T> m;
  m << T(1) - T(2) * (y * y + z * z), T(2) * (x * y - r * z), T(2) * (x * z + r * y),
       T(2) * (x * y + r * z), T(1) - T(2) * (x * x + z * z), T(2) * (y * z - r * x),
       T(2) * (x * z - r * y), T(2) * (y * z + r * x), T(1) - T(2) * (x * x + y * y);
  return m;
}

// Sigma = R diag(s)^2 R^T with the quaternion normalized first.
template <typename T>
Mat3<T> covariance(const GaussianPrimitive<T>& primitive) {
  const Mat3<T> r = quaternion_to_matrix<T>(primitive.rotation.normalized());
  const Mat3<T> m = r * primitive.scale().asDiagonal();
  return m * m.transpose();
}

enum class ParamGroup { position, rotation, log_scale, opacity, sh, mirror };

inline constexpr int kParamGroupCount = 6;

// Calls fn(group, ptrs...) once per parameter block, with one pointer per
// primitive argument (all primitives share the layout) and the block length.
template <typename Fn, typename... Prims>
void for_each_param_block(int sh_degree, Fn&& fn, Prims&&... prims) {
  fn(ParamGroup::position, 3, prims.position.data()...);
  fn(ParamGroup::rotation, 4, prims.rotation.data()...);
  fn(ParamGroup::log_scale, 3, prims.log_scale.data()...);
  fn(ParamGroup::opacity, 1, &prims.opacity_logit...);
  for (int k = 0; k < sh_coeff_count(sh_degree); ++k) fn(ParamGroup::sh, 3, prims.sh[k].data()...);
  fn(ParamGroup::mirror, 1, &prims.mirror_logit...);
}

inline constexpr int param_count(int sh_degree) { return 12 + 3 * sh_coeff_count(sh_degree); }

}  // namespace mirror_splat

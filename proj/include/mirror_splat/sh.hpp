#pragma once

#include <algorithm>
#include <array>

#include "mirror_splat/geometry.hpp"

namespace mirror_splat {

inline constexpr int kMaxShDegree = 3;
inline constexpr int kMaxShCoeffs = 16;

constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

namespace sh_detail {
inline constexpr double kC0 = 0.28209479177387814;
inline constexpr double kC1 = 0.4886025119029199;
inline constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                                  -1.0925484305920792, 0.5462742152960396};
inline constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                                  0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                                  -0.5900435899266435};
}  // namespace sh_detail

// DC basis value Y00.
inline constexpr double kShC0 = sh_detail::kC0;

// Real SH basis (3DGS sign convention) at unit direction `d`. When `grad` is
// non-null it receives d(basis_k)/d(direction) for each k.
template <typename T>
void sh_basis(const Vec3<T>& d, int degree, std::array<T, kMaxShCoeffs>& basis,
              std::array<Vec3<T>, kMaxShCoeffs>* grad = nullptr) {
  using namespace sh_detail;
  const T x = d.x(), y = d.y(), z = d.z();
  basis[0] = T(kC0);
  if (grad) (*grad)[0].setZero();
  if (degree < 1) return;
  basis[1] = T(-kC1) * y;
  basis[2] = T(kC1) * z;
  basis[3] = T(-kC1) * x;
  if (grad) {
    (*grad)[1] = Vec3<T>(0, T(-kC1), 0);
    (*grad)[2] = Vec3<T>(0, 0, T(kC1));
    (*grad)[3] = Vec3<T>(T(-kC1), 0, 0);
  }
  if (degree < 2) return;
  const T xx = x * x, yy = y * y, zz = z * z;
  basis[4] = T(kC2[0]) * x * y;
  basis[5] = T(kC2[1]) * y * z;
  basis[6] = T(kC2[2]) * (T(2) * zz - xx - yy);
  basis[7] = T(kC2[3]) * x * z;
  basis[8] = T(kC2[4]) * (xx - yy);
  if (grad) {
    (*grad)[4] = T(kC2[0]) * Vec3<T>(y, x, 0);
    (*grad)[5] = T(kC2[1]) * Vec3<T>(0, z, y);
    (*grad)[6] = T(kC2[2]) * Vec3<T>(T(-2) * x, T(-2) * y, T(4) * z);
    (*grad)[7] = T(kC2[3]) * Vec3<T>(z, 0, x);
    (*grad)[8] = T(kC2[4]) * Vec3<T>(T(2) * x, T(-2) * y, 0);
  }
  if (degree < 3) return;
  basis[9] = T(kC3[0]) * y * (T(3) * xx - yy);
  basis[10] = T(kC3[1]) * x * y * z;
  basis[11] = T(kC3[2]) * y * (T(4) * zz - xx - yy);
  basis[12] = T(kC3[3]) * z * (T(2) * zz - T(3) * xx - T(3) * yy);
  basis[13] = T(kC3[4]) * x * (T(4) * zz - xx - yy);
  basis[14] = T(kC3[5]) * z * (xx - yy);
  basis[15] = T(kC3[6]) * x * (xx - T(3) * yy);
  if (grad) {
    (*grad)[9] = T(kC3[0]) * Vec3<T>(T(6) * x * y, T(3) * xx - T(3) * yy, 0);
    (*grad)[10] = T(kC3[1]) * Vec3<T>(y * z, x * z, x * y);
    (*grad)[11] = T(kC3[2]) * Vec3<T>(T(-2) * x * y, T(4) * zz - xx - T(3) * yy, T(8) * y * z);
    (*grad)[12] = T(kC3[3]) *
                  Vec3<T>(T(-6) * x * z, T(-6) * y * z, T(6) * zz - T(3) * xx - T(3) * yy);
    (*grad)[13] = T(kC3[4]) * Vec3<T>(T(4) * zz - T(3) * xx - yy, T(-2) * x * y, T(8) * x * z);
    (*grad)[14] = T(kC3[5]) * Vec3<T>(T(2) * x * z, T(-2) * y * z, xx - yy);
    (*grad)[15] = T(kC3[6]) * Vec3<T>(T(3) * xx - T(3) * yy, T(-6) * x * y, 0);
  }
}

// RGB = max(0, sum_k Y_k(d) c_k + 0.5).
template <typename T, typename Coeffs>
Vec3<T> evaluate_sh(const Coeffs& coeffs, const Vec3<T>& view_dir, int degree) {
  std::array<T, kMaxShCoeffs> basis{};
  sh_basis(view_dir, degree, basis);
  Vec3<T> rgb = Vec3<T>::Constant(T(0.5));
  for (int k = 0; k < sh_coeff_count(degree); ++k) rgb += basis[k] * coeffs[k];
  return rgb.cwiseMax(T(0));
}

}  // namespace mirror_splat

#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mirror_splat/error.hpp"
#include "mirror_splat/image.hpp"

namespace mirror_splat {

template <typename T>
struct LossValue {
  double value = 0.0;
  Image<T> grad;  // d value / d prediction
};

// Mean absolute difference over all elements.
template <typename T, typename U>
LossValue<T> l1_loss(const Image<T>& pred, const Image<U>& target) {
  require_same_shape(pred, target, "l1_loss");
  LossValue<T> out{0.0, Image<T>(pred.width, pred.height, pred.channels)};
  if (pred.data.empty()) return out;
  const double inv = 1.0 / static_cast<double>(pred.size());
  double sum = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
    sum += std::abs(d);
    out.grad.data[i] = static_cast<T>(d > 0 ? inv : (d < 0 ? -inv : 0.0));
  }
  out.value = sum * inv;
  return out;
}

template <typename T, typename U>
LossValue<T> mask_loss(const Image<T>& mask, const Image<U>& mask_gt) {
  return l1_loss(mask, mask_gt);
}

// Mean |D_pred - D_gt| over pixels with valid != 0; zero when none is valid.
template <typename T, typename U>
LossValue<T> depth_loss(const Image<T>& pred, const Image<U>& target,
                        const std::vector<unsigned char>& valid) {
  require_same_shape(pred, target, "depth_loss");
  if (valid.size() != pred.size()) throw ShapeMismatch("depth_loss: valid mask has wrong size");
  LossValue<T> out{0.0, Image<T>(pred.width, pred.height, pred.channels)};
  std::size_t count = 0;
  for (auto v : valid) count += v != 0;
  if (count == 0) return out;
  const double inv = 1.0 / static_cast<double>(count);
  double sum = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!valid[i]) continue;
    const double d = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
    sum += std::abs(d);
    out.grad.data[i] = static_cast<T>(d > 0 ? inv : (d < 0 ? -inv : 0.0));
  }
  out.value = sum * inv;
  return out;
}

// Pixels where the predicted alpha exceeds 0.5 and the target depth is finite.
template <typename T, typename U>
std::vector<unsigned char> depth_valid_mask(const Image<T>& alpha, const Image<U>& depth_gt) {
  require_same_shape(alpha, depth_gt, "depth_valid_mask");
  std::vector<unsigned char> valid(alpha.size());
  for (std::size_t i = 0; i < valid.size(); ++i)
    valid[i] = static_cast<double>(alpha.data[i]) > 0.5 && std::isfinite(static_cast<double>(depth_gt.data[i]));
  return valid;
}

// Replaces pixels with mask > 0.5 by pure red.
template <typename T, typename U>
Image<T> red_fill(const Image<T>& image, const Image<U>& mask) {
  if (image.channels != 3 || mask.channels != 1 || image.width != mask.width ||
      image.height != mask.height)
    throw ShapeMismatch("red_fill: expects an RGB image and a matching single-channel mask");
  Image<T> out = image;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      if (static_cast<double>(mask.at(x, y)) > 0.5) {
        out.at(x, y, 0) = T(1);
        out.at(x, y, 1) = T(0);
        out.at(x, y, 2) = T(0);
      }
  return out;
}

namespace ssim_detail {

inline constexpr int kWindow = 11;
inline constexpr double kSigma = 1.5;
inline constexpr double kC1 = 0.01 * 0.01;
inline constexpr double kC2 = 0.03 * 0.03;

inline const std::array<double, kWindow>& kernel() {
  static const std::array<double, kWindow> k = [] {
    std::array<double, kWindow> w{};
    double sum = 0;
    for (int i = 0; i < kWindow; ++i) {
      const double d = i - kWindow / 2;
      w[i] = std::exp(-d * d / (2 * kSigma * kSigma));
      sum += w[i];
    }
    for (auto& v : w) v /= sum;
    return w;
  }();
  return k;
}

// Valid-mode separable Gaussian filter of a w x h plane; result is (w-10) x (h-10).
inline std::vector<double> filter_valid(const std::vector<double>& src, int w, int h) {
  const auto& k = kernel();
  const int ow = w - kWindow + 1, oh = h - kWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < kWindow; ++i) s += k[i] * src[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < kWindow; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

// Adjoint of filter_valid: spreads a (w-10) x (h-10) map back onto w x h.
inline std::vector<double> filter_adjoint(const std::vector<double>& src, int w, int h) {
  const auto& k = kernel();
  const int ow = w - kWindow + 1, oh = h - kWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h, 0.0);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      const double v = src[static_cast<std::size_t>(y) * ow + x];
      for (int i = 0; i < kWindow; ++i) tmp[static_cast<std::size_t>(y + i) * ow + x] += k[i] * v;
    }
  std::vector<double> out(static_cast<std::size_t>(w) * h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      const double v = tmp[static_cast<std::size_t>(y) * ow + x];
      for (int i = 0; i < kWindow; ++i) out[static_cast<std::size_t>(y) * w + x + i] += k[i] * v;
    }
  return out;
}

template <typename T>
std::vector<double> channel_plane(const Image<T>& img, int c) {
  std::vector<double> out(img.pixel_count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(img.data[i * img.channels + c]);
  return out;
}

struct ChannelSsim {
  std::vector<double> map;  // (w-10) x (h-10)
  std::vector<double> da, db, dab, mu_a, mu_b;  // partials of the map entries
};

inline ChannelSsim channel_ssim(const std::vector<double>& a, const std::vector<double>& b, int w,
                                int h, bool partials) {
  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = filter_valid(a, w, h), mu_b = filter_valid(b, w, h);
  const auto e_aa = filter_valid(aa, w, h), e_bb = filter_valid(bb, w, h), e_ab = filter_valid(ab, w, h);
  ChannelSsim out;
  out.map.resize(mu_a.size());
  if (partials) {
    out.da.resize(mu_a.size());
    out.db.resize(mu_a.size());
    out.dab.resize(mu_a.size());
  }
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = e_aa[i] - ma * ma, vb = e_bb[i] - mb * mb, cov = e_ab[i] - ma * mb;
    const double n1 = 2 * ma * mb + kC1, n2 = 2 * cov + kC2;
    const double d1 = ma * ma + mb * mb + kC1, d2 = va + vb + kC2;
    const double s = n1 * n2 / (d1 * d2);
    out.map[i] = s;
    if (partials) {
      // d s / d mu_a, d s / d var_a, d s / d cov.
      out.da[i] = 2 * mb * n2 / (d1 * d2) - s * 2 * ma / d1;
      out.db[i] = -s / d2;
      out.dab[i] = 2 * n1 / (d1 * d2);
    }
  }
  if (partials) {
    out.mu_a = mu_a;
    out.mu_b = mu_b;
  }
  return out;
}

}  // namespace ssim_detail

// Per-channel SSIM maps (valid windows only), averaged over channels.
// Entry (x, y) is the window centered on pixel (x + 5, y + 5).
template <typename T, typename U>
Image<double> ssim_map(const Image<T>& a, const Image<U>& b) {
  require_same_shape(a, b, "ssim_map");
  using namespace ssim_detail;
  if (a.width < kWindow || a.height < kWindow)
    throw ShapeMismatch("SSIM needs images of at least 11x11");
  Image<double> out(a.width - kWindow + 1, a.height - kWindow + 1, 1);
  for (int c = 0; c < a.channels; ++c) {
    const auto s = channel_ssim(channel_plane(a, c), channel_plane(b, c), a.width, a.height, false);
    for (std::size_t i = 0; i < s.map.size(); ++i) out.data[i] += s.map[i] / a.channels;
  }
  return out;
}

template <typename T, typename U>
double ssim(const Image<T>& a, const Image<U>& b) {
  const Image<double> m = ssim_map(a, b);
  double sum = 0;
  for (double v : m.data) sum += v;
  return sum / static_cast<double>(m.size());
}

// (1 - SSIM) / 2 with its gradient with respect to `pred`.
template <typename T, typename U>
LossValue<T> d_ssim_loss(const Image<T>& pred, const Image<U>& target) {
  require_same_shape(pred, target, "d_ssim_loss");
  using namespace ssim_detail;
  const int w = pred.width, h = pred.height;
  if (w < kWindow || h < kWindow) throw ShapeMismatch("SSIM needs images of at least 11x11");
  LossValue<T> out{0.0, Image<T>(w, h, pred.channels)};
  const std::size_t windows = static_cast<std::size_t>(w - kWindow + 1) * (h - kWindow + 1);
  const double scale = -0.5 / (static_cast<double>(windows) * pred.channels);
  double total = 0;
  for (int c = 0; c < pred.channels; ++c) {
    const auto a = channel_plane(pred, c), b = channel_plane(target, c);
    const auto s = channel_ssim(a, b, w, h, true);
    std::vector<double> ga(windows), gv(windows), gc(windows);
    for (std::size_t i = 0; i < windows; ++i) {
      total += s.map[i];
      // Chain through mu_a, var_a = E[a^2] - mu_a^2 and cov = E[ab] - mu_a mu_b.
      ga[i] = scale * (s.da[i] - 2 * s.mu_a[i] * s.db[i] - s.mu_b[i] * s.dab[i]);
      gv[i] = scale * s.db[i];
      gc[i] = scale * s.dab[i];
    }
    const auto ta = filter_adjoint(ga, w, h), tv = filter_adjoint(gv, w, h), tc = filter_adjoint(gc, w, h);
    for (std::size_t p = 0; p < a.size(); ++p)
      out.grad.data[p * pred.channels + c] = static_cast<T>(ta[p] + 2 * a[p] * tv[p] + b[p] * tc[p]);
  }
  out.value = 0.5 * (1.0 - total / (static_cast<double>(windows) * pred.channels));
  return out;
}

inline double psnr_from_mse(double mse) {
  if (!(mse > 0)) return 100.0;
  return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

}  // namespace mirror_splat

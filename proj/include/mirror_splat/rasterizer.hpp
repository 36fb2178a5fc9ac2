#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <optional>
#include <vector>

#include "mirror_splat/error.hpp"
#include "mirror_splat/geometry.hpp"
#include "mirror_splat/image.hpp"
#include "mirror_splat/parallel.hpp"
#include "mirror_splat/random.hpp"
#include "mirror_splat/scene.hpp"
#include "mirror_splat/sh.hpp"

namespace mirror_splat {

// Added to the diagonal of every projected covariance (px^2).
inline constexpr double kLowPassFloor = 0.3;
inline constexpr double kMaxSigma = 0.999;
// Per-pixel contributions with sigma below this are skipped; it also sets the
// conservative footprint used for tile binning.
inline constexpr double kMinSigma = 1e-6;
inline constexpr double kMinTransmittance = 1e-4;
inline constexpr double kDepthAlphaEpsilon = 1e-6;
inline constexpr int kTileSize = 16;

template <typename T>
struct RenderOutput {
  Image<T> color;  // H x W x 3
  Image<T> mask;   // H x W
  Image<T> depth;  // H x W, normalized by accumulated alpha
  Image<T> alpha;  // H x W
  // Hash over every discrete per-pixel decision (contributing set, clipped
  // sigmas, termination point). Only filled when requested.
  std::uint64_t decision_signature = 0;
};

// Restricts rendering to Gaussians whose centers lie strictly on the positive
// side of `plane` by more than `margin`.
struct ClipPlane {
  Plane plane;
  double margin = 0.0;
};

struct RenderOptions {
  std::optional<ClipPlane> clip;
  bool track_decisions = false;
};

// Per-primitive gradients in the same layout as the scene.
template <typename T>
struct RenderGradients {
  std::vector<GaussianPrimitive<T>> primitives;
  // |dL/d mean2d| in pixels; zero for primitives that were not visible.
  std::vector<T> mean2d_norm;
  std::vector<unsigned char> visible;
};

// Stable identity of a primitive independent of its storage slot.
template <typename T>
std::uint64_t position_hash(const Vec3<T>& position) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (int i = 0; i < 3; ++i) {
    double v = static_cast<double>(position[i]);
    if (v == 0.0) v = 0.0;  // fold -0
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    h = splitmix64(h ^ bits);
  }
  return h;
}

// Ascending depth; ties by tie_key, then by index.
template <typename T>
std::vector<std::uint32_t> sort_by_depth(const std::vector<T>& depths,
                                         const std::vector<std::uint64_t>& tie_keys = {}) {
  std::vector<std::uint32_t> order(depths.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (depths[a] != depths[b]) return depths[a] < depths[b];
    if (!tie_keys.empty() && tie_keys[a] != tie_keys[b]) return tie_keys[a] < tie_keys[b];
    return a < b;
  });
  return order;
}

// Screen-space state of one Gaussian for one view.
template <typename T>
struct Splat {
  bool visible = false;
  Vec2<T> mean = Vec2<T>::Zero();
  T conic_a = 0, conic_b = 0, conic_c = 0;
  T opacity = 0;
  T qmax = 0;
  Vec3<T> color = Vec3<T>::Zero();
  std::array<bool, 3> color_clamped{};
  T mirror = 0;
  T depth = 0;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  // Retained for the backward pass.
  Vec3<T> cam = Vec3<T>::Zero();
  Vec3<T> view_dir = Vec3<T>::Zero();
  T view_dist = 0;
  Mat2<T> conic = Mat2<T>::Identity();
};

struct TileWorkLists {
  std::vector<std::uint32_t> order;  // visible primitives, ascending depth
  int tiles_x = 0;
  int tiles_y = 0;
  std::vector<std::vector<std::uint32_t>> tiles;  // per tile, in `order` order
};

template <typename T>
struct ForwardState {
  CameraModel camera;
  PoseTransform pose;
  RenderOptions options;
  std::vector<Splat<double>> splats;
  TileWorkLists bins;
  std::vector<std::uint32_t> n_contrib;  // per pixel, tile-list prefix length used
};

namespace raster_detail {

inline int clamp_to_int(double v, int lo, int hi) {
  if (!(v >= lo)) return lo;
  if (v > hi) return hi;
  return static_cast<int>(v);
}

template <typename S>
Splat<double> preprocess_one(const GaussianPrimitive<S>& stored, int sh_degree,
                             const CameraModel& camera, const PoseTransform& pose,
                             const Vec3<double>& cam_center, const RenderOptions& options) {
  using T = double;
  const GaussianPrimitive<double> prim = stored.template cast<double>();
  Splat<T> s;
  if (options.clip) {
    const double r = plane_point_residual(options.clip->plane, prim.position);
    if (!(r > options.clip->margin)) return s;
  }
  const T opacity = prim.opacity();
  if (!(opacity > T(kMinSigma))) return s;
  const auto proj = project_gaussian<T>(camera, pose, prim.position, covariance(prim));
  if (!proj) return s;

  Mat2<T> cov = proj->cov2d;
  cov(0, 0) += T(kLowPassFloor);
  cov(1, 1) += T(kLowPassFloor);
  const T det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(0, 1);
  if (!(det > T(0)) || !std::isfinite(det)) return s;
  const T inv_det = T(1) / det;
  s.conic << cov(1, 1) * inv_det, -cov(0, 1) * inv_det, -cov(0, 1) * inv_det, cov(0, 0) * inv_det;
  s.conic_a = s.conic(0, 0);
  s.conic_b = s.conic(0, 1);
  s.conic_c = s.conic(1, 1);
  s.opacity = opacity;
  s.qmax = T(2) * std::log(opacity / T(kMinSigma));
  s.mean = proj->mean2d;
  s.depth = proj->view_depth;

  const double ex = std::sqrt(static_cast<double>(s.qmax) * static_cast<double>(cov(0, 0)));
  const double ey = std::sqrt(static_cast<double>(s.qmax) * static_cast<double>(cov(1, 1)));
  const double mx = static_cast<double>(s.mean.x()), my = static_cast<double>(s.mean.y());
  s.x0 = clamp_to_int(std::ceil(mx - ex - 0.5) - 1.0, 0, camera.width);
  s.x1 = clamp_to_int(std::floor(mx + ex - 0.5) + 2.0, 0, camera.width);
  s.y0 = clamp_to_int(std::ceil(my - ey - 0.5) - 1.0, 0, camera.height);
  s.y1 = clamp_to_int(std::floor(my + ey - 0.5) + 2.0, 0, camera.height);
  if (s.x0 >= s.x1 || s.y0 >= s.y1) return s;

  const Vec3<T> v = prim.position - cam_center;
  s.view_dist = v.norm();
  s.view_dir = s.view_dist > T(0) ? Vec3<T>(v / s.view_dist) : Vec3<T>(0, 0, 1);
  std::array<T, kMaxShCoeffs> basis{};
  sh_basis(s.view_dir, sh_degree, basis);
  Vec3<T> rgb = Vec3<T>::Constant(T(0.5));
  for (int k = 0; k < sh_coeff_count(sh_degree); ++k) rgb += basis[k] * prim.sh[k];
  for (int c = 0; c < 3; ++c) {
    s.color_clamped[c] = rgb[c] < T(0);
    s.color[c] = s.color_clamped[c] ? T(0) : rgb[c];
  }
  s.mirror = prim.mirror();
  s.cam = pose.rotation().cast<T>() * prim.position + pose.translation().cast<T>();
  s.visible = true;
  return s;
}

// Contiguous copy of the per-pixel fields of a splat, laid out for the tile loops.
struct PackedSplat {
  double mx, my, a, b, c, opacity, qmax;
  double r, g, bl, mirror, depth;
  int x0, x1, y0, y1;
};

inline PackedSplat pack(const Splat<double>& s) {
  return PackedSplat{s.mean.x(), s.mean.y(), s.conic_a,  s.conic_b,  s.conic_c, s.opacity,
                     s.qmax,     s.color[0], s.color[1], s.color[2], s.mirror,  s.depth,
                     s.x0,       s.x1,       s.y0,       s.y1};
}

// Evaluates one splat at a pixel center. Returns false when the contribution
// is skipped. Shared by forward and backward so both make identical decisions.
// The bounding box contains the whole q <= qmax ellipse.
inline bool packed_sigma(const PackedSplat& s, int x, int y, double px, double py, double& sigma,
                         double& gauss, double& dx, double& dy, bool& clipped) {
  if (x < s.x0 || x >= s.x1 || y < s.y0 || y >= s.y1) return false;
  dx = px - s.mx;
  dy = py - s.my;
  const double q = s.a * dx * dx + 2.0 * s.b * dx * dy + s.c * dy * dy;
  if (q > s.qmax) return false;
  gauss = std::exp(-0.5 * q);
  const double raw = s.opacity * gauss;
  if (raw < kMinSigma) return false;
  clipped = raw > kMaxSigma;
  sigma = clipped ? kMaxSigma : raw;
  return true;
}

inline std::vector<PackedSplat> pack_tile(const std::vector<Splat<double>>& splats,
                                          const std::vector<std::uint32_t>& list) {
  std::vector<PackedSplat> out;
  out.reserve(list.size());
  for (auto i : list) out.push_back(pack(splats[i]));
  return out;
}

inline std::uint64_t decision_hash(std::uint64_t pixel, std::uint64_t prim, std::uint64_t tag) {
  return splitmix64(splitmix64(pixel * 0x9e3779b97f4a7c15ULL + prim) ^ tag);
}

}  // namespace raster_detail

template <typename T>
std::vector<Splat<double>> preprocess_splats(const GaussianScene<T>& scene,
                                             const CameraModel& camera, const PoseTransform& pose,
                                             const RenderOptions& options) {
  const Vec3<double> cam_center = pose.center();
  std::vector<Splat<double>> splats(scene.size());
  parallel_for(scene.size(), [&](std::size_t i) {
    splats[i] = raster_detail::preprocess_one(scene.primitives[i], scene.sh_degree, camera, pose,
                                              cam_center, options);
  });
  return splats;
}

// Global depth sort of visible splats (ties by position hash) and binning
// into 16x16 tiles.
template <typename T>
TileWorkLists bin_splats(const GaussianScene<T>& scene, const std::vector<Splat<double>>& splats,
                         const CameraModel& camera) {
  TileWorkLists bins;
  std::vector<std::uint32_t> visible;
  std::vector<double> depths;
  std::vector<std::uint64_t> keys;
  for (std::uint32_t i = 0; i < splats.size(); ++i) {
    if (!splats[i].visible) continue;
    visible.push_back(i);
    depths.push_back(splats[i].depth);
    keys.push_back(position_hash(scene.primitives[i].position));
  }
  const auto local = sort_by_depth(depths, keys);
  bins.order.reserve(local.size());
  for (auto k : local) bins.order.push_back(visible[k]);

  bins.tiles_x = (camera.width + kTileSize - 1) / kTileSize;
  bins.tiles_y = (camera.height + kTileSize - 1) / kTileSize;
  bins.tiles.assign(static_cast<std::size_t>(bins.tiles_x) * bins.tiles_y, {});
  for (auto idx : bins.order) {
    const auto& s = splats[idx];
    const int tx0 = s.x0 / kTileSize, tx1 = (s.x1 - 1) / kTileSize;
    const int ty0 = s.y0 / kTileSize, ty1 = (s.y1 - 1) / kTileSize;
    for (int ty = ty0; ty <= ty1; ++ty)
      for (int tx = tx0; tx <= tx1; ++tx)
        bins.tiles[static_cast<std::size_t>(ty) * bins.tiles_x + tx].push_back(idx);
  }
  return bins;
}

template <typename T>
TileWorkLists sort_and_bin(const GaussianScene<T>& scene, const CameraModel& camera,
                           const PoseTransform& pose, const RenderOptions& options = {}) {
  return bin_splats(scene, preprocess_splats(scene, camera, pose, options), camera);
}

namespace raster_detail {

inline void check_render_inputs(std::size_t scene_size, const CameraModel& camera,
                                const PoseTransform& pose) {
  if (scene_size == 0) throw RenderError("cannot render an empty scene");
  if (!camera.valid()) throw RenderError("invalid camera intrinsics");
  if (!pose.valid(1e-6)) throw RenderError("pose is not a rigid (possibly improper) transform");
}

}  // namespace raster_detail

// Tile-based forward splatting of color, mirror mask, depth and alpha.
template <typename T>
RenderOutput<T> render(const GaussianScene<T>& scene, const CameraModel& camera,
                       const PoseTransform& pose, const RenderOptions& options = {},
                       ForwardState<T>* state = nullptr) {
  raster_detail::check_render_inputs(scene.size(), camera, pose);
  const int width = camera.width, height = camera.height;
  auto splats = preprocess_splats(scene, camera, pose, options);
  auto bins = bin_splats(scene, splats, camera);

  RenderOutput<T> out;
  out.color = Image<T>(width, height, 3);
  out.mask = Image<T>(width, height, 1);
  out.depth = Image<T>(width, height, 1);
  out.alpha = Image<T>(width, height, 1);
  std::vector<std::uint32_t> n_contrib(static_cast<std::size_t>(width) * height, 0);
  std::vector<std::uint64_t> tile_signature(bins.tiles.size(), 0);

  parallel_for(bins.tiles.size(), [&](std::size_t tile) {
    const auto& list = bins.tiles[tile];
    const auto packed = raster_detail::pack_tile(splats, list);
    const int tx = static_cast<int>(tile % bins.tiles_x), ty = static_cast<int>(tile / bins.tiles_x);
    std::uint64_t signature = 0;
    for (int y = ty * kTileSize; y < std::min(height, (ty + 1) * kTileSize); ++y) {
      for (int x = tx * kTileSize; x < std::min(width, (tx + 1) * kTileSize); ++x) {
        const double px = x + 0.5, py = y + 0.5;
        const std::size_t pixel = static_cast<std::size_t>(y) * width + x;
        double trans = 1;
        Eigen::Vector3d color = Eigen::Vector3d::Zero();
        double mask = 0, depth_num = 0, weight_sum = 0;
        std::uint32_t last = 0;
        for (std::uint32_t k = 0; k < list.size(); ++k) {
          const auto& s = packed[k];
          double sigma, gauss, dx, dy;
          bool clipped;
          if (!raster_detail::packed_sigma(s, x, y, px, py, sigma, gauss, dx, dy, clipped)) continue;
          const double w = sigma * trans;
          color += w * Eigen::Vector3d(s.r, s.g, s.bl);
          mask += w * s.mirror;
          depth_num += w * s.depth;
          weight_sum += w;
          trans *= 1.0 - sigma;
          last = k + 1;
          if (options.track_decisions)
            signature ^= raster_detail::decision_hash(pixel, list[k], clipped ? 2 : 1);
          if (trans < kMinTransmittance) {
            if (options.track_decisions) signature ^= raster_detail::decision_hash(pixel, list[k], 3);
            break;
          }
        }
        // Equals 1 - trans, summed directly to avoid cancellation at low coverage.
        const double alpha = weight_sum;
        for (int c = 0; c < 3; ++c) out.color.at(x, y, c) = static_cast<T>(color[c]);
        out.mask.at(x, y) = static_cast<T>(mask);
        out.alpha.at(x, y) = static_cast<T>(alpha);
        out.depth.at(x, y) = static_cast<T>(depth_num / std::max(alpha, kDepthAlphaEpsilon));
        n_contrib[pixel] = last;
      }
    }
    tile_signature[tile] = signature;
  });
  if (options.track_decisions) {
    for (auto s : tile_signature) out.decision_signature ^= s;
  }

  if (state) {
    state->camera = camera;
    state->pose = pose;
    state->options = options;
    state->splats = std::move(splats);
    state->bins = std::move(bins);
    state->n_contrib = std::move(n_contrib);
  }
  return out;
}

namespace raster_detail {

// Screen-space gradient of one splat accumulated over pixels.
template <typename T>
struct SplatGrad {
  Vec2<T> mean = Vec2<T>::Zero();
  T conic_xx = 0, conic_xy = 0, conic_yy = 0;  // matrix-form d/dQ entries
  T opacity = 0;
  Vec3<T> color = Vec3<T>::Zero();
  T mirror = 0;
  T depth = 0;

  void add(const SplatGrad& o) {
    mean += o.mean;
    conic_xx += o.conic_xx;
    conic_xy += o.conic_xy;
    conic_yy += o.conic_yy;
    opacity += o.opacity;
    color += o.color;
    mirror += o.mirror;
    depth += o.depth;
  }
};

// d R(q) / d q_k for a unit quaternion (w, x, y, z).
template <typename T>
Vec4<T> rotation_grad_to_quaternion(const Mat3<T>& g, const Vec4<T>& q) {
  const T r = q[0], x = q[1], y = q[2], z = q[3];
  Mat3<T> dr, dx, dy, dz;
  dr << 0, -2 * z, 2 * y, 2 * z, 0, -2 * x, -2 * y, 2 * x, 0;
  dx << 0, 2 * y, 2 * z, 2 * y, -4 * x, -2 * r, 2 * z, 2 * r, -4 * x;
  dy << -4 * y, 2 * x, 2 * r, 2 * x, 0, 2 * z, -2 * r, 2 * z, -4 * y;
  dz << -4 * z, -2 * r, 2 * x, 2 * r, -4 * z, 2 * y, 2 * x, 2 * y, 0;
  return Vec4<T>(g.cwiseProduct(dr).sum(), g.cwiseProduct(dx).sum(), g.cwiseProduct(dy).sum(),
                 g.cwiseProduct(dz).sum());
}

// Chains screen-space gradients of one splat back to its 3D parameters.
template <typename S>
void backward_one(const GaussianPrimitive<S>& stored, int sh_degree, const Splat<double>& s,
                  const SplatGrad<double>& g, const CameraModel& camera, const PoseTransform& pose,
                  GaussianPrimitive<S>& result) {
  using T = double;
  const GaussianPrimitive<double> prim = stored.template cast<double>();
  GaussianPrimitive<double> out = GaussianPrimitive<double>::zero();
  // Opacity and mirror attribute through the sigmoid.
  out.opacity_logit = g.opacity * s.opacity * (T(1) - s.opacity);
  out.mirror_logit = g.mirror * s.mirror * (T(1) - s.mirror);

  // Color through the SH basis.
  Vec3<T> dcolor = g.color;
  for (int c = 0; c < 3; ++c)
    if (s.color_clamped[c]) dcolor[c] = 0;
  std::array<T, kMaxShCoeffs> basis{};
  std::array<Vec3<T>, kMaxShCoeffs> basis_grad;
  sh_basis(s.view_dir, sh_degree, basis, &basis_grad);
  Vec3<T> ddir = Vec3<T>::Zero();
  for (int k = 0; k < sh_coeff_count(sh_degree); ++k) {
    out.sh[k] = dcolor * basis[k];
    ddir += dcolor.dot(prim.sh[k]) * basis_grad[k];
  }
  Vec3<T> dpos = Vec3<T>::Zero();
  if (s.view_dist > T(0)) dpos += (ddir - s.view_dir * s.view_dir.dot(ddir)) / s.view_dist;

  // Conic -> regularized 2D covariance -> 3D covariance and camera-space mean.
  Mat2<T> gq;
  gq << g.conic_xx, g.conic_xy, g.conic_xy, g.conic_yy;
  const Mat2<T> gcov2d = -s.conic * gq * s.conic;

  const Mat3<T> w = pose.rotation().cast<T>();
  const Vec3<T>& t = s.cam;
  const Mat23<T> j = perspective_jacobian(camera, t);
  const Mat23<T> jw = j * w;
  const Vec4<T> qn = prim.rotation.normalized();
  const Mat3<T> rot = quaternion_to_matrix<T>(qn);
  const Vec3<T> scale = prim.scale();
  const Mat3<T> m = rot * scale.asDiagonal();
  const Mat3<T> cov3d = m * m.transpose();

  const Mat3<T> dcov3d = jw.transpose() * gcov2d * jw;
  const Mat23<T> djw = T(2) * gcov2d * jw * cov3d;
  const Mat23<T> dj = djw * w.transpose();

  const T fx = static_cast<T>(camera.fx), fy = static_cast<T>(camera.fy);
  const T iz = T(1) / t.z(), iz2 = iz * iz, iz3 = iz2 * iz;
  Vec3<T> dt = Vec3<T>::Zero();
  dt.x() += dj(0, 2) * (-fx * iz2);
  dt.y() += dj(1, 2) * (-fy * iz2);
  dt.z() += dj(0, 0) * (-fx * iz2) + dj(0, 2) * (T(2) * fx * t.x() * iz3) +
            dj(1, 1) * (-fy * iz2) + dj(1, 2) * (T(2) * fy * t.y() * iz3);
  // Mean projection.
  dt.x() += g.mean.x() * fx * iz;
  dt.z() += g.mean.x() * (-fx * t.x() * iz2);
  dt.y() += g.mean.y() * fy * iz;
  dt.z() += g.mean.y() * (-fy * t.y() * iz2);
  dt.z() += g.depth;
  dpos += w.transpose() * dt;
  out.position = dpos;

  // Sigma = M M^T with M = R S.
  const Mat3<T> dm = T(2) * dcov3d * m;
  const Mat3<T> drot = dm * scale.asDiagonal();
  const Mat3<T> ds = rot.transpose() * dm;
  for (int k = 0; k < 3; ++k) out.log_scale[k] = ds(k, k) * scale[k];

  const Vec4<T> dqn = rotation_grad_to_quaternion(drot, qn);
  const T qnorm = prim.rotation.norm();
  out.rotation = (dqn - qn * qn.dot(dqn)) / qnorm;
  result = out.template cast<S>();
}

}  // namespace raster_detail

// Analytic adjoint of `render` using the state cached by the forward pass.
template <typename T>
RenderGradients<T> render_backward(const GaussianScene<T>& scene, const ForwardState<T>& state,
                                   const Image<T>& grad_color, const Image<T>& grad_mask,
                                   const Image<T>& grad_depth) {
  const CameraModel& camera = state.camera;
  const int width = camera.width, height = camera.height;
  auto check = [&](const Image<T>& img, int channels, const char* name) {
    if (img.width != width || img.height != height || img.channels != channels)
      throw ShapeMismatch(std::string("render_backward: ") + name + " has wrong shape");
  };
  check(grad_color, 3, "grad_color");
  check(grad_mask, 1, "grad_mask");
  check(grad_depth, 1, "grad_depth");
  if (state.splats.size() != scene.size())
    throw ShapeMismatch("render_backward: forward state does not match scene");

  const auto& bins = state.bins;
  const auto& splats = state.splats;
  using SG = raster_detail::SplatGrad<double>;
  std::vector<std::vector<SG>> tile_grads(bins.tiles.size());

  struct Entry {
    std::uint32_t k;
    double sigma, trans, gauss, dx, dy;
    bool clipped;
  };

  parallel_for(bins.tiles.size(), [&](std::size_t tile) {
    const auto& list = bins.tiles[tile];
    auto& grads = tile_grads[tile];
    grads.assign(list.size(), SG{});
    if (list.empty()) return;
    const auto packed = raster_detail::pack_tile(splats, list);
    const int tx = static_cast<int>(tile % bins.tiles_x), ty = static_cast<int>(tile / bins.tiles_x);
    std::vector<Entry> entries;
    for (int y = ty * kTileSize; y < std::min(height, (ty + 1) * kTileSize); ++y) {
      for (int x = tx * kTileSize; x < std::min(width, (tx + 1) * kTileSize); ++x) {
        const std::size_t pixel = static_cast<std::size_t>(y) * width + x;
        const std::uint32_t last = state.n_contrib[pixel];
        if (last == 0) continue;
        const double px = x + 0.5, py = y + 0.5;
        entries.clear();
        double trans = 1, depth_num = 0, alpha = 0;
        for (std::uint32_t k = 0; k < last; ++k) {
          const auto& s = packed[k];
          Entry e;
          if (!raster_detail::packed_sigma(s, x, y, px, py, e.sigma, e.gauss, e.dx, e.dy, e.clipped))
            continue;
          e.k = k;
          e.trans = trans;
          const double w = e.sigma * trans;
          depth_num += w * s.depth;
          alpha += w;
          trans *= (1.0 - e.sigma);
          entries.push_back(e);
        }
        const double denom = std::max(alpha, kDepthAlphaEpsilon);
        const Eigen::Vector3d gc(grad_color.at(x, y, 0), grad_color.at(x, y, 1),
                                 grad_color.at(x, y, 2));
        const double gm = grad_mask.at(x, y);
        const double gd = grad_depth.at(x, y);
        const double g_depth_num = gd / denom;
        const double g_alpha = alpha > kDepthAlphaEpsilon ? -gd * (depth_num / alpha) / alpha : 0.0;

        double after = 0;  // sum over later contributions of s_k * w_k
        for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
          const auto& s = packed[it->k];
          const double w = it->sigma * it->trans;
          const double feature = gc.x() * s.r + gc.y() * s.g + gc.z() * s.bl + gm * s.mirror +
                                 g_depth_num * s.depth + g_alpha;
          const double dsigma = feature * it->trans - after / (1.0 - it->sigma);
          after += feature * w;
          SG& g = grads[it->k];
          g.color += gc * w;
          g.mirror += gm * w;
          g.depth += g_depth_num * w;
          if (it->clipped) continue;
          g.opacity += dsigma * it->gauss;
          const double dq = dsigma * (-0.5 * it->sigma);
          // q = d^T Q d with d = p - mean.
          g.mean.x() += dq * -2.0 * (s.a * it->dx + s.b * it->dy);
          g.mean.y() += dq * -2.0 * (s.b * it->dx + s.c * it->dy);
          g.conic_xx += dq * it->dx * it->dx;
          g.conic_xy += dq * it->dx * it->dy;
          g.conic_yy += dq * it->dy * it->dy;
        }
      }
    }
  });

  // Deterministic reduction in tile order.
  std::vector<SG> splat_grads(scene.size());
  for (std::size_t tile = 0; tile < bins.tiles.size(); ++tile) {
    const auto& list = bins.tiles[tile];
    for (std::size_t k = 0; k < list.size(); ++k) splat_grads[list[k]].add(tile_grads[tile][k]);
  }

  RenderGradients<T> out;
  out.primitives.assign(scene.size(), GaussianPrimitive<T>::zero());
  out.mean2d_norm.assign(scene.size(), T(0));
  out.visible.assign(scene.size(), 0);
  parallel_for(scene.size(), [&](std::size_t i) {
    if (!splats[i].visible) return;
    out.visible[i] = 1;
    out.mean2d_norm[i] = static_cast<T>(splat_grads[i].mean.norm());
    raster_detail::backward_one(scene.primitives[i], scene.sh_degree, splats[i], splat_grads[i],
                                camera, state.pose, out.primitives[i]);
  });
  return out;
}

// Recomputing variant: runs the forward pass internally.
template <typename T>
RenderGradients<T> render_backward(const GaussianScene<T>& scene, const CameraModel& camera,
                                   const PoseTransform& pose, const Image<T>& grad_color,
                                   const Image<T>& grad_mask, const Image<T>& grad_depth,
                                   const RenderOptions& options = {}) {
  ForwardState<T> state;
  render(scene, camera, pose, options, &state);
  return render_backward(scene, state, grad_color, grad_mask, grad_depth);
}

template <typename T>
void accumulate_gradients(RenderGradients<T>& into, const RenderGradients<T>& from, int sh_degree) {
  if (into.primitives.empty()) {
    into = from;
    return;
  }
  if (into.primitives.size() != from.primitives.size())
    throw ShapeMismatch("accumulate_gradients: size mismatch");
  for (std::size_t i = 0; i < from.primitives.size(); ++i) {
    for_each_param_block(
        sh_degree,
        [](ParamGroup, int n, T* a, const T* b) {
          for (int k = 0; k < n; ++k) a[k] += b[k];
        },
        into.primitives[i], from.primitives[i]);
    into.mean2d_norm[i] += from.mean2d_norm[i];
    into.visible[i] = into.visible[i] | from.visible[i];
  }
}

}  // namespace mirror_splat

#pragma once

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mirror_splat/error.hpp"
#include "mirror_splat/geometry.hpp"
#include "mirror_splat/random.hpp"
#include "mirror_splat/scene.hpp"

namespace mirror_splat {

struct MirrorEstimate {
  Plane plane;
  std::vector<std::uint32_t> inlier_indices;
  double inlier_rms = 0.0;
  double support = 0.0;  // inlier fraction
};

// Indices of primitives with mirror attribute > tau_m and opacity > tau_alpha.
template <typename T>
std::vector<std::uint32_t> filter_mirror_gaussians(const GaussianScene<T>& scene, double tau_m,
                                                   double tau_alpha) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 0; i < scene.size(); ++i) {
    const auto& p = scene.primitives[i];
    if (static_cast<double>(p.mirror()) > tau_m && static_cast<double>(p.opacity()) > tau_alpha)
      out.push_back(i);
  }
  return out;
}

template <typename T>
std::vector<Eigen::Vector3d> gather_positions(const GaussianScene<T>& scene,
                                              const std::vector<std::uint32_t>& indices) {
  std::vector<Eigen::Vector3d> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(scene.primitives[i].position.template cast<double>());
  return out;
}

template <typename T>
double bbox_diagonal(const GaussianScene<T>& scene) {
  if (scene.empty()) return 0.0;
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (const auto& p : scene.primitives) {
    const Eigen::Vector3d x = p.position.template cast<double>();
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  return (hi - lo).norm();
}

// Weighted least-squares plane: weighted centroid and the smallest eigenvector
// of the weighted scatter matrix. Returns nullopt if the points span no plane.
inline std::optional<Plane> fit_plane_least_squares(const std::vector<Eigen::Vector3d>& points,
                                                    const std::vector<std::uint32_t>& subset,
                                                    const std::vector<double>& weights) {
  if (subset.size() < 3) return std::nullopt;
  double wsum = 0;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (auto i : subset) {
    const double w = weights.empty() ? 1.0 : weights[i];
    wsum += w;
    centroid += w * points[i];
  }
  if (!(wsum > 0)) return std::nullopt;
  centroid /= wsum;
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (auto i : subset) {
    const double w = weights.empty() ? 1.0 : weights[i];
    const Eigen::Vector3d d = points[i] - centroid;
    scatter += w * d * d.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
  const Eigen::Vector3d values = eig.eigenvalues();
  // The middle eigenvalue vanishes when the points are collinear.
  if (!(values[1] > 1e-24 * std::max(1.0, values[2]))) return std::nullopt;
  const Eigen::Vector3d normal = eig.eigenvectors().col(0).normalized();
  return Plane{normal, -normal.dot(centroid)};
}

// RANSAC over 3-point hypotheses, then a least-squares refinement on the
// inliers (optionally weighted) and one inlier re-selection pass.
inline MirrorEstimate ransac_plane(const std::vector<Eigen::Vector3d>& points, int iterations,
                                   double threshold, std::uint64_t seed,
                                   const std::vector<double>& weights = {}) {
  const std::size_t n = points.size();
  if (n < 3) throw EstimationError("plane estimation needs at least 3 points, got " + std::to_string(n));
  if (!weights.empty() && weights.size() != n)
    throw PreconditionError("ransac_plane: weight count does not match point count");
  if (iterations < 1) throw PreconditionError("ransac_plane: iterations must be >= 1");

  double extent = 0;
  for (const auto& p : points) extent = std::max(extent, (p - points[0]).norm());

  Rng rng(seed);
  bool found = false;
  Plane best;
  std::size_t best_count = 0;
  double best_err = std::numeric_limits<double>::infinity();
  for (int it = 0; it < iterations; ++it) {
    const std::size_t a = rng.index(n);
    std::size_t b = rng.index(n - 1);
    if (b >= a) ++b;
    std::size_t c = rng.index(n - 2);
    if (c >= std::min(a, b)) ++c;
    if (c >= std::max(a, b)) ++c;
    const Eigen::Vector3d cross = (points[b] - points[a]).cross(points[c] - points[a]);
    if (!(cross.norm() > 1e-12 * std::max(1.0, extent * extent))) continue;
    const Eigen::Vector3d normal = cross.normalized();
    const Plane h{normal, -normal.dot(points[a])};
    std::size_t count = 0;
    double err = 0;
    for (const auto& p : points) {
      const double r = std::abs(plane_point_residual(h, p));
      if (r <= threshold) {
        ++count;
        err += r * r;
      }
    }
    if (count > best_count || (count == best_count && err < best_err)) {
      best = h;
      best_count = count;
      best_err = err;
      found = true;
    }
  }
  if (!found) throw EstimationError("all RANSAC samples were degenerate (points are collinear)");

  auto select = [&](const Plane& plane) {
    std::vector<std::uint32_t> inliers;
    for (std::uint32_t i = 0; i < n; ++i)
      if (std::abs(plane_point_residual(plane, points[i])) <= threshold) inliers.push_back(i);
    return inliers;
  };
  MirrorEstimate est;
  est.plane = best;
  if (auto refined = fit_plane_least_squares(points, select(best), weights)) est.plane = *refined;
  est.inlier_indices = select(est.plane);
  if (est.inlier_indices.empty()) {
    est.plane = best;
    est.inlier_indices = select(best);
  }
  double sq = 0;
  for (auto i : est.inlier_indices) sq += std::pow(plane_point_residual(est.plane, points[i]), 2);
  est.inlier_rms = std::sqrt(sq / static_cast<double>(est.inlier_indices.size()));
  est.support = static_cast<double>(est.inlier_indices.size()) / static_cast<double>(n);
  return est;
}

// Flips the plane so that `point` has a positive residual.
inline Plane orient_toward(const Plane& plane, const Eigen::Vector3d& point) {
  if (plane_point_residual(plane, point) >= 0) return plane;
  return Plane{-plane.normal, -plane.offset};
}

struct PlaneLoss {
  double value = 0.0;
  Eigen::Vector3d grad_normal = Eigen::Vector3d::Zero();
  double grad_offset = 0.0;
  std::vector<Eigen::Vector3d> grad_points;
};

// Mean absolute point-to-plane residual with its subgradient (0 at residual 0).
inline PlaneLoss plane_loss(const Plane& plane, const std::vector<Eigen::Vector3d>& points) {
  PlaneLoss out;
  out.grad_points.assign(points.size(), Eigen::Vector3d::Zero());
  if (points.empty()) return out;
  const double inv_n = 1.0 / static_cast<double>(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double r = plane_point_residual(plane, points[i]);
    out.value += std::abs(r) * inv_n;
    const double s = r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0);
    out.grad_normal += s * inv_n * points[i];
    out.grad_offset += s * inv_n;
    out.grad_points[i] = s * inv_n * plane.normal;
  }
  return out;
}

}  // namespace mirror_splat

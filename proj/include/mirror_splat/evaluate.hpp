#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mirror_splat/dataset.hpp"
#include "mirror_splat/io.hpp"
#include "mirror_splat/losses.hpp"
#include "mirror_splat/mirror.hpp"
#include "mirror_splat/rasterizer.hpp"

namespace mirror_splat {

enum class Region { full, mirror };

inline Region region_from_string(const std::string& s) {
  if (s == "full") return Region::full;
  if (s == "mirror") return Region::mirror;
  throw ConfigError("unknown region '" + s + "' (expected full or mirror)");
}

inline const char* to_string(Region r) { return r == Region::full ? "full" : "mirror"; }

struct ViewMetrics {
  std::string name;
  std::optional<double> psnr;  // empty when the region has no pixels
  std::optional<double> ssim;
  double mask_iou = 0;
};

struct EvalReport {
  Region region = Region::full;
  double psnr = 0;  // mean over views with a defined value
  double ssim = 0;
  double fps = 0;
  int views = 0;
  int undefined_views = 0;
  double mask_iou = 0;  // pooled over all views
  // Mean |D - D_gt| / D_gt of the original-view depth over GT mirror pixels.
  std::optional<double> mirror_depth_rel_error;
  std::vector<ViewMetrics> per_view;
};

struct Frame {
  RenderOutput<float> original;
  Image<float> fused;
};

// Original render fused with the mirrored view; without a plane the fused
// image is the original render.
template <typename T>
Frame render_frame(const GaussianScene<T>& scene, const std::optional<Plane>& plane,
                   const CameraModel& camera, const PoseTransform& pose, double clip_margin) {
  const auto sf = scene.template cast<float>();
  Frame f;
  f.original = render(sf, camera, pose);
  if (plane) {
    const auto mirrored =
        render_mirror_view(sf, camera, pose, *plane, std::optional<double>(clip_margin));
    f.fused = fuse_images(f.original.color, mirrored.color, f.original.mask);
  } else {
    f.fused = f.original.color;
  }
  return f;
}

template <typename T>
EvalReport evaluate(const GaussianScene<T>& scene, const std::optional<Plane>& plane,
                    const MirrorDataset& ds, Region region, double clip_margin,
                    int timed_renders = 50) {
  if (ds.test_views.empty()) throw PreconditionError("evaluate: the dataset has no test views");
  EvalReport rep;
  rep.region = region;
  const auto sf = scene.template cast<float>();
  double psnr_sum = 0, ssim_sum = 0;
  long inter = 0, uni = 0;
  double depth_err = 0;
  long depth_n = 0;
  for (const auto& view : ds.test_views) {
    const Frame f = render_frame(sf, plane, view.camera, view.pose, clip_margin);
    ViewMetrics vm;
    vm.name = view.name;
    double se = 0;
    long n = 0;
    for (int y = 0; y < view.camera.height; ++y)
      for (int x = 0; x < view.camera.width; ++x) {
        const bool gt_m = view.mask.at(x, y) > 0.5f;
        const bool pr_m = f.original.mask.at(x, y) > 0.5f;
        inter += gt_m && pr_m;
        uni += gt_m || pr_m;
        if (gt_m && view.depth) {
          const double d_gt = view.depth->at(x, y);
          if (std::isfinite(d_gt) && d_gt > 0) {
            depth_err += std::abs(f.original.depth.at(x, y) - d_gt) / d_gt;
            ++depth_n;
          }
        }
        if (region == Region::mirror && !gt_m) continue;
        for (int c = 0; c < 3; ++c) {
          const double d = static_cast<double>(f.fused.at(x, y, c)) - view.image.at(x, y, c);
          se += d * d;
        }
        n += 3;
      }
    long vi = 0, vu = 0;
    for (std::size_t p = 0; p < view.mask.size(); ++p) {
      const bool a = view.mask.data[p] > 0.5f, b = f.original.mask.data[p] > 0.5f;
      vi += a && b;
      vu += a || b;
    }
    vm.mask_iou = vu ? static_cast<double>(vi) / vu : 1.0;
    if (n > 0) vm.psnr = psnr_from_mse(se / n);
    const Image<double> smap = ssim_map(f.fused, view.image);
    double s = 0;
    long sn = 0;
    const int half = ssim_detail::kWindow / 2;
    for (int y = 0; y < smap.height; ++y)
      for (int x = 0; x < smap.width; ++x) {
        if (region == Region::mirror && !(view.mask.at(x + half, y + half) > 0.5f)) continue;
        s += smap.at(x, y);
        ++sn;
      }
    if (sn > 0) vm.ssim = s / sn;
    if (vm.psnr && vm.ssim) {
      psnr_sum += *vm.psnr;
      ssim_sum += *vm.ssim;
      ++rep.views;
    } else {
      ++rep.undefined_views;
    }
    rep.per_view.push_back(vm);
  }
  if (rep.views > 0) {
    rep.psnr = psnr_sum / rep.views;
    rep.ssim = ssim_sum / rep.views;
  }
  rep.mask_iou = uni ? static_cast<double>(inter) / uni : 1.0;
  if (depth_n > 0) rep.mirror_depth_rel_error = depth_err / depth_n;

  if (timed_renders > 0) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < timed_renders; ++i) {
      const auto& view = ds.test_views[static_cast<std::size_t>(i) % ds.test_views.size()];
      render_frame(sf, plane, view.camera, view.pose, clip_margin);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.fps = secs > 0 ? timed_renders / secs : 0.0;
  }
  return rep;
}

inline Json to_json(const EvalReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  Json views = Json::array();
  for (const auto& v : r.per_view)
    views.push_back({{"name", v.name}, {"psnr", opt(v.psnr)}, {"ssim", opt(v.ssim)}, {"mask_iou", v.mask_iou}});
  return Json{{"region", to_string(r.region)},
              {"psnr", r.views ? Json(r.psnr) : Json(nullptr)},
              {"ssim", r.views ? Json(r.ssim) : Json(nullptr)},
              {"fps", r.fps},
              {"views", r.views},
              {"undefined_views", r.undefined_views},
              {"mask_iou", r.mask_iou},
              {"mirror_depth_rel_error", opt(r.mirror_depth_rel_error)},
              {"per_view", views}};
}

}  // namespace mirror_splat

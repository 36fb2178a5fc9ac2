#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mirror_splat/dataset.hpp"
#include "mirror_splat/densify.hpp"
#include "mirror_splat/init.hpp"
#include "mirror_splat/io.hpp"
#include "mirror_splat/losses.hpp"
#include "mirror_splat/mirror.hpp"
#include "mirror_splat/optim.hpp"
#include "mirror_splat/plane_fit.hpp"
#include "mirror_splat/rasterizer.hpp"

namespace mirror_splat {

struct LearningRates {
  double position = 1.6e-4;  // times the scene extent
  double position_final_ratio = 0.01;
  double rotation = 1e-3;
  double log_scale = 5e-3;
  double opacity = 5e-2;
  double sh = 2.5e-3;
  double mirror = 5e-2;
  double plane = 1e-4;
};

struct TrainConfig {
  double gamma = 0.2;
  double lambda_mask = 1.0;
  double lambda_depth = 0.1;
  int stage1_steps = 1000;
  int stage2_steps = 4000;
  int plane_warmup_step = 500;
  LearningRates lr;
  double tau_m = 0.5;
  double tau_alpha = 0.5;
  int ransac_iterations = 512;
  double ransac_threshold_ratio = 0.01;  // of the scene bounding-box diagonal
  bool plane_moves_gaussians = true;
  int densify_interval = 200;
  DensifyConfig densify;
  int init_points = 5000;
  std::string init = "depth";  // "depth" (back-projected GT depth) or "uniform" (frustum union)
  int sh_degree = 2;
  std::uint64_t seed = 7;
  bool vanilla = false;

  static TrainConfig preset(const std::string& name) {
    TrainConfig c;
    if (name == "desk") return c;
    if (name == "paper") {
      c.stage1_steps = 5000;
      c.stage2_steps = 65000;
      return c;
    }
    throw ConfigError("unknown preset '" + name + "' (expected desk or paper)");
  }

  void validate() const {
    if (!(gamma >= 0 && gamma < 1)) throw ConfigError("gamma must lie in [0, 1)");
    if (!(lambda_mask >= 0) || !(lambda_depth >= 0)) throw ConfigError("loss weights must be >= 0");
    if (stage1_steps < 0 || stage2_steps < 0) throw ConfigError("step counts must be >= 0");
    if (plane_warmup_step < 0) throw ConfigError("plane_warmup_step must be >= 0");
    if (!(tau_m > 0 && tau_m < 1) || !(tau_alpha > 0 && tau_alpha < 1))
      throw ConfigError("filter thresholds must lie in (0, 1)");
    if (ransac_iterations < 1 || !(ransac_threshold_ratio > 0))
      throw ConfigError("RANSAC needs >= 1 iteration and a positive threshold");
    if (densify_interval < 1) throw ConfigError("densify_interval must be >= 1");
    if (init_points < 1) throw ConfigError("init_points must be >= 1");
    if (init != "depth" && init != "uniform") throw ConfigError("init must be depth or uniform");
    if (sh_degree < 0 || sh_degree > kMaxShDegree) throw ConfigError("sh_degree must be in [0, 3]");
    if (densify.max_gaussians < 1) throw ConfigError("max_gaussians must be >= 1");
    for (double r : {lr.position, lr.rotation, lr.log_scale, lr.opacity, lr.sh, lr.mirror, lr.plane})
      if (!(r >= 0)) throw ConfigError("learning rates must be >= 0");
    if (!(lr.position_final_ratio > 0)) throw ConfigError("position_final_ratio must be > 0");
  }
};

inline Json to_json(const TrainConfig& c) {
  return Json{{"gamma", c.gamma},
              {"lambda_mask", c.lambda_mask},
              {"lambda_depth", c.lambda_depth},
              {"stage1_steps", c.stage1_steps},
              {"stage2_steps", c.stage2_steps},
              {"plane_warmup_step", c.plane_warmup_step},
              {"lr",
               {{"position", c.lr.position},
                {"position_final_ratio", c.lr.position_final_ratio},
                {"rotation", c.lr.rotation},
                {"log_scale", c.lr.log_scale},
                {"opacity", c.lr.opacity},
                {"sh", c.lr.sh},
                {"mirror", c.lr.mirror},
                {"plane", c.lr.plane}}},
              {"tau_m", c.tau_m},
              {"tau_alpha", c.tau_alpha},
              {"ransac_iterations", c.ransac_iterations},
              {"ransac_threshold_ratio", c.ransac_threshold_ratio},
              {"plane_moves_gaussians", c.plane_moves_gaussians},
              {"densify_interval", c.densify_interval},
              {"densify",
               {{"grad_threshold", c.densify.grad_threshold},
                {"percent_dense", c.densify.percent_dense},
                {"prune_opacity", c.densify.prune_opacity},
                {"split_scale_divisor", c.densify.split_scale_divisor},
                {"max_gaussians", c.densify.max_gaussians}}},
              {"init_points", c.init_points},
              {"init", c.init},
              {"sh_degree", c.sh_degree},
              {"seed", c.seed},
              {"vanilla", c.vanilla}};
}

// Overrides the fields present in `j`; unknown keys are rejected.
inline TrainConfig config_from_json(const Json& j, TrainConfig c = {}) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  auto fail = [](const std::string& key) { throw ConfigError("unknown config key '" + key + "'"); };
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const Json& v = it.value();
      if (k == "gamma") c.gamma = v.get<double>();
      else if (k == "lambda_mask") c.lambda_mask = v.get<double>();
      else if (k == "lambda_depth") c.lambda_depth = v.get<double>();
      else if (k == "stage1_steps") c.stage1_steps = v.get<int>();
      else if (k == "stage2_steps") c.stage2_steps = v.get<int>();
      else if (k == "plane_warmup_step") c.plane_warmup_step = v.get<int>();
      else if (k == "tau_m") c.tau_m = v.get<double>();
      else if (k == "tau_alpha") c.tau_alpha = v.get<double>();
      else if (k == "ransac_iterations") c.ransac_iterations = v.get<int>();
      else if (k == "ransac_threshold_ratio") c.ransac_threshold_ratio = v.get<double>();
      else if (k == "plane_moves_gaussians") c.plane_moves_gaussians = v.get<bool>();
      else if (k == "densify_interval") c.densify_interval = v.get<int>();
      else if (k == "init_points") c.init_points = v.get<int>();
      else if (k == "init") c.init = v.get<std::string>();
      else if (k == "sh_degree") c.sh_degree = v.get<int>();
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else if (k == "vanilla") c.vanilla = v.get<bool>();
      else if (k == "lr") {
        for (auto lt = v.begin(); lt != v.end(); ++lt) {
          const std::string& lk = lt.key();
          const double lv = lt.value().get<double>();
          if (lk == "position") c.lr.position = lv;
          else if (lk == "position_final_ratio") c.lr.position_final_ratio = lv;
          else if (lk == "rotation") c.lr.rotation = lv;
          else if (lk == "log_scale") c.lr.log_scale = lv;
          else if (lk == "opacity") c.lr.opacity = lv;
          else if (lk == "sh") c.lr.sh = lv;
          else if (lk == "mirror") c.lr.mirror = lv;
          else if (lk == "plane") c.lr.plane = lv;
          else fail("lr." + lk);
        }
      } else if (k == "densify") {
        for (auto dt = v.begin(); dt != v.end(); ++dt) {
          const std::string& dk = dt.key();
          if (dk == "grad_threshold") c.densify.grad_threshold = dt.value().get<double>();
          else if (dk == "percent_dense") c.densify.percent_dense = dt.value().get<double>();
          else if (dk == "prune_opacity") c.densify.prune_opacity = dt.value().get<double>();
          else if (dk == "split_scale_divisor") c.densify.split_scale_divisor = dt.value().get<double>();
          else if (dk == "max_gaussians") c.densify.max_gaussians = dt.value().get<std::size_t>();
          else fail("densify." + dk);
        }
      } else {
        fail(k);
      }
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

struct LossReport {
  int stage = 1;
  long step = 0;
  std::string view;
  double l1 = 0, dssim = 0;
  double rgb = 0;  // (1 - gamma) l1 + gamma dssim
  double mask = 0, depth = 0, plane = 0;
  double total = 0;
};

// Weighted sum of a report's parts under `config`.
inline double weighted_total(const LossReport& r, const TrainConfig& c) {
  if (r.stage == 1) return c.lambda_mask * r.mask + r.rgb + c.lambda_depth * r.depth + r.plane;
  return c.lambda_mask * r.mask + r.rgb;
}

inline Json to_json(const LossReport& r) {
  return Json{{"stage", r.stage}, {"step", r.step},   {"view", r.view},   {"l1", r.l1},
              {"dssim", r.dssim}, {"rgb", r.rgb},     {"mask", r.mask},   {"depth", r.depth},
              {"plane", r.plane}, {"total", r.total}};
}

using LossSink = std::function<void(const LossReport&)>;

template <typename T>
struct Stage1Loss {
  LossReport report;
  Image<T> grad_color, grad_mask, grad_depth;
  Image<float> rgb_target;  // red-filled ground truth
  PlaneLoss plane;
};

template <typename T>
Stage1Loss<T> stage1_loss(const RenderOutput<T>& out, const ViewRecord& view,
                          const std::optional<Plane>& plane,
                          const std::vector<Eigen::Vector3d>& filtered_points,
                          const TrainConfig& config) {
  Stage1Loss<T> s;
  s.rgb_target = red_fill(view.image, view.mask);
  const auto l1 = l1_loss(out.color, s.rgb_target);
  const auto ds = d_ssim_loss(out.color, s.rgb_target);
  const auto ml = mask_loss(out.mask, view.mask);
  LossValue<T> dl{0.0, Image<T>(out.depth.width, out.depth.height, 1)};
  if (view.depth) dl = depth_loss(out.depth, *view.depth, depth_valid_mask(out.alpha, *view.depth));
  if (plane) s.plane = plane_loss(*plane, filtered_points);

  const T g = static_cast<T>(config.gamma);
  s.grad_color = Image<T>(out.color.width, out.color.height, 3);
  for (std::size_t i = 0; i < s.grad_color.size(); ++i)
    s.grad_color.data[i] = (T(1) - g) * l1.grad.data[i] + g * ds.grad.data[i];
  s.grad_mask = ml.grad;
  for (auto& v : s.grad_mask.data) v *= static_cast<T>(config.lambda_mask);
  s.grad_depth = dl.grad;
  for (auto& v : s.grad_depth.data) v *= static_cast<T>(config.lambda_depth);

  auto& r = s.report;
  r.stage = 1;
  r.view = view.name;
  r.l1 = l1.value;
  r.dssim = ds.value;
  r.rgb = (1 - config.gamma) * l1.value + config.gamma * ds.value;
  r.mask = ml.value;
  r.depth = dl.value;
  r.plane = s.plane.value;
  r.total = weighted_total(r, config);
  return s;
}

template <typename T>
struct Stage2Loss {
  LossReport report;
  Image<T> grad_fused;
  Image<T> grad_mask;  // from the mask term only
};

template <typename T>
Stage2Loss<T> stage2_loss(const Image<T>& fused, const Image<T>& mask, const ViewRecord& view,
                          const TrainConfig& config) {
  Stage2Loss<T> s;
  const auto l1 = l1_loss(fused, view.image);
  const auto ds = d_ssim_loss(fused, view.image);
  const auto ml = mask_loss(mask, view.mask);
  const T g = static_cast<T>(config.gamma);
  s.grad_fused = Image<T>(fused.width, fused.height, fused.channels);
  for (std::size_t i = 0; i < fused.size(); ++i)
    s.grad_fused.data[i] = (T(1) - g) * l1.grad.data[i] + g * ds.grad.data[i];
  s.grad_mask = ml.grad;
  for (auto& v : s.grad_mask.data) v *= static_cast<T>(config.lambda_mask);
  auto& r = s.report;
  r.stage = 2;
  r.view = view.name;
  r.l1 = l1.value;
  r.dssim = ds.value;
  r.rgb = (1 - config.gamma) * l1.value + config.gamma * ds.value;
  r.mask = ml.value;
  r.total = weighted_total(r, config);
  return s;
}

// 1.1 times the largest distance of a training camera from their mean center.
inline double camera_extent(const MirrorDataset& ds) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& v : ds.train_views) mean += v.pose.center();
  mean /= static_cast<double>(ds.train_views.size());
  double r = 0;
  for (const auto& v : ds.train_views) r = std::max(r, (v.pose.center() - mean).norm());
  return 1.1 * std::max(r, 1e-3);
}

inline Eigen::Vector3d mean_camera_center(const MirrorDataset& ds) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& v : ds.train_views) mean += v.pose.center();
  return mean / static_cast<double>(ds.train_views.size());
}

inline bool dataset_has_mirror(const MirrorDataset& ds) {
  for (const auto& v : ds.train_views)
    for (float m : v.mask.data)
      if (m > 0.5f) return true;
  return false;
}

// Global step counter, learning rates and view order shared by both stages.
template <typename T>
struct TrainState {
  GaussianScene<T> scene;
  AdamState<T> adam;
  DensifyStats stats;
  Rng rng;
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  long global_step = 0;
  long total_steps = 1;
  double extent = 1.0;

  TrainState(GaussianScene<T> s, std::uint64_t seed) : scene(std::move(s)), rng(seed) {}

  const ViewRecord& next_view(const MirrorDataset& ds) {
    if (cursor >= order.size()) {
      order.resize(ds.train_views.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      rng.shuffle(order);
      cursor = 0;
    }
    return ds.train_views[order[cursor++]];
  }

  GroupRates rates(const TrainConfig& c) const {
    const double t = total_steps > 0 ? static_cast<double>(global_step) / total_steps : 0.0;
    const double pos = c.lr.position * extent * std::pow(c.lr.position_final_ratio, std::min(1.0, t));
    GroupRates r{};
    r[static_cast<int>(ParamGroup::position)] = pos;
    r[static_cast<int>(ParamGroup::rotation)] = c.lr.rotation;
    r[static_cast<int>(ParamGroup::log_scale)] = c.lr.log_scale;
    r[static_cast<int>(ParamGroup::opacity)] = c.lr.opacity;
    r[static_cast<int>(ParamGroup::sh)] = c.lr.sh;
    r[static_cast<int>(ParamGroup::mirror)] = c.lr.mirror;
    return r;
  }

  void maybe_densify(const TrainConfig& c, int stage_step, int stage_steps) {
    const int done = stage_step + 1;
    if (done % c.densify_interval != 0 || 2 * done > stage_steps) return;
    densify_and_prune(scene, stats, adam, c.densify, extent, rng);
  }
};

template <typename T>
struct TrainResult {
  GaussianScene<T> scene;
  std::optional<Plane> plane;
  std::optional<MirrorEstimate> estimate;
  double clip_margin = 1e-3;
  bool mirror_present = true;
  long skipped_steps = 0;
  double stage1_seconds = 0, stage2_seconds = 0;
};

namespace train_detail {

template <typename T>
MirrorEstimate estimate_plane(const GaussianScene<T>& scene, const TrainConfig& c,
                              const MirrorDataset& ds, std::uint64_t seed) {
  const auto idx = filter_mirror_gaussians(scene, c.tau_m, c.tau_alpha);
  if (idx.size() < 3)
    throw TrainingError("only " + std::to_string(idx.size()) +
                        " mirror Gaussians pass the filter after warmup; lower tau_m / tau_alpha "
                        "or lengthen the warmup");
  const auto points = gather_positions(scene, idx);
  std::vector<double> weights;
  for (auto i : idx)
    weights.push_back(static_cast<double>(scene.primitives[i].opacity()) *
                      static_cast<double>(scene.primitives[i].mirror()));
  const double threshold = c.ransac_threshold_ratio * bbox_diagonal(scene);
  MirrorEstimate est;
  try {
    est = ransac_plane(points, c.ransac_iterations, threshold, seed, weights);
  } catch (const EstimationError& e) {
    throw TrainingError(std::string("mirror plane estimation failed: ") + e.what());
  }
  for (auto& i : est.inlier_indices) i = idx[i];
  est.plane = orient_toward(est.plane, mean_camera_center(ds));
  return est;
}

}  // namespace train_detail

// Stage 1: supervised on red-filled images, mirror masks and depth; the plane
// is estimated by RANSAC at the warmup step and then refined with the plane
// loss. Throws TrainingError when the plane was never estimated although the
// dataset shows a mirror.
template <typename T>
void run_stage1(TrainState<T>& st, TrainResult<T>& result, const MirrorDataset& ds,
                const TrainConfig& c, const LossSink& sink) {
  result.mirror_present = dataset_has_mirror(ds);
  const int steps = c.stage1_steps;
  const int warmup = std::min(c.plane_warmup_step, steps / 2);
  PlaneAdam plane_adam;
  std::optional<Plane> plane;
  double threshold = 0;
  for (int k = 0; k < steps; ++k) {
    if (result.mirror_present && k == warmup) {
      const auto est = train_detail::estimate_plane(st.scene, c, ds, c.seed ^ 0x5eedULL);
      plane = est.plane;
      threshold = c.ransac_threshold_ratio * bbox_diagonal(st.scene);
      result.estimate = est;
    }
    const ViewRecord& view = st.next_view(ds);
    ForwardState<T> fs;
    const auto out = render(st.scene, view.camera, view.pose, {}, &fs);
    std::vector<std::uint32_t> idx;
    std::vector<Eigen::Vector3d> points;
    if (plane) {
      idx = filter_mirror_gaussians(st.scene, c.tau_m, c.tau_alpha);
      points = gather_positions(st.scene, idx);
    }
    auto loss = stage1_loss(out, view, plane, points, c);
    loss.report.step = st.global_step;
    auto grads = render_backward(st.scene, fs, loss.grad_color, loss.grad_mask, loss.grad_depth);
    if (plane && c.plane_moves_gaussians) {
      for (std::size_t j = 0; j < idx.size(); ++j)
        grads.primitives[idx[j]].position += loss.plane.grad_points[j].template cast<T>();
    }
    st.stats.add(grads);
    adam_step(st.scene, grads.primitives, st.adam, st.rates(c));
    if (plane && !points.empty())
      plane_adam.update(*plane, loss.plane.grad_normal, loss.plane.grad_offset, c.lr.plane);
    if (sink) sink(loss.report);
    ++st.global_step;
    st.maybe_densify(c, k, steps);
  }
  if (result.mirror_present && !plane)
    throw TrainingError("stage 1 ended before the mirror plane was estimated (stage1_steps = " +
                        std::to_string(steps) + ")");
  if (plane) {
    result.plane = orient_toward(*plane, mean_camera_center(ds));
    result.clip_margin = threshold;
  }
}

template <typename T>
struct StepGradients {
  LossReport report;
  RenderGradients<T> grads;
};

// Loss and Gaussian gradients of one stage-2 step: original and mirrored
// renders fused through the rendered mask. Without a plane the original
// render is supervised alone.
template <typename T>
StepGradients<T> stage2_gradients(const GaussianScene<T>& scene, const ViewRecord& view,
                                  const std::optional<Plane>& plane, double clip_margin,
                                  const TrainConfig& c) {
  StepGradients<T> out;
  ForwardState<T> fo;
  const auto orig = render(scene, view.camera, view.pose, {}, &fo);
  const Image<T> zero_depth(view.camera.width, view.camera.height, 1);
  if (!plane) {
    auto loss = stage2_loss(orig.color, orig.mask, view, c);
    out.grads = render_backward(scene, fo, loss.grad_fused, loss.grad_mask, zero_depth);
    out.report = loss.report;
    return out;
  }
  ForwardState<T> fm;
  const auto mirrored = render_mirror_view(scene, view.camera, view.pose, *plane,
                                           std::optional<double>(clip_margin), &fm);
  const Image<T> fused = fuse_images(orig.color, mirrored.color, orig.mask);
  auto loss = stage2_loss(fused, orig.mask, view, c);
  const auto fg = fuse_images_backward(orig.color, mirrored.color, orig.mask, loss.grad_fused);
  Image<T> grad_mask = fg.mask;
  for (std::size_t i = 0; i < grad_mask.size(); ++i) grad_mask.data[i] += loss.grad_mask.data[i];
  out.grads = render_backward(scene, fo, fg.original, grad_mask, zero_depth);
  accumulate_gradients(out.grads, render_backward(scene, fm, fg.mirrored, zero_depth, zero_depth),
                       scene.sh_degree);
  out.report = loss.report;
  return out;
}

// Stage 2: the plane is frozen and only Gaussians are updated.
template <typename T>
void run_stage2(TrainState<T>& st, TrainResult<T>& result, const MirrorDataset& ds,
                const TrainConfig& c, const LossSink& sink) {
  for (int k = 0; k < c.stage2_steps; ++k) {
    const ViewRecord& view = st.next_view(ds);
    auto step = stage2_gradients(st.scene, view, result.plane, result.clip_margin, c);
    step.report.step = st.global_step;
    st.stats.add(step.grads);
    adam_step(st.scene, step.grads.primitives, st.adam, st.rates(c));
    if (sink) sink(step.report);
    ++st.global_step;
    st.maybe_densify(c, k, c.stage2_steps);
  }
}

// Plain 3DGS baseline: full-image photometric loss only, no mask, depth,
// plane or fusion, for stage1_steps + stage2_steps steps.
template <typename T>
void run_vanilla(TrainState<T>& st, const MirrorDataset& ds, const TrainConfig& c,
                 const LossSink& sink) {
  const int steps = c.stage1_steps + c.stage2_steps;
  for (int k = 0; k < steps; ++k) {
    const ViewRecord& view = st.next_view(ds);
    ForwardState<T> fo;
    const auto out = render(st.scene, view.camera, view.pose, {}, &fo);
    const auto l1 = l1_loss(out.color, view.image);
    const auto ds_loss = d_ssim_loss(out.color, view.image);
    const T g = static_cast<T>(c.gamma);
    Image<T> grad_color(out.color.width, out.color.height, 3);
    for (std::size_t i = 0; i < grad_color.size(); ++i)
      grad_color.data[i] = (T(1) - g) * l1.grad.data[i] + g * ds_loss.grad.data[i];
    const Image<T> zero(view.camera.width, view.camera.height, 1);
    const auto grads = render_backward(st.scene, fo, grad_color, zero, zero);
    LossReport r;
    r.stage = 0;
    r.step = st.global_step;
    r.view = view.name;
    r.l1 = l1.value;
    r.dssim = ds_loss.value;
    r.rgb = (1 - c.gamma) * l1.value + c.gamma * ds_loss.value;
    r.total = r.rgb;
    st.stats.add(grads);
    adam_step(st.scene, grads.primitives, st.adam, st.rates(c));
    if (sink) sink(r);
    ++st.global_step;
    // One densification window over the first half of the run.
    st.maybe_densify(c, k, steps);
  }
}

template <typename T = float>
GaussianScene<T> initial_scene(const MirrorDataset& ds, const TrainConfig& c) {
  bool has_depth = false;
  for (const auto& v : ds.train_views) has_depth = has_depth || v.depth.has_value();
  if (c.init == "uniform" || !has_depth) return init_scene<T>(ds, c.init_points, c.seed, c.sh_degree);
  return init_scene_from_depth<T>(ds, c.init_points, c.seed, c.sh_degree);
}

template <typename T>
TrainState<T> make_train_state(GaussianScene<T> scene, const MirrorDataset& ds,
                               const TrainConfig& c) {
  TrainState<T> st(std::move(scene), c.seed);
  st.extent = camera_extent(ds);
  st.total_steps = std::max(1, c.stage1_steps + c.stage2_steps);
  return st;
}

// Stage 1 on its own. Without mirror pixels in the data it trains plainly and
// leaves `plane` empty with `mirror_present` false.
template <typename T>
TrainResult<T> train_stage1(const GaussianScene<T>& scene, const MirrorDataset& ds,
                            const TrainConfig& c, const LossSink& sink = {}) {
  c.validate();
  validate_dataset(ds);
  auto st = make_train_state(scene, ds, c);
  TrainResult<T> result;
  run_stage1(st, result, ds, c, sink);
  result.skipped_steps = st.adam.skipped;
  result.scene = std::move(st.scene);
  return result;
}

// Stage 2 on its own with a frozen plane.
template <typename T>
GaussianScene<T> train_stage2(const GaussianScene<T>& scene, const Plane& plane,
                              const MirrorDataset& ds, const TrainConfig& c,
                              double clip_margin, const LossSink& sink = {}) {
  c.validate();
  validate_dataset(ds);
  auto st = make_train_state(scene, ds, c);
  st.global_step = c.stage1_steps;
  TrainResult<T> result;
  result.plane = normalize_plane(plane);
  result.clip_margin = clip_margin;
  run_stage2(st, result, ds, c, sink);
  return std::move(st.scene);
}

// Full pipeline (or the vanilla baseline when config.vanilla is set).
template <typename T>
TrainResult<T> train(const GaussianScene<T>& init, const MirrorDataset& ds, const TrainConfig& c,
                     const LossSink& sink = {}) {
  c.validate();
  validate_dataset(ds);
  auto st = make_train_state(init, ds, c);
  TrainResult<T> result;
  using clock = std::chrono::steady_clock;
  if (c.vanilla) {
    const auto t0 = clock::now();
    run_vanilla(st, ds, c, sink);
    result.stage1_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    result.mirror_present = dataset_has_mirror(ds);
  } else {
    const auto t0 = clock::now();
    run_stage1(st, result, ds, c, sink);
    const auto t1 = clock::now();
    run_stage2(st, result, ds, c, sink);
    result.stage1_seconds = std::chrono::duration<double>(t1 - t0).count();
    result.stage2_seconds = std::chrono::duration<double>(clock::now() - t1).count();
  }
  result.skipped_steps = st.adam.skipped;
  result.scene = std::move(st.scene);
  return result;
}

}  // namespace mirror_splat

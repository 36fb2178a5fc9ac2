#pragma once

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mirror_splat/checkpoint.hpp"
#include "mirror_splat/dataset.hpp"
#include "mirror_splat/evaluate.hpp"
#include "mirror_splat/io.hpp"
#include "mirror_splat/parallel.hpp"
#include "mirror_splat/synth.hpp"
#include "mirror_splat/training.hpp"

namespace mirror_splat {

inline constexpr const char* kVersionTag = "mirror_splat 0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitTraining = 4,
  kExitInternal = 5,
};

inline int exit_code_for(const Error& e) {
  switch (e.category()) {
    case Error::Category::config: return kExitConfig;
    case Error::Category::data: return kExitData;
    case Error::Category::training: return kExitTraining;
    default: return kExitInternal;
  }
}

struct RunManifest {
  std::string version = kVersionTag;
  std::string status = "running";
  std::string error;
  Json config;
  std::uint64_t seed = 0;
  std::string dataset;
  std::string out_dir;
  std::string checkpoint;
  std::string plane;
  std::string loss_log;
  unsigned threads = 1;
  double stage1_seconds = 0, stage2_seconds = 0;
};

inline Json to_json(const RunManifest& m) {
  return Json{{"version", m.version},
              {"status", m.status},
              {"error", m.error},
              {"config", m.config},
              {"seed", m.seed},
              {"dataset", m.dataset},
              {"outputs",
               {{"dir", m.out_dir}, {"checkpoint", m.checkpoint}, {"plane", m.plane}, {"loss_log", m.loss_log}}},
              {"threads", m.threads},
              {"timings", {{"stage1_seconds", m.stage1_seconds}, {"stage2_seconds", m.stage2_seconds}}}};
}

inline RunManifest manifest_from_json(const Json& j) {
  try {
    RunManifest m;
    m.version = j.at("version").get<std::string>();
    m.status = j.at("status").get<std::string>();
    m.config = j.at("config");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.dataset = j.at("dataset").get<std::string>();
    m.out_dir = j.at("outputs").at("dir").get<std::string>();
    return m;
  } catch (const Json::exception& e) {
    throw LoadError(std::string("malformed run manifest: ") + e.what());
  }
}

namespace cli_detail {

namespace fs = std::filesystem;

// "a.b=value": the value is parsed as JSON when possible, else taken as a string.
inline void apply_override(Json& patch, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(text);
  } catch (const Json::exception&) {
    value = text;
  }
  Json* node = &patch;
  std::size_t start = 0;
  for (std::size_t dot; (dot = key.find('.', start)) != std::string::npos; start = dot + 1) {
    Json& child = (*node)[key.substr(start, dot - start)];
    if (!child.is_object()) child = Json::object();
    node = &child;
  }
  (*node)[key.substr(start)] = value;
}

inline void merge_into(Json& base, const Json& patch) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (it.value().is_object() && base.contains(it.key()) && base[it.key()].is_object())
      merge_into(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
}

struct TrainArgs {
  std::string data, out, config_file, preset, manifest;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  bool vanilla = false;
};

inline TrainConfig resolve_config(const TrainArgs& a) {
  TrainConfig c = a.preset.empty() ? TrainConfig{} : TrainConfig::preset(a.preset);
  Json patch = Json::object();
  if (!a.config_file.empty()) {
    try {
      patch = read_json(a.config_file);
    } catch (const LoadError& e) {
      throw ConfigError(e.what());
    }
  }
  for (const auto& s : a.sets) apply_override(patch, s);
  c = config_from_json(patch, c);
  if (a.seed) c.seed = *a.seed;
  if (a.vanilla) c.vanilla = true;
  c.validate();
  return c;
}

inline Json histogram(const std::vector<double>& values, double lo, double hi, int bins) {
  std::vector<long> counts(bins, 0);
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    const int b = static_cast<int>(std::floor((v - lo) / (hi - lo) * bins));
    ++counts[std::clamp(b, 0, bins - 1)];
  }
  return Json{{"min", lo}, {"max", hi}, {"counts", counts}};
}

inline const ViewRecord& find_view(const MirrorDataset& ds, const std::string& name) {
  for (const auto* views : {&ds.train_views, &ds.test_views})
    for (const auto& v : *views)
      if (v.name == name) return v;
  throw ConfigError("no view named '" + name + "' in the dataset");
}

}  // namespace cli_detail

inline int cmd_synth(std::uint64_t seed, const std::filesystem::path& out, int train_views,
                     int test_views, int resolution) {
  ToySceneConfig cfg;
  cfg.train_views = train_views;
  cfg.test_views = test_views;
  cfg.width = cfg.height = resolution;
  cfg.focal = resolution;
  const ToyScene toy = synthesize_toy_scene(seed, cfg);
  save_dataset(toy.dataset, out);
  save_checkpoint(out / "gt", toy.scene, toy.plane, std::nullopt, false, cfg.clip_margin);
  std::cout << Json{{"dataset", out.string()},
                    {"train_views", toy.dataset.train_views.size()},
                    {"test_views", toy.dataset.test_views.size()},
                    {"gaussians", toy.scene.size()}}
                   .dump()
            << "\n";
  return kExitOk;
}

inline int cmd_train(cli_detail::TrainArgs args) {
  namespace fs = std::filesystem;
  TrainConfig config;
  if (!args.manifest.empty()) {
    const RunManifest prior = manifest_from_json(read_json(args.manifest));
    config = config_from_json(prior.config);
    if (args.data.empty()) args.data = prior.dataset;
    if (args.out.empty()) args.out = prior.out_dir;
  } else {
    config = cli_detail::resolve_config(args);
  }
  if (args.data.empty()) throw ConfigError("train needs --data (or --manifest)");
  if (args.out.empty()) throw ConfigError("train needs --out (or --manifest)");

  const fs::path out = args.out;
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());

  RunManifest m;
  m.config = to_json(config);
  m.seed = config.seed;
  m.dataset = fs::absolute(args.data).lexically_normal().string();
  m.out_dir = fs::absolute(out).lexically_normal().string();
  m.checkpoint = (out / "checkpoint").string();
  m.plane = (out / "plane.json").string();
  m.loss_log = (out / "loss_log.jsonl").string();
  m.threads = thread_count();
  const fs::path manifest_path = out / "run_manifest.json";
  write_json(manifest_path, to_json(m));

  try {
    const MirrorDataset ds = load_dataset(args.data);
    std::ofstream log(m.loss_log, std::ios::trunc);
    if (!log) throw IoError("cannot write " + m.loss_log);
    const auto result = train(initial_scene<float>(ds, config), ds, config,
                              [&](const LossReport& r) { log << to_json(r).dump() << "\n"; });
    log.close();
    save_checkpoint(out / "checkpoint", result.scene, result.plane, result.estimate, config.vanilla,
                    result.clip_margin);
    if (result.plane)
      write_json(m.plane, plane_to_json(*result.plane));
    else
      write_json(m.plane, Json{{"mirror_present", result.mirror_present}, {"plane", nullptr}});
    m.status = "complete";
    m.stage1_seconds = result.stage1_seconds;
    m.stage2_seconds = result.stage2_seconds;
    write_json(manifest_path, to_json(m));
    Json summary{{"gaussians", result.scene.size()},
                 {"mirror_present", result.mirror_present},
                 {"skipped_steps", result.skipped_steps},
                 {"stage1_seconds", result.stage1_seconds},
                 {"stage2_seconds", result.stage2_seconds}};
    if (result.plane) summary["plane"] = plane_to_json(*result.plane);
    if (!result.mirror_present && !config.vanilla) summary["warning"] = "no mirror pixels in the training masks";
    std::cout << summary.dump() << "\n";
  } catch (const Error& e) {
    m.status = "failed";
    m.error = e.what();
    write_json(manifest_path, to_json(m));
    throw;
  }
  return kExitOk;
}

inline int cmd_render(const std::filesystem::path& checkpoint, const std::filesystem::path& data,
                      const std::string& view_name, const std::filesystem::path& out_png,
                      const std::string& mask_out, const std::string& depth_out,
                      const std::string& renderer) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const MirrorDataset ds = load_dataset(data);
  const ViewRecord& view = cli_detail::find_view(ds, view_name);
  Image<float> color, mask, depth;
  if (renderer == "oracle") {
    if (!ck.plane) throw ConfigError("the oracle renderer needs a checkpoint with a mirror plane");
    const ViewRecord v = synthesize_view(ck.scene, *ck.plane, view.camera, view.pose, view.name, ck.clip_margin);
    color = v.image;
    mask = v.mask;
    depth = *v.depth;
  } else if (renderer == "tile") {
    const Frame f = render_frame(ck.scene, ck.plane, view.camera, view.pose, ck.clip_margin);
    color = f.fused;
    mask = f.original.mask;
    depth = f.original.depth;
  } else {
    throw ConfigError("unknown renderer '" + renderer + "' (expected tile or oracle)");
  }
  write_png(out_png, color, true);
  if (!mask_out.empty()) write_png(mask_out, mask, false);
  if (!depth_out.empty()) {
    if (std::filesystem::path(depth_out).extension() == ".pfm") {
      write_pfm(depth_out, depth);
    } else {
      float far = 0;
      for (float d : depth.data)
        if (std::isfinite(d)) far = std::max(far, d);
      Image<float> scaled = depth;
      for (auto& d : scaled.data) d = std::isfinite(d) && far > 0 ? d / far : 0.0f;
      write_png(depth_out, scaled, false);
    }
  }
  return kExitOk;
}

inline int cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& data,
                    const std::string& region, const std::string& out_json, int timed_renders) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const MirrorDataset ds = load_dataset(data);
  std::vector<Region> regions;
  if (region.empty())
    regions = {Region::full, Region::mirror};
  else
    regions = {region_from_string(region)};
  Json j = Json::object();
  for (Region r : regions)
    j[to_string(r)] = to_json(evaluate(ck.scene, ck.plane, ds, r, ck.clip_margin, timed_renders));
  if (!out_json.empty()) write_json(out_json, j);
  std::cout << j.dump() << "\n";
  return kExitOk;
}

inline int cmd_inspect(const std::filesystem::path& checkpoint, double tau_m, double tau_alpha) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  std::vector<double> opacity, mirror, log_scale;
  long mirror_count = 0;
  for (const auto& p : ck.scene.primitives) {
    opacity.push_back(p.opacity());
    mirror.push_back(p.mirror());
    log_scale.push_back(p.log_scale.maxCoeff());
    mirror_count += p.mirror() > tau_m;
  }
  Json j{{"gaussians", ck.scene.size()},
         {"sh_degree", ck.scene.sh_degree},
         {"vanilla", ck.vanilla},
         {"mirror_gaussians", mirror_count},
         {"mirror_filtered", filter_mirror_gaussians(ck.scene, tau_m, tau_alpha).size()},
         {"tau_m", tau_m},
         {"tau_alpha", tau_alpha},
         {"plane", ck.plane ? plane_to_json(*ck.plane) : Json(nullptr)},
         {"clip_margin", ck.clip_margin},
         {"histograms",
          {{"opacity", cli_detail::histogram(opacity, 0, 1, 10)},
           {"mirror", cli_detail::histogram(mirror, 0, 1, 10)},
           {"max_log_scale", cli_detail::histogram(log_scale, -10, 2, 12)}}}};
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

// Parses argv and dispatches to a subcommand; returns the process exit code.
inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Mirror-aware Gaussian splatting: synthesize, train, render, evaluate"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersionTag);

  std::uint64_t synth_seed = 7;
  std::string synth_out;
  int train_views = 30, test_views = 8, resolution = 64;
  auto* synth = app.add_subcommand("synth", "Write the synthetic mirror dataset and its ground truth");
  synth->add_option("--seed", synth_seed, "Scene seed");
  synth->add_option("--out", synth_out, "Dataset directory")->required();
  synth->add_option("--train-views", train_views, "Training views");
  synth->add_option("--test-views", test_views, "Held-out views");
  synth->add_option("--resolution", resolution, "Image width and height in pixels");

  cli_detail::TrainArgs targs;
  std::uint64_t train_seed = 0;
  auto* train_cmd = app.add_subcommand("train", "Run two-stage training (or the vanilla baseline)");
  train_cmd->add_option("--data", targs.data, "Dataset directory");
  train_cmd->add_option("--out", targs.out, "Output directory");
  train_cmd->add_option("--config", targs.config_file, "JSON config file");
  train_cmd->add_option("--preset", targs.preset, "Step schedule preset")->check(CLI::IsMember({"desk", "paper"}));
  auto* seed_opt = train_cmd->add_option("--seed", train_seed, "Training seed");
  train_cmd->add_flag("--vanilla", targs.vanilla, "Plain splatting baseline without mirror handling");
  train_cmd->add_option("--set", targs.sets, "Override a config field, e.g. lr.position=2e-4");
  train_cmd->add_option("--manifest", targs.manifest, "Re-run from a run_manifest.json")
      ->excludes("--config")
      ->excludes("--preset")
      ->excludes("--set")
      ->excludes(seed_opt)
      ->excludes("--vanilla");

  std::string ck_path, data_path, view_name, out_path, mask_out, depth_out, renderer = "tile";
  auto* render_cmd = app.add_subcommand("render", "Render the fused image at a dataset view's pose");
  render_cmd->add_option("--checkpoint", ck_path, "Checkpoint directory")->required();
  render_cmd->add_option("--data", data_path, "Dataset directory holding the pose")->required();
  render_cmd->add_option("--view", view_name, "View name, e.g. test_000")->required();
  render_cmd->add_option("--out", out_path, "Output PNG")->required();
  render_cmd->add_option("--mask", mask_out, "Optional mask PNG");
  render_cmd->add_option("--depth", depth_out, "Optional depth output (.pfm or normalized .png)");
  render_cmd->add_option("--renderer", renderer, "tile or oracle")->check(CLI::IsMember({"tile", "oracle"}));

  std::string region, eval_out;
  int timed = 50;
  auto* eval_cmd = app.add_subcommand("eval", "PSNR, SSIM, FPS, mask IoU and depth error on held-out views");
  eval_cmd->add_option("--checkpoint", ck_path, "Checkpoint directory")->required();
  eval_cmd->add_option("--data", data_path, "Dataset directory")->required();
  eval_cmd->add_option("--region", region, "full or mirror (default: both)")->check(CLI::IsMember({"full", "mirror"}));
  eval_cmd->add_option("--out", eval_out, "Also write the metrics JSON here");
  eval_cmd->add_option("--timed-renders", timed, "Renders used for the FPS figure");

  double tau_m = 0.5, tau_alpha = 0.5;
  auto* inspect_cmd = app.add_subcommand("inspect", "Summarize a checkpoint");
  inspect_cmd->add_option("--checkpoint", ck_path, "Checkpoint directory")->required();
  inspect_cmd->add_option("--tau-m", tau_m, "Mirror attribute threshold");
  inspect_cmd->add_option("--tau-alpha", tau_alpha, "Opacity threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*synth) return cmd_synth(synth_seed, synth_out, train_views, test_views, resolution);
    if (*train_cmd) {
      if (*seed_opt) targs.seed = train_seed;
      return cmd_train(targs);
    }
    if (*render_cmd) return cmd_render(ck_path, data_path, view_name, out_path, mask_out, depth_out, renderer);
    if (*eval_cmd) return cmd_eval(ck_path, data_path, region, eval_out, timed);
    if (*inspect_cmd) return cmd_inspect(ck_path, tau_m, tau_alpha);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace mirror_splat

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails. Usage: acceptance [work_dir] [criterion...]

#include <algorithm>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>

#include "gradient_check.hpp"
#include "mirror_splat/cli.hpp"
#include "mirror_splat/oracle.hpp"
#include "test_util.hpp"

using namespace mirror_splat;
namespace fs = std::filesystem;
namespace mt = mirror_splat::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double angle_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::acos(std::clamp(std::abs(a.dot(b)), 0.0, 1.0)) * 180.0 / std::numbers::pi;
}

// Offset difference after aligning the normals' signs.
double offset_gap(const Plane& a, const Plane& b) {
  return std::abs(a.offset - (a.normal.dot(b.normal) >= 0 ? 1.0 : -1.0) * b.offset);
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mirror_splat");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void criterion1(Outcome& o) {
  Rng rng(1);
  double involution = 0, det = 0, fixed = 0, oracle = 0;
  for (int i = 0; i < 1000; ++i) {
    const Plane plane = mt::random_plane(rng);
    const Eigen::Matrix4d t = mirror_transform(plane);
    involution = std::max(involution, (t * t - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff());
    det = std::max(det, std::abs(t.topLeftCorner<3, 3>().determinant() + 1.0));
    const Eigen::Vector3d u = plane.normal.cross(mt::random_unit(rng)).normalized();
    const Eigen::Vector3d on = -plane.offset * plane.normal + rng.uniform(-5, 5) * u;
    fixed = std::max(fixed, ((t * on.homogeneous()).head<3>() - on).norm());
    const Eigen::Vector3d p = mt::random_unit(rng) * rng.uniform(0, 5);
    const Eigen::Matrix3d householder = Eigen::Matrix3d::Identity() - 2 * plane.normal * plane.normal.transpose();
    const Eigen::Vector3d expected = householder * p - 2 * plane.offset * plane.normal;
    oracle = std::max(oracle, ((t * p.homogeneous()).head<3>() - expected).cwiseAbs().maxCoeff());
  }
  o.detail << "max |TT-I| " << involution << ", |det+1| " << det << ", on-plane drift " << fixed
           << ", oracle gap " << oracle;
  o.require(involution <= 1e-12, "involution");
  o.require(det <= 1e-12, "determinant");
  o.require(fixed <= 1e-10, "fixed points");
  o.require(oracle <= 1e-12, "Householder oracle");
}

void criterion2(Outcome& o) {
  Rng rng(2);
  const CameraModel cam = mt::square_camera(64, 60.0);
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto scene = mt::random_scene<float>(rng, 1 + static_cast<int>(rng.index(500)), 1.2);
    const auto pose = trial % 2 ? mt::random_improper_pose(rng, 4.0) : mt::random_pose(rng, 4.0);
    const auto a = render(scene, cam, pose);
    const auto b = oracle_render(scene, cam, pose);
    auto diff = [&](const auto& x, const auto& y) {
      for (std::size_t i = 0; i < x.data.size(); ++i)
        worst = std::max(worst, std::abs(static_cast<double>(x.data[i]) - y.data[i]));
    };
    diff(a.color, b.color);
    diff(a.mask, b.mask);
    diff(a.depth, b.depth);
    diff(a.alpha, b.alpha);
  }
  o.detail << "200 scenes, max per-pixel deviation " << worst;
  o.require(worst < 1e-5, "deviation");
}

void criterion3(Outcome& o) {
  Rng rng(3);
  const CameraModel cam = mt::square_camera(32, 30.0);
  int checked = 0, excluded = 0;
  double worst = 0;
  std::size_t failures = 0;
  for (int trial = 0; trial < 2; ++trial) {
    const auto scene = mt::random_scene<double>(rng, 20, 0.8, 2, 0.08, 0.4);
    const auto pose = trial ? mt::random_improper_pose(rng, 4.0) : mt::random_pose(rng, 4.0);
    mt::WeightedObjective objective(rng, 32, 32);
    const auto r = mt::check_render_gradients(scene, cam, pose, objective, {}, 1e-5, 1e-3, 1e-6);
    checked += r.checked;
    excluded += r.excluded;
    worst = std::max(worst, r.max_rel_error);
    failures += r.failures.size();
  }
  // Plane (n, d) through the plane loss.
  const Plane plane{mt::random_unit(rng), 0.4};
  std::vector<Eigen::Vector3d> pts;
  for (int i = 0; i < 20; ++i) pts.push_back(Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()));
  const auto g = plane_loss(plane, pts);
  const double h = 1e-6;
  double plane_worst = 0;
  for (int k = 0; k < 4; ++k) {
    Plane a = plane, b = plane;
    (k < 3 ? a.normal[k] : a.offset) += h;
    (k < 3 ? b.normal[k] : b.offset) -= h;
    const double fd = (plane_loss(a, pts).value - plane_loss(b, pts).value) / (2 * h);
    const double an = k < 3 ? g.grad_normal[k] : g.grad_offset;
    plane_worst = std::max(plane_worst, mt::relative_error(an, fd, 1e-6));
  }
  o.detail << checked << " Gaussian parameters checked (" << excluded << " at clip boundaries), max rel "
           << worst << "; plane (n,d) max rel " << plane_worst;
  o.require(failures == 0 && worst <= 1e-3, "render gradients");
  o.require(checked > 600, "coverage");
  o.require(plane_worst <= 1e-3, "plane gradients");
}

void criterion4(Outcome& o) {
  double worst_angle = 0, worst_offset = 0;
  bool deterministic = true;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const Plane truth = mt::random_plane(rng);
    const Eigen::Vector3d u = truth.normal.cross(mt::random_unit(rng)).normalized();
    const Eigen::Vector3d v = truth.normal.cross(u);
    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i < 80; ++i)
      pts.push_back(-truth.offset * truth.normal + rng.uniform(-0.5, 0.5) * u + rng.uniform(-0.5, 0.5) * v +
                    rng.normal(0, 1e-3) * truth.normal);
    for (int i = 0; i < 20; ++i)
      pts.push_back(-truth.offset * truth.normal + Eigen::Vector3d(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                                                                   rng.uniform(-0.5, 0.5)));
    Eigen::Vector3d lo = pts[0], hi = pts[0];
    for (const auto& p : pts) lo = lo.cwiseMin(p), hi = hi.cwiseMax(p);
    const double threshold = 0.01 * (hi - lo).norm();
    const auto a = ransac_plane(pts, 512, threshold, seed);
    const auto b = ransac_plane(pts, 512, threshold, seed);
    deterministic = deterministic && a.plane.normal == b.plane.normal && a.plane.offset == b.plane.offset &&
                    a.inlier_indices == b.inlier_indices;
    worst_angle = std::max(worst_angle, angle_deg(a.plane.normal, truth.normal));
    worst_offset = std::max(worst_offset, offset_gap(a.plane, truth));
  }
  o.detail << "20 seeds, max angle " << worst_angle << " deg, max |dd| " << worst_offset;
  o.require(worst_angle < 0.5, "angle");
  o.require(worst_offset < 1e-3, "offset");
  o.require(deterministic, "determinism");
}

void criterion5(Outcome& o) {
  const ToySceneConfig cfg;
  const ToyScene toy = synthesize_toy_scene(7, cfg);
  std::vector<double> errs;
  for (const auto* views : {&toy.dataset.train_views, &toy.dataset.test_views}) {
    for (const auto& view : *views) {
      const auto tile = render_mirror_view(toy.scene, view.camera, view.pose, toy.plane,
                                           std::optional<double>(cfg.clip_margin));
      const auto oracle = reflect_ray_oracle(toy.scene, view.camera, view.pose, toy.plane, view.mask,
                                             std::optional<double>(cfg.clip_margin));
      for (int y = 0; y < view.camera.height; ++y)
        for (int x = 0; x < view.camera.width; ++x)
          if (view.mask.at(x, y) > 0.5f)
            for (int c = 0; c < 3; ++c) errs.push_back(std::abs(tile.color.at(x, y, c) - oracle.at(x, y, c)));
    }
  }
  double mean = 0;
  for (double e : errs) mean += e / static_cast<double>(errs.size());
  std::sort(errs.begin(), errs.end());
  const double p99 = errs[static_cast<std::size_t>(0.99 * (errs.size() - 1))];
  o.detail << errs.size() / 3 << " mirror pixels, mean " << mean * 255 << "/255, p99 " << p99 * 255 << "/255";
  o.require(mean <= 2.0 / 255, "mean");
  o.require(p99 <= 8.0 / 255, "p99");
}

struct Benchmark {
  fs::path data, full, vanilla;
  bool ran = false;
  bool ok = false;
};

void criterion6(Outcome& o, Benchmark& bench) {
  const auto t0 = std::chrono::steady_clock::now();
  bench.ran = true;
  int rc = cli({"synth", "--seed", "7", "--out", bench.data.string()});
  o.require(rc == 0, "synth exit " + std::to_string(rc));
  if (rc != 0) return;
  rc = cli({"train", "--data", bench.data.string(), "--out", bench.full.string(), "--seed", "7"});
  o.require(rc == 0, "train exit " + std::to_string(rc));
  const int rc_v =
      cli({"train", "--data", bench.data.string(), "--out", bench.vanilla.string(), "--seed", "7", "--vanilla"});
  o.require(rc_v == 0, "vanilla train exit " + std::to_string(rc_v));
  if (rc != 0 || rc_v != 0) return;
  const fs::path full_eval = bench.full / "eval.json", van_eval = bench.vanilla / "eval.json";
  cli({"eval", "--checkpoint", (bench.full / "checkpoint").string(), "--data", bench.data.string(), "--out",
       full_eval.string()});
  cli({"eval", "--checkpoint", (bench.vanilla / "checkpoint").string(), "--data", bench.data.string(), "--out",
       van_eval.string()});
  const double minutes =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;

  const Json fe = read_json(full_eval), ve = read_json(van_eval);
  const Plane gt = plane_from_json(read_json(bench.data / "gt_plane.json"));
  const Checkpoint gt_scene = load_checkpoint(bench.data / "gt");
  const Checkpoint trained = load_checkpoint(bench.full / "checkpoint");
  const double diag = bbox_diagonal(gt_scene.scene);
  o.require(trained.plane.has_value(), "plane estimated");
  if (!trained.plane) return;
  const double angle = angle_deg(trained.plane->normal, gt.normal);
  const double dd = offset_gap(*trained.plane, gt);
  const double psnr = fe["full"]["psnr"].get<double>();
  const double mirror_psnr = fe["mirror"]["psnr"].get<double>();
  const double vanilla_mirror_psnr = ve["mirror"]["psnr"].get<double>();
  const double iou = fe["full"]["mask_iou"].get<double>();
  const double depth = fe["full"]["mirror_depth_rel_error"].get<double>();
  o.detail << "(a) angle " << angle << " deg, |dd| " << dd << " (limit " << 0.01 * diag << ")"
           << "; (b) PSNR " << psnr << " dB; (c) mirror PSNR " << mirror_psnr << " vs vanilla "
           << vanilla_mirror_psnr << "; (d) IoU " << iou << "; (e) depth rel err " << depth << "; "
           << minutes << " min on " << thread_count() << " thread(s)";
  o.require(angle <= 1.0, "(a) angle");
  o.require(dd < 0.01 * diag, "(a) offset");
  o.require(psnr >= 30.0, "(b) PSNR");
  o.require(mirror_psnr >= vanilla_mirror_psnr + 2.0, "(c) mirror vs vanilla");
  o.require(iou >= 0.95, "(d) IoU");
  o.require(depth <= 0.05, "(e) depth");
  bench.ok = true;
}

bool same_plane_bits(const Plane& a, const Plane& b) {
  return std::memcmp(a.normal.data(), b.normal.data(), 3 * sizeof(double)) == 0 &&
         std::memcmp(&a.offset, &b.offset, sizeof(double)) == 0;
}

void criterion7(Outcome& o, const Benchmark& bench) {
  ToySceneConfig small;
  small.width = small.height = 32;
  small.focal = 32;
  small.train_views = 8;
  small.test_views = 0;
  const ToyScene toy = synthesize_toy_scene(11, small);
  TrainConfig c;
  c.stage1_steps = 40;
  c.stage2_steps = 20;
  c.plane_warmup_step = 10;
  c.init_points = 600;
  c.tau_m = 1e-3;
  c.tau_alpha = 1e-2;
  const auto init = initial_scene<float>(toy.dataset, c);
  const auto s1 = train_stage1(init, toy.dataset, c);
  const auto full = train(init, toy.dataset, c);
  bool frozen = s1.plane && full.plane && same_plane_bits(*s1.plane, *full.plane);
  if (s1.plane) {
    const Plane before = *s1.plane;
    train_stage2(s1.scene, *s1.plane, toy.dataset, c, s1.clip_margin);
    frozen = frozen && same_plane_bits(before, *s1.plane);
  }

  long red_pixels = 0;
  bool red_ok = true;
  for (const auto& view : toy.dataset.train_views) {
    const auto out = render(init, view.camera, view.pose);
    const auto loss = stage1_loss(out, view, std::nullopt, {}, c);
    for (int y = 0; y < view.camera.height; ++y)
      for (int x = 0; x < view.camera.width; ++x)
        if (view.mask.at(x, y) > 0.5f) {
          ++red_pixels;
          red_ok = red_ok && loss.rgb_target.at(x, y, 0) == 1.0f && loss.rgb_target.at(x, y, 1) == 0.0f &&
                   loss.rgb_target.at(x, y, 2) == 0.0f;
        }
  }

  // Every logged report of the benchmark run, or of a short run when the benchmark was skipped.
  std::vector<LossReport> reports;
  TrainConfig log_config = c;
  if (bench.ok) {
    log_config = config_from_json(read_json(bench.full / "run_manifest.json")["config"]);
    std::ifstream in(bench.full / "loss_log.jsonl");
    for (std::string line; std::getline(in, line);) {
      const Json j = Json::parse(line);
      LossReport r;
      r.stage = j["stage"];
      r.rgb = j["rgb"];
      r.mask = j["mask"];
      r.depth = j["depth"];
      r.plane = j["plane"];
      r.total = j["total"];
      const double rgb = (1 - log_config.gamma) * j["l1"].get<double>() + log_config.gamma * j["dssim"].get<double>();
      red_ok = red_ok && std::abs(rgb - r.rgb) <= 1e-6;
      reports.push_back(r);
    }
  } else {
    train(init, toy.dataset, c, [&](const LossReport& r) { reports.push_back(r); });
  }
  double worst = 0;
  for (const auto& r : reports) worst = std::max(worst, std::abs(r.total - weighted_total(r, log_config)));

  o.detail << "plane bit-frozen " << (frozen ? "yes" : "no") << "; " << red_pixels
           << " masked target pixels exactly red; " << reports.size() << " loss reports, max |total - parts| "
           << worst;
  o.require(frozen, "frozen plane");
  o.require(red_ok && red_pixels > 0, "red fill");
  o.require(!reports.empty() && worst <= 1e-6, "weighted totals");
}

void criterion8(Outcome& o, const fs::path& work) {
  const fs::path data = work / "det_data", a = work / "det_a", b = work / "det_b", c = work / "det_c";
  int rc = cli({"synth", "--seed", "3", "--out", data.string(), "--train-views", "10", "--test-views", "2",
                "--resolution", "48"});
  rc = rc ? rc
          : cli({"train", "--data", data.string(), "--out", a.string(), "--seed", "5", "--set", "stage1_steps=200",
                 "--set", "stage2_steps=200", "--set", "plane_warmup_step=100", "--set", "densify_interval=50",
                 "--set", "init_points=2000"});
  rc = rc ? rc : cli({"train", "--manifest", (a / "run_manifest.json").string(), "--out", b.string()});
  rc = rc ? rc : cli({"train", "--manifest", (a / "run_manifest.json").string(), "--out", c.string()});
  o.require(rc == 0, "runs exit " + std::to_string(rc));
  if (rc != 0) return;
  bool same = true;
  for (const char* f : {"loss_log.jsonl", "checkpoint/primitives.bin", "checkpoint/checkpoint.json", "plane.json"}) {
    const std::string ref = slurp(a / f);
    const bool eq = !ref.empty() && ref == slurp(b / f) && ref == slurp(c / f);
    if (!eq) o.detail << " " << f << " differs;";
    same = same && eq;
  }
  std::ifstream log(a / "loss_log.jsonl");
  const auto lines = std::count(std::istreambuf_iterator<char>(log), {}, '\n');
  o.detail << "3 runs from one manifest, " << lines << " loss lines, logs and checkpoints "
           << (same ? "bit-identical" : "differ");
  o.require(same, "bit-identical outputs");
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "mirror_splat_acceptance";
  std::set<int> only;
  for (int i = 2; i < argc; ++i) only.insert(std::atoi(argv[i]));
  fs::remove_all(work);
  fs::create_directories(work);

  Benchmark bench{work / "toy", work / "full", work / "vanilla"};
  const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria = {
      {"mirror transform algebra", criterion1},
      {"rasterizer matches oracle", criterion2},
      {"analytic gradients match finite differences", criterion3},
      {"plane recovery", criterion4},
      {"mirrored viewpoint equals reflected rays", criterion5},
      {"two-stage toy benchmark", [&](Outcome& o) { criterion6(o, bench); }},
      {"stage protocol invariants", [&](Outcome& o) { criterion7(o, bench); }},
      {"determinism from a run manifest", [&](Outcome& o) { criterion8(o, work); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << " " << criteria[i].first << ": "
              << o.detail.str() << " (" << secs << " s)" << std::endl;
    failed += !o.pass;
  }
  std::cout << (failed ? "acceptance: " + std::to_string(failed) + " criterion(s) failed" : "acceptance: all passed")
            << std::endl;
  return failed ? 1 : 0;
}

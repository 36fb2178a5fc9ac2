#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "mirror_splat/checkpoint.hpp"
#include "mirror_splat/dataset.hpp"
#include "mirror_splat/io.hpp"
#include "test_util.hpp"

using namespace mirror_splat;
namespace fs = std::filesystem;
namespace mt = mirror_splat::testing;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mirror_splat_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

bool same_bits(float a, float b) { return std::memcmp(&a, &b, sizeof a) == 0; }

MirrorDataset tiny_dataset() {
  Rng rng(4);
  MirrorDataset ds;
  for (int k = 0; k < 3; ++k) {
    ViewRecord v;
    v.name = (k < 2 ? "train_" : "test_") + std::to_string(k);
    v.camera = mt::square_camera(16, 16.0);
    v.pose = mt::random_pose(rng, 3.0);
    v.image = Image<float>(16, 16, 3);
    v.mask = Image<float>(16, 16, 1);
    Image<float> depth(16, 16, 1);
    for (auto& x : v.image.data) x = static_cast<float>(rng.uniform());
    for (auto& x : v.mask.data) x = rng.uniform() > 0.5 ? 1.0f : 0.0f;
    for (auto& x : depth.data)
      x = rng.uniform() > 0.2 ? static_cast<float>(rng.uniform(1, 5)) : std::numeric_limits<float>::infinity();
    v.depth = depth;
    (k < 2 ? ds.train_views : ds.test_views).push_back(v);
  }
  ds.gt_plane = Plane{Eigen::Vector3d(0, 0.6, 0.8), -0.25};
  return ds;
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(1);
  const auto scene = mt::random_scene<float>(rng, 100, 2.0, 2);
  const fs::path dir = fresh_dir("ckpt");
  MirrorEstimate est{normalize_plane(Plane{{0.1, 0.2, 1.0}, 0.3}), {1, 5, 9}, 1e-3, 0.03};
  save_checkpoint(dir, scene, est.plane, est, false, 0.02);
  const Checkpoint ck = load_checkpoint(dir);
  ASSERT_EQ(ck.scene.size(), scene.size());
  EXPECT_EQ(ck.scene.sh_degree, 2);
  for (std::size_t i = 0; i < scene.size(); ++i) {
    GaussianPrimitive<float> a = scene.primitives[i], b = ck.scene.primitives[i];
    for_each_param_block(
        2,
        [&](ParamGroup, int n, float* x, float* y) {
          for (int k = 0; k < n; ++k) EXPECT_TRUE(same_bits(x[k], y[k]));
        },
        a, b);
  }
  ASSERT_TRUE(ck.plane);
  EXPECT_EQ(ck.plane->normal, est.plane.normal);
  EXPECT_EQ(ck.plane->offset, est.plane.offset);
  ASSERT_TRUE(ck.estimate);
  EXPECT_EQ(ck.estimate->inlier_indices, est.inlier_indices);
  EXPECT_EQ(ck.estimate->support, est.support);
  EXPECT_EQ(ck.clip_margin, 0.02);
  EXPECT_FALSE(ck.vanilla);
}

TEST(Checkpoint, WithoutPlane) {
  Rng rng(2);
  const auto scene = mt::random_scene<float>(rng, 5, 1.0, 0);
  const fs::path dir = fresh_dir("ckpt_noplane");
  save_checkpoint(dir, scene, std::nullopt, std::nullopt, true);
  const Checkpoint ck = load_checkpoint(dir);
  EXPECT_FALSE(ck.plane);
  EXPECT_FALSE(ck.estimate);
  EXPECT_TRUE(ck.vanilla);
  EXPECT_EQ(ck.scene.sh_degree, 0);
}

TEST(Checkpoint, ErrorsAreLoadErrors) {
  EXPECT_THROW(load_checkpoint(fresh_dir("ckpt_missing")), LoadError);

  Rng rng(3);
  const fs::path dir = fresh_dir("ckpt_bad");
  save_checkpoint(dir, mt::random_scene<float>(rng, 4, 1.0), std::nullopt);
  fs::resize_file(dir / "primitives.bin", 10);
  EXPECT_THROW(load_checkpoint(dir), LoadError);

  save_checkpoint(dir, mt::random_scene<float>(rng, 4, 1.0), std::nullopt);
  Json meta = read_json(dir / "checkpoint.json");
  meta["version"] = 99;
  write_json(dir / "checkpoint.json", meta);
  EXPECT_THROW(load_checkpoint(dir), VersionError);
}

TEST(Dataset, RoundTrip) {
  const MirrorDataset ds = tiny_dataset();
  const fs::path dir = fresh_dir("dataset");
  save_dataset(ds, dir);
  const MirrorDataset back = load_dataset(dir);
  ASSERT_EQ(back.train_views.size(), 2u);
  ASSERT_EQ(back.test_views.size(), 1u);
  ASSERT_TRUE(back.gt_plane);
  EXPECT_NEAR((back.gt_plane->normal - ds.gt_plane->normal).norm(), 0.0, 1e-15);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& a = ds.train_views[k];
    const auto& b = back.train_views[k];
    EXPECT_EQ(a.name, b.name);
    EXPECT_EQ(a.pose.world_to_camera, b.pose.world_to_camera);
    EXPECT_EQ(a.camera.fx, b.camera.fx);
    // 8-bit sRGB quantization: the round trip is exact up to half a code step.
    for (std::size_t i = 0; i < a.image.size(); ++i)
      EXPECT_NEAR(linear_to_srgb(a.image.data[i]), linear_to_srgb(b.image.data[i]), 0.5 / 255 + 1e-6);
    EXPECT_EQ(a.mask.data, b.mask.data);
    for (std::size_t i = 0; i < a.depth->size(); ++i)
      EXPECT_TRUE(same_bits(a.depth->data[i], b.depth->data[i]));
  }
}

TEST(Dataset, MissingMaskNamesTheView) {
  const fs::path dir = fresh_dir("dataset_nomask");
  save_dataset(tiny_dataset(), dir);
  fs::remove(dir / "masks" / "train_1.png");
  try {
    load_dataset(dir);
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("train_1"), std::string::npos);
  }
}

TEST(Dataset, UnsupportedVersion) {
  const fs::path dir = fresh_dir("dataset_version");
  save_dataset(tiny_dataset(), dir);
  Json m = read_json(dir / "manifest.json");
  m["version"] = 7;
  write_json(dir / "manifest.json", m);
  EXPECT_THROW(load_dataset(dir), VersionError);
}

TEST(Dataset, MissingManifestAndDimensionMismatch) {
  EXPECT_THROW(load_dataset(fresh_dir("dataset_empty")), LoadError);
  const fs::path dir = fresh_dir("dataset_dims");
  save_dataset(tiny_dataset(), dir);
  Json m = read_json(dir / "manifest.json");
  m["views"][0]["camera"]["width"] = 20;
  write_json(dir / "manifest.json", m);
  EXPECT_THROW(load_dataset(dir), LoadError);
}

TEST(Io, PfmRoundTripKeepsRowOrder) {
  Image<float> img(3, 2, 3);
  for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = static_cast<float>(i) * 0.25f;
  const fs::path p = fresh_dir("pfm") / "a.pfm";
  write_pfm(p, img);
  EXPECT_EQ(read_pfm(p).data, img.data);
  std::ifstream in(p, std::ios::binary);
  std::string magic, w, h, scale;
  in >> magic >> w >> h >> scale;
  EXPECT_EQ(magic, "PF");
  EXPECT_EQ(scale, "-1.0");
}

TEST(Io, PngEncodesSrgb) {
  Image<float> img(1, 1, 3);
  img.data = {0.0f, 0.21586f, 1.0f};
  const fs::path p = fresh_dir("png") / "a.png";
  write_png(p, img, true);
  const auto raw = read_png(p, 3, false);
  EXPECT_EQ(raw.data[0], 0.0f);
  EXPECT_NEAR(raw.data[1], 128 / 255.0, 1e-6);
  EXPECT_EQ(raw.data[2], 1.0f);
}

TEST(Io, PlaneJsonIsNormalizedOnWrite) {
  const Json j = plane_to_json(Plane{{0, 0, 2}, -4});
  EXPECT_EQ(j["normal"][2].get<double>(), 1.0);
  EXPECT_EQ(j["offset"].get<double>(), -2.0);
  const Plane p = plane_from_json(j);
  EXPECT_EQ(p.offset, -2.0);
  EXPECT_THROW(plane_from_json(Json{{"normal", {1, 0}}, {"offset", 0}}), LoadError);
}

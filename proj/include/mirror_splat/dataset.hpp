#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mirror_splat/geometry.hpp"
#include "mirror_splat/image.hpp"
#include "mirror_splat/io.hpp"

namespace mirror_splat {

inline constexpr int kDatasetVersion = 1;

struct ViewRecord {
  std::string name;
  CameraModel camera;
  PoseTransform pose;
  Image<float> image;  // H x W x 3, linear
  Image<float> mask;   // H x W, 1 = mirror
  // H x W camera-space z depth; +inf where there is no surface.
  std::optional<Image<float>> depth;
};

struct MirrorDataset {
  std::vector<ViewRecord> train_views;
  std::vector<ViewRecord> test_views;
  std::optional<Plane> gt_plane;
};

namespace dataset_detail {

inline void check_view(const ViewRecord& v) {
  const int w = v.camera.width, h = v.camera.height;
  auto check = [&](const Image<float>& img, int channels, const char* what) {
    if (img.width != w || img.height != h || img.channels != channels)
      throw LoadError("view '" + v.name + "': " + what + " is " + std::to_string(img.width) + "x" +
                      std::to_string(img.height) + "x" + std::to_string(img.channels) +
                      ", expected " + std::to_string(w) + "x" + std::to_string(h) + "x" +
                      std::to_string(channels));
  };
  check(v.image, 3, "image");
  check(v.mask, 1, "mask");
  if (v.depth) check(*v.depth, 1, "depth");
}

}  // namespace dataset_detail

inline void validate_dataset(const MirrorDataset& ds) {
  if (ds.train_views.empty()) throw LoadError("dataset has no training views");
  const int w = ds.train_views.front().camera.width, h = ds.train_views.front().camera.height;
  for (const auto* list : {&ds.train_views, &ds.test_views}) {
    for (const auto& v : *list) {
      dataset_detail::check_view(v);
      if (v.camera.width != w || v.camera.height != h)
        throw LoadError("view '" + v.name + "' has different image dimensions");
    }
  }
}

// Layout: manifest.json, images/<name>.png, masks/<name>.png, depth/<name>.pfm,
// optional gt_plane.json.
inline void save_dataset(const MirrorDataset& ds, const std::filesystem::path& dir) {
  validate_dataset(ds);
  namespace fs = std::filesystem;
  std::error_code ec;
  for (const char* sub : {"images", "masks", "depth"}) {
    fs::create_directories(dir / sub, ec);
    if (ec) throw IoError("cannot create " + (dir / sub).string() + ": " + ec.message());
  }
  Json views = Json::array();
  auto add = [&](const ViewRecord& v, const char* split) {
    Json entry{{"name", v.name},
               {"split", split},
               {"camera", camera_to_json(v.camera)},
               {"pose", matrix_to_json(v.pose.world_to_camera)},
               {"image", "images/" + v.name + ".png"},
               {"mask", "masks/" + v.name + ".png"}};
    write_png(dir / "images" / (v.name + ".png"), v.image, true);
    write_png(dir / "masks" / (v.name + ".png"), v.mask, false);
    if (v.depth) {
      entry["depth"] = "depth/" + v.name + ".pfm";
      write_pfm(dir / "depth" / (v.name + ".pfm"), *v.depth);
    }
    views.push_back(entry);
  };
  for (const auto& v : ds.train_views) add(v, "train");
  for (const auto& v : ds.test_views) add(v, "test");
  write_json(dir / "manifest.json", Json{{"version", kDatasetVersion}, {"views", views}});
  if (ds.gt_plane) write_json(dir / "gt_plane.json", plane_to_json(*ds.gt_plane));
}

inline MirrorDataset load_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw LoadError("missing manifest: " + manifest_path.string());
  const Json manifest = read_json(manifest_path);
  MirrorDataset ds;
  try {
    const int version = manifest.at("version").get<int>();
    if (version != kDatasetVersion)
      throw VersionError("unsupported dataset version " + std::to_string(version) + " (expected " +
                         std::to_string(kDatasetVersion) + ")");
    for (const auto& entry : manifest.at("views")) {
      ViewRecord v;
      v.name = entry.at("name").get<std::string>();
      v.camera = camera_from_json(entry.at("camera"));
      v.pose = PoseTransform{matrix_from_json(entry.at("pose"))};
      if (!v.pose.valid(1e-6)) throw LoadError("view '" + v.name + "': invalid pose");
      auto file = [&](const char* key) {
        if (!entry.contains(key)) throw LoadError("view '" + v.name + "': no " + key + " entry");
        const fs::path p = dir / entry.at(key).get<std::string>();
        if (!fs::exists(p)) throw LoadError("view '" + v.name + "': missing " + key + " file " + p.string());
        return p;
      };
      v.image = read_png(file("image"), 3, true);
      v.mask = read_png(file("mask"), 1, false);
      if (entry.contains("depth")) v.depth = read_pfm(file("depth"));
      dataset_detail::check_view(v);
      const std::string split = entry.value("split", "train");
      if (split == "train") {
        ds.train_views.push_back(std::move(v));
      } else if (split == "test") {
        ds.test_views.push_back(std::move(v));
      } else {
        throw LoadError("view '" + v.name + "': unknown split '" + split + "'");
      }
    }
  } catch (const Json::exception& e) {
    throw LoadError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  if (fs::exists(dir / "gt_plane.json")) ds.gt_plane = plane_from_json(read_json(dir / "gt_plane.json"));
  validate_dataset(ds);
  return ds;
}

}  // namespace mirror_splat

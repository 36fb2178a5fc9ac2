#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "mirror_splat/io.hpp"
#include "mirror_splat/plane_fit.hpp"
#include "mirror_splat/scene.hpp"

namespace mirror_splat {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  GaussianScene<float> scene;
  std::optional<Plane> plane;
  std::optional<MirrorEstimate> estimate;
  bool vanilla = false;  // trained without mirror handling
  // Gaussians closer to the mirror than this are left out of the reflected view.
  double clip_margin = 1e-3;
};

// Floats per primitive record: position, rotation, log_scale, opacity, sh, mirror.
inline constexpr int record_floats(int sh_degree) { return param_count(sh_degree); }

namespace checkpoint_detail {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline Json estimate_to_json(const MirrorEstimate& e) {
  return Json{{"plane", plane_to_json(e.plane)},
              {"inlier_indices", e.inlier_indices},
              {"inlier_rms", e.inlier_rms},
              {"support", e.support}};
}

inline MirrorEstimate estimate_from_json(const Json& j) {
  MirrorEstimate e;
  e.plane = plane_from_json(j.at("plane"));
  e.inlier_indices = j.at("inlier_indices").get<std::vector<std::uint32_t>>();
  e.inlier_rms = j.at("inlier_rms").get<double>();
  e.support = j.at("support").get<double>();
  return e;
}

}  // namespace checkpoint_detail

// Writes checkpoint.json and primitives.bin (little-endian float32 records).
template <typename T>
void save_checkpoint(const std::filesystem::path& dir, const GaussianScene<T>& scene,
                     const std::optional<Plane>& plane,
                     const std::optional<MirrorEstimate>& estimate = std::nullopt,
                     bool vanilla = false, double clip_margin = 1e-3) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const int per = record_floats(scene.sh_degree);
  std::vector<float> buf;
  buf.reserve(scene.size() * per);
  for (auto prim : scene.primitives) {
    for_each_param_block(
        scene.sh_degree,
        [&](ParamGroup, int n, T* p) {
          for (int k = 0; k < n; ++k) buf.push_back(static_cast<float>(p[k]));
        },
        prim);
  }
  const std::filesystem::path bin = dir / "primitives.bin";
  const std::filesystem::path tmp = bin.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, bin, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());

  Json meta{{"version", kCheckpointVersion},
            {"sh_degree", scene.sh_degree},
            {"count", scene.size()},
            {"vanilla", vanilla},
            {"clip_margin", clip_margin},
            {"plane", plane ? plane_to_json(*plane) : Json(nullptr)},
            {"mirror_estimate",
             estimate ? checkpoint_detail::estimate_to_json(*estimate) : Json(nullptr)}};
  write_json(dir / "checkpoint.json", meta);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const std::filesystem::path meta_path = dir / "checkpoint.json";
  if (!std::filesystem::exists(meta_path)) throw LoadError("missing " + meta_path.string());
  const Json meta = read_json(meta_path);
  Checkpoint ck;
  std::size_t count = 0;
  try {
    const int version = meta.at("version").get<int>();
    if (version != kCheckpointVersion)
      throw VersionError("unsupported checkpoint version " + std::to_string(version));
    ck.scene.sh_degree = meta.at("sh_degree").get<int>();
    if (ck.scene.sh_degree < 0 || ck.scene.sh_degree > kMaxShDegree)
      throw LoadError("checkpoint sh_degree out of range");
    count = meta.at("count").get<std::size_t>();
    ck.vanilla = meta.value("vanilla", false);
    ck.clip_margin = meta.value("clip_margin", 1e-3);
    if (!meta.at("plane").is_null()) ck.plane = plane_from_json(meta.at("plane"));
    if (meta.contains("mirror_estimate") && !meta.at("mirror_estimate").is_null())
      ck.estimate = checkpoint_detail::estimate_from_json(meta.at("mirror_estimate"));
  } catch (const Json::exception& e) {
    throw LoadError("malformed " + meta_path.string() + ": " + e.what());
  }
  const int per = record_floats(ck.scene.sh_degree);
  const std::filesystem::path bin = dir / "primitives.bin";
  std::ifstream in(bin, std::ios::binary | std::ios::ate);
  if (!in) throw LoadError("missing " + bin.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != count * per * sizeof(float))
    throw LoadError(bin.string() + " holds " + std::to_string(bytes) + " bytes, expected " +
                    std::to_string(count * per * sizeof(float)));
  in.seekg(0);
  std::vector<float> buf(count * per);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw LoadError("failed reading " + bin.string());
  ck.scene.primitives.assign(count, GaussianPrimitive<float>{});
  std::size_t at = 0;
  for (auto& prim : ck.scene.primitives) {
    for_each_param_block(
        ck.scene.sh_degree,
        [&](ParamGroup, int n, float* p) {
          for (int k = 0; k < n; ++k) p[k] = buf[at++];
        },
        prim);
  }
  return ck;
}

}  // namespace mirror_splat

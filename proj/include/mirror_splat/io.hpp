#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mirror_splat/error.hpp"
#include "mirror_splat/geometry.hpp"
#include "mirror_splat/image.hpp"

namespace mirror_splat {

using Json = nlohmann::json;

inline double srgb_to_linear(double v) {
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

inline double linear_to_srgb(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// 8-bit PNG with 1 or 3 channels. With `srgb` the values are treated as
// linear and encoded with the sRGB transfer curve.
template <typename T>
void write_png(const std::filesystem::path& path, const Image<T>& image, bool srgb) {
  if (image.channels != 1 && image.channels != 3)
    throw IoError("write_png: unsupported channel count " + std::to_string(image.channels));
  std::vector<std::uint8_t> bytes(image.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const double v = static_cast<double>(image.data[i]);
    bytes[i] = to_byte(srgb ? linear_to_srgb(v) : v);
  }
  png_image desc;
  std::memset(&desc, 0, sizeof desc);
  desc.version = PNG_IMAGE_VERSION;
  desc.width = static_cast<png_uint_32>(image.width);
  desc.height = static_cast<png_uint_32>(image.height);
  desc.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&desc, path.string().c_str(), 0, bytes.data(), 0, nullptr)) {
    const std::string msg = desc.message;
    png_image_free(&desc);
    throw IoError("cannot write " + path.string() + ": " + msg);
  }
}

// Reads an 8-bit PNG as `channels` channels in [0, 1], decoding sRGB when asked.
inline Image<float> read_png(const std::filesystem::path& path, int channels, bool srgb) {
  png_image desc;
  std::memset(&desc, 0, sizeof desc);
  desc.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&desc, path.string().c_str()))
    throw LoadError("cannot read PNG " + path.string() + ": " + desc.message);
  desc.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(desc));
  if (!png_image_finish_read(&desc, nullptr, bytes.data(), 0, nullptr)) {
    const std::string msg = desc.message;
    png_image_free(&desc);
    throw LoadError("cannot decode PNG " + path.string() + ": " + msg);
  }
  Image<float> out(static_cast<int>(desc.width), static_cast<int>(desc.height), channels);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const double v = bytes[i] / 255.0;
    out.data[i] = static_cast<float>(srgb ? srgb_to_linear(v) : v);
  }
  return out;
}

// Little-endian PFM ("Pf" grayscale or "PF" color), rows stored bottom to top.
template <typename T>
void write_pfm(const std::filesystem::path& path, const Image<T>& image) {
  if (image.channels != 1 && image.channels != 3)
    throw IoError("write_pfm: unsupported channel count " + std::to_string(image.channels));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << (image.channels == 3 ? "PF" : "Pf") << "\n"
      << image.width << " " << image.height << "\n-1.0\n";
  const std::size_t row = static_cast<std::size_t>(image.width) * image.channels;
  std::vector<float> buf(row);
  for (int y = image.height - 1; y >= 0; --y) {
    for (std::size_t i = 0; i < row; ++i)
      buf[i] = static_cast<float>(image.data[static_cast<std::size_t>(y) * row + i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(row * sizeof(float)));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

inline Image<float> read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot read PFM " + path.string());
  std::string magic;
  int width = 0, height = 0;
  double scale = 0;
  in >> magic >> width >> height >> scale;
  in.get();
  if ((magic != "Pf" && magic != "PF") || width <= 0 || height <= 0)
    throw LoadError("malformed PFM header in " + path.string());
  if (scale >= 0) throw LoadError("big-endian PFM is not supported: " + path.string());
  const int channels = magic == "PF" ? 3 : 1;
  Image<float> out(width, height, channels);
  const std::size_t row = static_cast<std::size_t>(width) * channels;
  for (int y = height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(out.data.data() + static_cast<std::size_t>(y) * row),
            static_cast<std::streamsize>(row * sizeof(float)));
  }
  if (!in) throw LoadError("truncated PFM " + path.string());
  return out;
}

// Normalizes unless the normal is already unit length to 1e-12, so stored
// planes round-trip bit-exactly.
inline Plane canonical_plane(const Plane& plane) {
  return is_normalized(plane, 1e-12) ? plane : normalize_plane(plane);
}

inline Json plane_to_json(const Plane& plane) {
  const Plane p = canonical_plane(plane);
  return Json{{"normal", {p.normal.x(), p.normal.y(), p.normal.z()}}, {"offset", p.offset}};
}

inline Plane plane_from_json(const Json& j) {
  try {
    const auto& n = j.at("normal");
    if (!n.is_array() || n.size() != 3) throw LoadError("plane normal must have 3 entries");
    return canonical_plane(Plane{{n[0].get<double>(), n[1].get<double>(), n[2].get<double>()},
                                 j.at("offset").get<double>()});
  } catch (const Json::exception& e) {
    throw LoadError(std::string("malformed plane JSON: ") + e.what());
  }
}

inline Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw LoadError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

// Writes through a temporary file and renames, so readers never see a partial file.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  write_text_atomic(path, j.dump(2) + "\n");
}

inline Json matrix_to_json(const Eigen::Matrix4d& m) {
  Json rows = Json::array();
  for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
  return rows;
}

inline Eigen::Matrix4d matrix_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 4) throw LoadError("pose must be a 4x4 array");
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r) {
    if (!j[r].is_array() || j[r].size() != 4) throw LoadError("pose must be a 4x4 array");
    for (int c = 0; c < 4; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

inline Json camera_to_json(const CameraModel& c) {
  return Json{{"fx", c.fx},       {"fy", c.fy},         {"cx", c.cx},      {"cy", c.cy},
              {"width", c.width}, {"height", c.height}, {"znear", c.znear}};
}

inline CameraModel camera_from_json(const Json& j) {
  CameraModel c;
  c.fx = j.at("fx").get<double>();
  c.fy = j.at("fy").get<double>();
  c.cx = j.at("cx").get<double>();
  c.cy = j.at("cy").get<double>();
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  c.znear = j.value("znear", 0.01);
  if (!c.valid()) throw LoadError("invalid camera intrinsics");
  return c;
}

}  // namespace mirror_splat

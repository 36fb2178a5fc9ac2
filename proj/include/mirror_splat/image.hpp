#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mirror_splat/error.hpp"

namespace mirror_splat {

// Row-major, channel-interleaved image buffer.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, int c, T fill = T(0))
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool empty() const { return data.empty(); }

  T& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  const T& at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool same_shape(const Image& other) const {
    return width == other.width && height == other.height && channels == other.channels;
  }

  template <typename U>
  Image<U> cast() const {
    Image<U> out(width, height, channels);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

template <typename A, typename B>
void require_same_shape(const Image<A>& a, const Image<B>& b, const char* what) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
    throw ShapeMismatch(std::string(what) + ": image shapes differ (" + std::to_string(a.width) +
                        "x" + std::to_string(a.height) + "x" + std::to_string(a.channels) +
                        " vs " + std::to_string(b.width) + "x" + std::to_string(b.height) + "x" +
                        std::to_string(b.channels) + ")");
  }
}

}  // namespace mirror_splat

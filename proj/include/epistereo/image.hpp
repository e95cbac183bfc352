#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "epistereo/error.hpp"

namespace epistereo {

/// Dense row-major 2D raster. Pixel (x, y) has its center at integer
/// coordinates, x to the right and y down.
template <typename T>
class Image {
 public:
  using value_type = T;

  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& operator()(int x, int y) {
    assert(contains(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  const T& operator()(int x, int y) const {
    assert(contains(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }

  T* row(int y) { return data_.data() + static_cast<std::size_t>(y) * width_; }
  const T* row(int y) const { return data_.data() + static_cast<std::size_t>(y) * width_; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  template <typename U>
  bool same_shape(const Image<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using GrayImage = Image<float>;
using Mask = Image<std::uint8_t>;

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};
using ColorImage = Image<Rgb>;

/// Runs body(i) for i in [begin, end). Iterations must write disjoint data.
template <typename F>
void parallel_for(int begin, int end, F&& body) {
#if defined(_OPENMP)
#pragma omp parallel for schedule(static)
  for (int i = begin; i < end; ++i) body(i);
#else
  for (int i = begin; i < end; ++i) body(i);
#endif
}

inline float luma(const Rgb& c) {
  return 0.299f * c.r + 0.587f * c.g + 0.114f * c.b;
}

inline GrayImage to_gray(const ColorImage& color) {
  GrayImage gray(color.width(), color.height());
  for (std::size_t i = 0; i < color.size(); ++i) gray.data()[i] = luma(color.data()[i]);
  return gray;
}

inline Mask full_mask(int width, int height) { return Mask(width, height, 1); }

/// Bilinear sample at continuous (x, y). Returns nothing when any of the
/// contributing source pixels is outside the image or masked out.
template <typename T>
std::optional<double> sample_bilinear(const Image<T>& img, const Mask* mask, double x, double y) {
  if (!(x >= 0.0 && y >= 0.0)) return std::nullopt;  // also rejects NaN
  const int w = img.width();
  const int h = img.height();
  if (x > w - 1 || y > h - 1) return std::nullopt;
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const double fx = x - x0;
  const double fy = y - y0;
  const int x1 = fx > 0.0 ? x0 + 1 : x0;
  const int y1 = fy > 0.0 ? y0 + 1 : y0;
  if (mask) {
    const Mask& m = *mask;
    if (!m(x0, y0) || !m(x1, y0) || !m(x0, y1) || !m(x1, y1)) return std::nullopt;
  }
  const double top = (1.0 - fx) * img(x0, y0) + fx * img(x1, y0);
  const double bottom = (1.0 - fx) * img(x0, y1) + fx * img(x1, y1);
  return (1.0 - fy) * top + fy * bottom;
}

/// Nearest-neighbour lookup; nothing when outside the image.
template <typename T>
std::optional<T> sample_nearest(const Image<T>& img, double x, double y) {
  const long xi = std::lround(x);
  const long yi = std::lround(y);
  if (xi < 0 || yi < 0 || xi >= img.width() || yi >= img.height()) return std::nullopt;
  return img(static_cast<int>(xi), static_cast<int>(yi));
}

/// Gray image plus its validity mask. Masked pixels carry value 0.
struct MaskedImage {
  GrayImage pixels;
  Mask mask;
};

}  // namespace epistereo

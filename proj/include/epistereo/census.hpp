#pragma once

#include <bit>
#include <cstdint>
#include <vector>

#include "epistereo/error.hpp"
#include "epistereo/image.hpp"

namespace epistereo {

/// Census descriptors, one 64-bit word per pixel. Bit i is set when the i-th
/// window neighbour (row-major, center skipped) is strictly darker than the
/// center. Pixels closer than half a window to the border, or whose window
/// touches a masked pixel, are flagged invalid and carry descriptor 0.
class CensusImage {
 public:
  CensusImage() = default;
  CensusImage(int width, int height, int window_w, int window_h)
      : width_(width), height_(height), window_w_(window_w), window_h_(window_h),
        bits_(static_cast<std::size_t>(width) * height, 0),
        valid_(static_cast<std::size_t>(width) * height, 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  int window_w() const { return window_w_; }
  int window_h() const { return window_h_; }
  int bit_count() const { return window_w_ * window_h_ - 1; }

  std::uint64_t descriptor(int x, int y) const { return bits_[index(x, y)]; }
  bool valid(int x, int y) const { return valid_[index(x, y)] != 0; }

  std::uint64_t* row(int y) { return bits_.data() + static_cast<std::size_t>(y) * width_; }
  std::uint8_t* valid_row(int y) { return valid_.data() + static_cast<std::size_t>(y) * width_; }
  const std::uint64_t* row(int y) const { return bits_.data() + static_cast<std::size_t>(y) * width_; }
  const std::uint8_t* valid_row(int y) const {
    return valid_.data() + static_cast<std::size_t>(y) * width_;
  }

 private:
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

  int width_ = 0;
  int height_ = 0;
  int window_w_ = 0;
  int window_h_ = 0;
  std::vector<std::uint64_t> bits_;
  std::vector<std::uint8_t> valid_;
};

inline CensusImage census_transform(const GrayImage& image, int window_w, int window_h,
                                    const Mask* mask = nullptr) {
  if (window_w % 2 == 0 || window_h % 2 == 0 || window_w < 1 || window_h < 1)
    throw Error(ErrorCode::kInvalidArgument, "census window dimensions must be odd");
  if (window_w * window_h - 1 > 64)
    throw Error(ErrorCode::kWindowTooLarge, "census window exceeds 64 descriptor bits");
  if (window_w > image.width() || window_h > image.height())
    throw Error(ErrorCode::kWindowTooLarge, "census window larger than the image");
  if (mask && !mask->same_shape(image))
    throw Error(ErrorCode::kInvalidArgument, "mask shape differs from image");

  const int rx = window_w / 2;
  const int ry = window_h / 2;
  CensusImage out(image.width(), image.height(), window_w, window_h);
  parallel_for(ry, image.height() - ry, [&](int y) {
    std::uint64_t* bits = out.row(y);
    std::uint8_t* valid = out.valid_row(y);
    for (int x = rx; x < image.width() - rx; ++x) {
      const float center = image(x, y);
      std::uint64_t desc = 0;
      int bit = 0;
      bool ok = true;
      for (int dy = -ry; dy <= ry; ++dy) {
        const float* src = image.row(y + dy);
        const std::uint8_t* m = mask ? mask->row(y + dy) : nullptr;
        for (int dx = -rx; dx <= rx; ++dx) {
          if (m && !m[x + dx]) ok = false;
          if (dx == 0 && dy == 0) continue;
          if (src[x + dx] < center) desc |= std::uint64_t{1} << bit;
          ++bit;
        }
      }
      if (!ok) continue;
      bits[x] = desc;
      valid[x] = 1;
    }
  });
  return out;
}

inline int hamming(std::uint64_t a, std::uint64_t b) { return std::popcount(a ^ b); }

}  // namespace epistereo

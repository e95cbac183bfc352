#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "epistereo/census.hpp"
#include "epistereo/error.hpp"
#include "epistereo/image.hpp"

namespace epistereo {

/// Inclusive disparity interval. Empty when min > max.
struct DisparityRange {
  int min = 0;
  int max = -1;

  bool empty() const { return min > max; }
  int count() const { return empty() ? 0 : max - min + 1; }
  bool contains(int d) const { return d >= min && d <= max; }
  friend bool operator==(const DisparityRange&, const DisparityRange&) = default;
};

using Cost = std::uint16_t;

/// Per-pixel, per-disparity costs. Every pixel owns its own contiguous
/// disparity interval so coarse-to-fine search can narrow it per pixel; a
/// pixel with an empty interval stores nothing and interrupts SGM paths.
class CostVolume {
 public:
  CostVolume() = default;

  CostVolume(const Image<DisparityRange>& ranges, Cost saturation)
      : width_(ranges.width()), height_(ranges.height()), saturation_(saturation),
        ranges_(ranges), offsets_(ranges.size() + 1, 0) {
    for (std::size_t i = 0; i < ranges.size(); ++i)
      offsets_[i + 1] = offsets_[i] + static_cast<std::size_t>(ranges.data()[i].count());
    costs_.assign(offsets_.back(), saturation);
  }

  /// Same interval at every pixel.
  CostVolume(int width, int height, DisparityRange range, Cost saturation)
      : CostVolume(Image<DisparityRange>(width, height, range), saturation) {}

  int width() const { return width_; }
  int height() const { return height_; }
  Cost saturation() const { return saturation_; }
  const Image<DisparityRange>& ranges() const { return ranges_; }
  DisparityRange range(int x, int y) const { return ranges_(x, y); }
  std::size_t total() const { return costs_.size(); }

  /// Costs of pixel (x, y), indexed by d - range(x, y).min.
  Cost* costs(int x, int y) { return costs_.data() + offsets_[index(x, y)]; }
  const Cost* costs(int x, int y) const { return costs_.data() + offsets_[index(x, y)]; }

  Cost at(int x, int y, int d) const { return costs(x, y)[d - ranges_(x, y).min]; }
  Cost& at(int x, int y, int d) { return costs(x, y)[d - ranges_(x, y).min]; }

  /// Widest interval over all pixels.
  int max_count() const {
    int n = 0;
    for (const auto& r : ranges_.data()) n = std::max(n, r.count());
    return n;
  }

  friend bool operator==(const CostVolume&, const CostVolume&) = default;

 private:
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

  int width_ = 0;
  int height_ = 0;
  Cost saturation_ = 0;
  Image<DisparityRange> ranges_;
  std::vector<std::size_t> offsets_;
  std::vector<Cost> costs_;
};

/// C(p, d) = Hamming(left(x, y), right(x - d, y)). Samples where either
/// descriptor is invalid or x - d leaves the image get the saturation cost,
/// which equals the descriptor bit count.
inline CostVolume compute_cost_volume(const CensusImage& left, const CensusImage& right,
                                      const Image<DisparityRange>& ranges) {
  if (left.width() != right.width() || left.height() != right.height() ||
      ranges.width() != left.width() || ranges.height() != left.height())
    throw Error(ErrorCode::kInvalidArgument, "census images and ranges must share dimensions");
  bool any = false;
  for (const auto& r : ranges.data()) any = any || !r.empty();
  if (!any) throw Error(ErrorCode::kEmptyRange, "no disparity to search");

  const Cost saturation = static_cast<Cost>(left.bit_count());
  CostVolume volume(ranges, saturation);
  const int w = left.width();
  parallel_for(0, left.height(), [&](int y) {
    const std::uint64_t* lrow = left.row(y);
    const std::uint64_t* rrow = right.row(y);
    const std::uint8_t* lvalid = left.valid_row(y);
    const std::uint8_t* rvalid = right.valid_row(y);
    for (int x = 0; x < w; ++x) {
      const DisparityRange r = ranges(x, y);
      if (r.empty() || !lvalid[x]) continue;
      Cost* c = volume.costs(x, y);
      for (int d = r.min; d <= r.max; ++d) {
        const int xr = x - d;
        if (xr < 0 || xr >= w || !rvalid[xr]) continue;
        c[d - r.min] = static_cast<Cost>(hamming(lrow[x], rrow[xr]));
      }
    }
  });
  return volume;
}

/// Search ranges seen from the right image: for right pixel x_r, the hull
/// of every d with d in the range of left pixel x_r + d. Right pixels
/// without a valid descriptor get an empty range.
inline Image<DisparityRange> right_view_ranges(const Image<DisparityRange>& left_ranges,
                                               const CensusImage& right) {
  const int w = left_ranges.width();
  Image<DisparityRange> out(w, left_ranges.height(), DisparityRange{0, -1});
  parallel_for(0, left_ranges.height(), [&](int y) {
    for (int x = 0; x < w; ++x) {
      const DisparityRange r = left_ranges(x, y);
      for (int d = r.min; d <= r.max; ++d) {
        const int xr = x - d;
        if (xr < 0 || xr >= w || !right.valid(xr, y)) continue;
        DisparityRange& o = out(xr, y);
        if (o.empty()) {
          o = {d, d};
        } else {
          o.min = std::min(o.min, d);
          o.max = std::max(o.max, d);
        }
      }
    }
  });
  return out;
}

/// C_r(p, d) = Hamming(right(x, y), left(x + d, y)): the volume matched from
/// the right image, with the same saturation rule.
inline CostVolume compute_right_cost_volume(const CensusImage& left, const CensusImage& right,
                                            const Image<DisparityRange>& right_ranges) {
  if (left.width() != right.width() || left.height() != right.height() ||
      right_ranges.width() != right.width() || right_ranges.height() != right.height())
    throw Error(ErrorCode::kInvalidArgument, "census images and ranges must share dimensions");
  bool any = false;
  for (const auto& r : right_ranges.data()) any = any || !r.empty();
  if (!any) throw Error(ErrorCode::kEmptyRange, "no disparity to search");

  CostVolume volume(right_ranges, static_cast<Cost>(right.bit_count()));
  const int w = right.width();
  parallel_for(0, right.height(), [&](int y) {
    const std::uint64_t* lrow = left.row(y);
    const std::uint64_t* rrow = right.row(y);
    const std::uint8_t* lvalid = left.valid_row(y);
    const std::uint8_t* rvalid = right.valid_row(y);
    for (int x = 0; x < w; ++x) {
      const DisparityRange r = right_ranges(x, y);
      if (r.empty() || !rvalid[x]) continue;
      Cost* c = volume.costs(x, y);
      for (int d = r.min; d <= r.max; ++d) {
        const int xl = x + d;
        if (xl < 0 || xl >= w || !lvalid[xl]) continue;
        c[d - r.min] = static_cast<Cost>(hamming(rrow[x], lrow[xl]));
      }
    }
  });
  return volume;
}

inline CostVolume compute_cost_volume(const CensusImage& left, const CensusImage& right,
                                      DisparityRange range) {
  if (range.empty()) throw Error(ErrorCode::kEmptyRange, "empty disparity range");
  return compute_cost_volume(left, right, Image<DisparityRange>(left.width(), left.height(), range));
}

}  // namespace epistereo

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "epistereo/census.hpp"
#include "epistereo/cost_volume.hpp"
#include "epistereo/disparity.hpp"
#include "epistereo/image.hpp"
#include "epistereo/sgm.hpp"

namespace epistereo {

inline constexpr int kMinPyramidSide = 32;
inline constexpr int kMaxCoarsestSide = 128;

/// 2x2 box downsampling. A coarse pixel is valid only if all four source
/// pixels are.
inline MaskedImage downsample(const MaskedImage& img) {
  const int w = img.pixels.width() / 2;
  const int h = img.pixels.height() / 2;
  MaskedImage out{GrayImage(w, h, 0.0f), Mask(w, h, 0)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int sx = 2 * x;
      const int sy = 2 * y;
      const bool ok = img.mask(sx, sy) && img.mask(sx + 1, sy) && img.mask(sx, sy + 1) &&
                      img.mask(sx + 1, sy + 1);
      if (!ok) continue;
      out.pixels(x, y) = 0.25f * (img.pixels(sx, sy) + img.pixels(sx + 1, sy) +
                                  img.pixels(sx, sy + 1) + img.pixels(sx + 1, sy + 1));
      out.mask(x, y) = 1;
    }
  }
  return out;
}

/// Number of pyramid levels (including full resolution) so that the
/// coarsest shorter side lands in [32, 128] where possible.
inline int pyramid_level_count(int width, int height, int requested = 0) {
  int side = std::min(width, height);
  if (side < kMinPyramidSide)
    throw Error(ErrorCode::kImageTooSmall, "image shorter side below 32 px");
  if (requested > 0) {
    if ((side >> (requested - 1)) < kMinPyramidSide)
      throw Error(ErrorCode::kImageTooSmall, "coarsest pyramid level would drop below 32 px");
    return requested;
  }
  int levels = 1;
  while (side > kMaxCoarsestSide && side / 2 >= kMinPyramidSide) {
    side /= 2;
    ++levels;
  }
  return levels;
}

namespace detail {

inline int floor_div_pow2(int v, int level) {
  return static_cast<int>(std::floor(std::ldexp(static_cast<double>(v), -level)));
}
inline int ceil_div_pow2(int v, int level) {
  return static_cast<int>(std::ceil(std::ldexp(static_cast<double>(v), -level)));
}

// Per-pixel search intervals at a finer level from the coarser disparities.
inline Image<DisparityRange> propagate_ranges(const DisparityMap& coarse, int width, int height,
                                              DisparityRange level_range, int margin,
                                              const Mask& fine_mask) {
  Image<DisparityRange> ranges(width, height, DisparityRange{0, -1});
  const int cw = coarse.width();
  const int ch = coarse.height();
  parallel_for(0, height, [&](int y) {
    for (int x = 0; x < width; ++x) {
      if (!fine_mask(x, y)) continue;
      const int cx = std::min(x / 2, cw - 1);
      const int cy = std::min(y / 2, ch - 1);
      double lo = 0.0;
      double hi = 0.0;
      bool found = false;
      if (coarse.valid(cx, cy)) {
        lo = hi = coarse.values(cx, cy);
        found = true;
      } else {
        for (int ny = std::max(cy - 2, 0); ny <= std::min(cy + 2, ch - 1); ++ny) {
          for (int nx = std::max(cx - 2, 0); nx <= std::min(cx + 2, cw - 1); ++nx) {
            if (!coarse.valid(nx, ny)) continue;
            const double d = coarse.values(nx, ny);
            lo = found ? std::min(lo, d) : d;
            hi = found ? std::max(hi, d) : d;
            found = true;
          }
        }
      }
      DisparityRange r = level_range;
      if (found) {
        r.min = std::max(level_range.min, static_cast<int>(std::floor(2.0 * lo - margin)));
        r.max = std::min(level_range.max, static_cast<int>(std::ceil(2.0 * hi + margin)));
        if (r.empty()) r = level_range;
      }
      ranges(x, y) = r;
    }
  });
  return ranges;
}

}  // namespace detail

/// Census + SGM + winner selection at one resolution with per-pixel ranges.
/// The right disparities for the left-right check come from the matching
/// volume seen from the right image, aggregated on its own.
inline DisparityMap match_level(const MaskedImage& left, const MaskedImage& right,
                                const Image<DisparityRange>& ranges, const SgmParams& params,
                                DisparitySpace space = DisparitySpace::kFrame) {
  const CensusImage cl = census_transform(left.pixels, params.census_w, params.census_h, &left.mask);
  const CensusImage cr =
      census_transform(right.pixels, params.census_w, params.census_h, &right.mask);
  const CostVolume agg = sgm_aggregate(compute_cost_volume(cl, cr, ranges), params);
  const Image<DisparityRange> right_ranges = right_view_ranges(ranges, cr);
  bool any_right = false;
  for (const auto& r : right_ranges.data()) any_right = any_right || !r.empty();
  if (!any_right) return DisparityMap(left.pixels.width(), left.pixels.height(), space);
  const CostVolume agg_right =
      sgm_aggregate(compute_right_cost_volume(cl, cr, right_ranges), params);
  Mask eligible(left.pixels.width(), left.pixels.height(), 0);
  for (int y = 0; y < eligible.height(); ++y)
    for (int x = 0; x < eligible.width(); ++x) eligible(x, y) = cl.valid(x, y);
  return select_disparity(agg, params, &eligible, space, &agg_right).left;
}

/// Coarse-to-fine semi-global matching of an epipolar-aligned pair.
///
/// The coarsest level searches `range` scaled down to that level. Each finer
/// level searches [2 d_coarse - m, 2 d_coarse + m] per pixel; pixels with no
/// coarse disparity take the span of valid coarse disparities in a 5x5
/// neighbourhood, or the full level range when there are none. Uniqueness
/// and left-right checks run at every level.
inline DisparityMap hierarchical_match(const MaskedImage& left, const MaskedImage& right,
                                       DisparityRange range, const SgmParams& params,
                                       DisparitySpace space = DisparitySpace::kFrame) {
  params.validate();
  if (!left.pixels.same_shape(right.pixels) || !left.mask.same_shape(left.pixels) ||
      !right.mask.same_shape(right.pixels))
    throw Error(ErrorCode::kInvalidArgument, "left and right images must share dimensions");
  if (range.empty()) throw Error(ErrorCode::kEmptyRange, "empty disparity range");
  const int levels = pyramid_level_count(left.pixels.width(), left.pixels.height(),
                                         params.pyramid_levels);

  std::vector<MaskedImage> lp{left};
  std::vector<MaskedImage> rp{right};
  for (int i = 1; i < levels; ++i) {
    lp.push_back(downsample(lp.back()));
    rp.push_back(downsample(rp.back()));
  }

  DisparityMap current;
  for (int level = levels - 1; level >= 0; --level) {
    const MaskedImage& l = lp[level];
    const MaskedImage& r = rp[level];
    const DisparityRange level_range{detail::floor_div_pow2(range.min, level),
                                     detail::ceil_div_pow2(range.max, level)};
    Image<DisparityRange> ranges;
    if (level == levels - 1) {
      ranges = Image<DisparityRange>(l.pixels.width(), l.pixels.height(), DisparityRange{0, -1});
      for (std::size_t i = 0; i < ranges.size(); ++i)
        if (l.mask.data()[i]) ranges.data()[i] = level_range;
    } else {
      ranges = detail::propagate_ranges(current, l.pixels.width(), l.pixels.height(), level_range,
                                        params.search_margin, l.mask);
    }
    bool any = false;
    for (const auto& rr : ranges.data()) any = any || !rr.empty();
    if (!any) return DisparityMap(left.pixels.width(), left.pixels.height(), space);
    current = match_level(l, r, ranges, params, space);
  }
  return current;
}

}  // namespace epistereo

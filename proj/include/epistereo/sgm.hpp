#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "epistereo/cost_volume.hpp"
#include "epistereo/error.hpp"

namespace epistereo {

struct SgmParams {
  int p1 = 10;
  int p2 = 120;
  int num_paths = 8;
  int census_w = 7;
  int census_h = 7;
  double lr_threshold = 1.0;
  double uniqueness_ratio = 1.05;
  int pyramid_levels = 0;  // 0 = choose automatically
  int search_margin = 4;

  /// Throws InvalidArgument on a bad combination. P1 = P2 = 0 is accepted
  /// (aggregation then reduces to a sum of raw costs).
  void validate() const {
    const bool zero = p1 == 0 && p2 == 0;
    if (!zero && !(p1 > 0 && p1 < p2))
      throw Error(ErrorCode::kInvalidArgument, "penalties must satisfy 0 < P1 < P2");
    if (num_paths != 4 && num_paths != 8)
      throw Error(ErrorCode::kInvalidArgument, "num_paths must be 4 or 8");
    if (census_w % 2 == 0 || census_h % 2 == 0 || census_w < 1 || census_h < 1)
      throw Error(ErrorCode::kInvalidArgument, "census window must be odd");
    if (lr_threshold < 0.0) throw Error(ErrorCode::kInvalidArgument, "lr_threshold must be >= 0");
    if (uniqueness_ratio < 1.0)
      throw Error(ErrorCode::kInvalidArgument, "uniqueness ratio must be >= 1");
    if (pyramid_levels < 0 || search_margin < 0)
      throw Error(ErrorCode::kInvalidArgument, "pyramid levels and margin must be >= 0");
  }
};

/// Scanline directions; the first four are used when num_paths == 4.
inline constexpr std::array<std::array<int, 2>, 8> kPathDirections = {{
    {1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, -1}, {1, -1}, {-1, 1},
}};

namespace detail {

// One step of the path recurrence at pixel `cur` given the previous pixel's
// path costs. prev_count == 0 means the path starts here.
inline void sgm_step(const Cost* cost, DisparityRange cur, const std::uint16_t* prev,
                     DisparityRange prev_range, int prev_min, int p1, int p2, std::uint16_t* out) {
  const int n = cur.count();
  if (prev_range.empty()) {
    std::copy(cost, cost + n, out);
    return;
  }
  const int pn = prev_range.count();
  const int shift = cur.min - prev_range.min;  // index into prev for j = 0
  const int jump = prev_min + p2;
  for (int j = 0; j < n; ++j) {
    const int k = j + shift;
    int best = jump;
    if (k >= 0 && k < pn) best = std::min(best, static_cast<int>(prev[k]));
    if (k - 1 >= 0 && k - 1 < pn) best = std::min(best, prev[k - 1] + p1);
    if (k + 1 >= 0 && k + 1 < pn) best = std::min(best, prev[k + 1] + p1);
    out[j] = static_cast<std::uint16_t>(cost[j] + best - prev_min);
  }
}

}  // namespace detail

/// Sums the path-wise dynamic programming of semi-global matching over
/// num_paths directions:
///   L_r(p, d) = C(p, d) + min(L_r(p-r, d), L_r(p-r, d+-1) + P1,
///                             min_k L_r(p-r, k) + P2) - min_k L_r(p-r, k)
/// Disparities missing from the previous pixel's interval drop out of the
/// minimum. Lines of one direction are independent and run in parallel;
/// directions are accumulated one after another.
inline CostVolume sgm_aggregate(const CostVolume& volume, const SgmParams& params) {
  params.validate();
  const long headroom = static_cast<long>(params.num_paths) * (volume.saturation() + params.p2);
  if (headroom > std::numeric_limits<std::uint16_t>::max())
    throw Error(ErrorCode::kInvalidArgument, "aggregated cost would overflow 16 bits");

  const int w = volume.width();
  const int h = volume.height();
  CostVolume sum(volume.ranges(), 0);
  const int width_max = volume.max_count();

  for (int path = 0; path < params.num_paths; ++path) {
    const int dx = kPathDirections[path][0];
    const int dy = kPathDirections[path][1];
    std::vector<std::array<int, 2>> starts;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (x - dx < 0 || x - dx >= w || y - dy < 0 || y - dy >= h) starts.push_back({x, y});

    parallel_for(0, static_cast<int>(starts.size()), [&](int s) {
      std::vector<std::uint16_t> prev(width_max), cur(width_max);
      DisparityRange prev_range{0, -1};
      int prev_min = 0;
      for (int x = starts[s][0], y = starts[s][1]; x >= 0 && x < w && y >= 0 && y < h;
           x += dx, y += dy) {
        const DisparityRange r = volume.range(x, y);
        if (r.empty()) {
          prev_range = r;
          continue;
        }
        detail::sgm_step(volume.costs(x, y), r, prev.data(), prev_range, prev_min, params.p1,
                         params.p2, cur.data());
        Cost* acc = sum.costs(x, y);
        int m = std::numeric_limits<int>::max();
        for (int j = 0; j < r.count(); ++j) {
          acc[j] = static_cast<Cost>(acc[j] + cur[j]);
          m = std::min(m, static_cast<int>(cur[j]));
        }
        std::swap(prev, cur);
        prev_range = r;
        prev_min = m;
      }
    });
  }
  return sum;
}

}  // namespace epistereo

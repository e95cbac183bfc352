#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "epistereo/cost_volume.hpp"
#include "epistereo/image.hpp"
#include "epistereo/sgm.hpp"

namespace epistereo {

enum class DisparitySpace { kFrame, kSpherical };

/// Left-view disparity x_left - x_right per pixel. Invalid pixels hold
/// kInvalid (negative infinity), which never compares equal to a number.
struct DisparityMap {
  static constexpr float kInvalid = -std::numeric_limits<float>::infinity();

  Image<float> values;
  DisparitySpace space = DisparitySpace::kFrame;

  DisparityMap() = default;
  DisparityMap(int width, int height, DisparitySpace sp = DisparitySpace::kFrame)
      : values(width, height, kInvalid), space(sp) {}

  int width() const { return values.width(); }
  int height() const { return values.height(); }
  static bool is_valid(float d) { return std::isfinite(d); }
  bool valid(int x, int y) const { return is_valid(values(x, y)); }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (float d : values.data()) n += is_valid(d);
    return n;
  }
};

/// Parabola vertex offset through (d-1, d, d+1) costs; 0 when flat.
inline double parabola_offset(double minus, double center, double plus) {
  const double denom = minus - 2.0 * center + plus;
  if (!(denom > 0.0)) return 0.0;
  return (minus - plus) / (2.0 * denom);
}

inline constexpr int kNoWinner = std::numeric_limits<int>::min();

/// Winner-take-all results for both views of one aggregated volume.
struct WinnerMaps {
  DisparityMap left;        // subpixel, after uniqueness and LR checks
  Image<int> left_integer;  // integer winners before checks, kNoWinner if none
  Image<int> right_integer; // right-view winners, kNoWinner if none
};

/// Winner selection on an aggregated volume.
///
/// Left view: argmin over the pixel's interval (smallest d wins ties),
/// rejected when another disparity more than one step away scores below
/// uniqueness_ratio times the winner or ties it exactly; parabola subpixel
/// refinement unless the winner sits on the interval border. Right view:
/// argmin over S(x_r + d, d), same tie rule, or the argmin of
/// `right_aggregated` when a separately aggregated right volume is given.
/// A left pixel survives when its right partner's disparity differs by at
/// most lr_threshold.
/// `eligible` marks left pixels allowed to win (masked and border pixels
/// are not); pass nullptr to allow all.
inline WinnerMaps select_disparity(const CostVolume& aggregated, const SgmParams& params,
                                   const Mask* eligible = nullptr,
                                   DisparitySpace space = DisparitySpace::kFrame,
                                   const CostVolume* right_aggregated = nullptr) {
  const int w = aggregated.width();
  const int h = aggregated.height();
  WinnerMaps out{DisparityMap(w, h, space), Image<int>(w, h, kNoWinner), Image<int>(w, h, kNoWinner)};
  Image<std::uint8_t> unique(w, h, 0);
  Image<float> subpixel(w, h, 0.0f);

  parallel_for(0, h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const DisparityRange r = aggregated.range(x, y);
      if (r.empty() || (eligible && !(*eligible)(x, y))) continue;
      const Cost* c = aggregated.costs(x, y);
      const int n = r.count();
      int best = 0;
      for (int j = 1; j < n; ++j)
        if (c[j] < c[best]) best = j;
      out.left_integer(x, y) = r.min + best;

      bool ok = true;
      for (int j = 0; j < n && ok; ++j) {
        if (std::abs(j - best) <= 1) continue;
        if (c[j] == c[best] || c[j] < params.uniqueness_ratio * c[best]) ok = false;
      }
      unique(x, y) = ok;
      if (best > 0 && best + 1 < n)
        subpixel(x, y) = static_cast<float>(parabola_offset(c[best - 1], c[best], c[best + 1]));
    }
  });

  if (right_aggregated) {
    if (right_aggregated->width() != w || right_aggregated->height() != h)
      throw Error(ErrorCode::kInvalidArgument, "right volume shape differs from left volume");
    parallel_for(0, h, [&](int y) {
      for (int x = 0; x < w; ++x) {
        const DisparityRange r = right_aggregated->range(x, y);
        if (r.empty()) continue;
        const Cost* c = right_aggregated->costs(x, y);
        int best = 0;
        for (int j = 1; j < r.count(); ++j)
          if (c[j] < c[best]) best = j;
        out.right_integer(x, y) = r.min + best;
      }
    });
  } else {
    // Right view from the same volume: candidate (x_r + d, d) for each d.
    parallel_for(0, h, [&](int y) {
    std::vector<int> best_cost(w, std::numeric_limits<int>::max());
    for (int x = 0; x < w; ++x) {
      const DisparityRange r = aggregated.range(x, y);
      if (r.empty() || (eligible && !(*eligible)(x, y))) continue;
      const Cost* c = aggregated.costs(x, y);
      for (int d = r.min; d <= r.max; ++d) {
        const int xr = x - d;
        if (xr < 0 || xr >= w) continue;
        const int cost = c[d - r.min];
        int& cur = out.right_integer(xr, y);
        if (cost < best_cost[xr] || (cost == best_cost[xr] && d < cur)) {
          best_cost[xr] = cost;
          cur = d;
        }
      }
    }
    });
  }

  parallel_for(0, h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const int dl = out.left_integer(x, y);
      if (dl == kNoWinner || !unique(x, y)) continue;
      const int xr = x - dl;
      if (xr < 0 || xr >= w) continue;
      const int dr = out.right_integer(xr, y);
      if (dr == kNoWinner || std::abs(dl - dr) > params.lr_threshold) continue;
      out.left.values(x, y) = static_cast<float>(dl + subpixel(x, y));
    }
  });
  return out;
}

}  // namespace epistereo

#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "epistereo/disparity.hpp"
#include "epistereo/geometry.hpp"
#include "epistereo/point_cloud.hpp"
#include "epistereo/rectify.hpp"
#include "epistereo/spherical.hpp"

namespace epistereo {

inline constexpr double kDefaultMaxDepth = 1e4;

/// Everything needed to turn rectified disparities into world points.
struct StereoGeometry {
  RectifyingFrame frame;
  Intrinsics rectified{1.0, 2, 2};
  std::optional<SphericalGrid> grid;  // present for spherical disparities
  double max_depth = kDefaultMaxDepth;

  double baseline() const { return frame.baseline; }
  double focal() const { return rectified.f(); }
  /// Smallest accepted disparity, b f / Z_max.
  double min_disparity() const { return baseline() * focal() / max_depth; }
};

/// Z = b f / d.
inline double disparity_to_depth(const StereoGeometry& geom, double d) {
  if (!(d > 0.0) || !(d > geom.min_disparity()))
    throw Error(ErrorCode::kNonPositiveDisparity, "disparity too small for a finite depth");
  return geom.baseline() * geom.focal() / d;
}

/// World point of rectified left pixel (x, y) with frame disparity d.
inline std::optional<Vec3> triangulate_frame_pixel(const StereoGeometry& geom, double x, double y,
                                                   double d) {
  if (!(d > 0.0) || !(d > geom.min_disparity())) return std::nullopt;
  const double z = geom.baseline() * geom.focal() / d;
  const Vec3 rect((x - geom.rectified.cx()) * z / geom.focal(),
                  (y - geom.rectified.cy()) * z / geom.focal(), z);
  return geom.frame.left_center + geom.frame.rotation.transpose() * rect;
}

namespace detail {

// Rows are triangulated independently and concatenated in row order.
template <typename PointOf>
PointCloud cloud_from_rows(const DisparityMap& disp, const ColorImage* colors, PointOf&& point_of) {
  const int h = disp.height();
  std::vector<PointCloud> rows(static_cast<std::size_t>(h));
  parallel_for(0, h, [&](int y) {
    PointCloud& row = rows[y];
    for (int x = 0; x < disp.width(); ++x) {
      const float d = disp.values(x, y);
      if (!DisparityMap::is_valid(d)) continue;
      const std::optional<Vec3> p = point_of(x, y, static_cast<double>(d));
      if (!p) continue;
      row.points.push_back(*p);
      if (colors) row.colors.push_back((*colors)(x, y));
    }
  });
  PointCloud cloud;
  if (colors) cloud.colors.reserve(disp.valid_count());
  for (const PointCloud& r : rows) {
    cloud.points.insert(cloud.points.end(), r.points.begin(), r.points.end());
    cloud.colors.insert(cloud.colors.end(), r.colors.begin(), r.colors.end());
  }
  return cloud;
}

inline void check_colors(const DisparityMap& disp, const ColorImage* colors) {
  if (colors && (colors->width() != disp.width() || colors->height() != disp.height()))
    throw Error(ErrorCode::kInvalidArgument, "color image must match the disparity map");
}

}  // namespace detail

/// Cloud from a frame-space disparity map. Colors, when given, are the
/// left image in the same pixel space as `disp`.
inline PointCloud frame_disparity_cloud(const DisparityMap& disp, const StereoGeometry& geom,
                                        const ColorImage* colors = nullptr) {
  if (disp.space != DisparitySpace::kFrame)
    throw Error(ErrorCode::kInvalidArgument, "disparity map is not in frame space");
  detail::check_colors(disp, colors);
  return detail::cloud_from_rows(disp, colors, [&](int x, int y, double d) {
    return triangulate_frame_pixel(geom, x, y, d);
  });
}

/// Maps a spherical correspondence back to rectified frame coordinates and
/// triangulates it there. Nothing when either end fails to map.
inline std::optional<Vec3> triangulate_spherical_pixel(const StereoGeometry& geom, double col,
                                                       double row, double d_s) {
  const SphericalGrid& grid = *geom.grid;
  const auto left = try_sphere_pixel_to_frame(grid, geom.rectified, col, row);
  const auto right = try_sphere_pixel_to_frame(grid, geom.rectified, col - d_s, row);
  if (!left || !right) return std::nullopt;
  return triangulate_frame_pixel(geom, left->x(), left->y(), left->x() - right->x());
}

inline PointCloud spherical_disparity_cloud(const DisparityMap& disp, const StereoGeometry& geom,
                                            const ColorImage* colors = nullptr) {
  if (disp.space != DisparitySpace::kSpherical)
    throw Error(ErrorCode::kInvalidArgument, "disparity map is not in spherical space");
  if (!geom.grid) throw Error(ErrorCode::kInvalidArgument, "spherical grid missing from geometry");
  detail::check_colors(disp, colors);
  return detail::cloud_from_rows(disp, colors, [&](int x, int y, double d) {
    return triangulate_spherical_pixel(geom, x, y, d);
  });
}

inline PointCloud disparity_cloud(const DisparityMap& disp, const StereoGeometry& geom,
                                  const ColorImage* colors = nullptr) {
  return disp.space == DisparitySpace::kFrame ? frame_disparity_cloud(disp, geom, colors)
                                              : spherical_disparity_cloud(disp, geom, colors);
}

}  // namespace epistereo

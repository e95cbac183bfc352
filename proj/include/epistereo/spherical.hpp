#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <utility>

#include "epistereo/geometry.hpp"
#include "epistereo/image.hpp"
#include "epistereo/warp.hpp"

namespace epistereo {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
/// Latitudes beyond this are masked; the angle parameterization is singular at the poles.
inline constexpr double kMaxLatitude = 85.0 * std::numbers::pi / 180.0;

/// Longitude/latitude pair in radians.
struct Angles {
  double lambda = 0.0;
  double phi = 0.0;
};

/// Angular sampling of a spherical epipolar image.
///
/// Pre-rotation coordinates are u = s*lambda/(2 pi) + u0 and
/// v = s*phi/(2 pi) + v0. The stored image is that raster turned 90 degrees
/// clockwise in display orientation, so output column = (out_w - 1) - v and
/// output row = u. Rows therefore index lambda, which is shared by the two
/// views of a rectified pair; columns carry the disparity.
struct SphericalGrid {
  double s = kTwoPi;       // pixels per full turn
  int out_w = 2;           // columns of the rotated image
  int out_h = 2;           // rows of the rotated image
  double lambda_max = 0;   // |lambda| covered by the rows
  double phi_max = 0;      // |phi| covered by the columns, at most kMaxLatitude
  double u0 = 0.5;         // pre-rotation coordinate of lambda = 0
  double v0 = 0.5;         // pre-rotation coordinate of phi = 0

  double pixels_per_radian() const { return s / kTwoPi; }
  /// Output pixel (col, row) holding lambda = phi = 0.
  Vec2 center() const { return {(out_w - 1) - v0, u0}; }
};

/// A spherical epipolar image and the grid it was sampled on.
struct SphericalImage {
  SphericalGrid grid;
  GrayImage pixels;
  Mask mask;
};

inline Angles ray_to_angles(const Ray& ray) {
  if (!(ray.z > 0.0)) throw Error(ErrorCode::kBehindCamera, "ray not in the forward hemisphere");
  const double r = std::sqrt(ray.x * ray.x + ray.z * ray.z);
  if (!(r > 1e-12)) throw Error(ErrorCode::kPoleSingularity, "ray along the pole axis");
  return {std::atan2(ray.x, ray.z), std::atan(-ray.y / r)};
}

inline Ray angles_to_ray(double lambda, double phi) {
  const double cp = std::cos(phi);
  return {std::sin(lambda) * cp, -std::sin(phi), std::cos(lambda) * cp};
}

/// Pre-rotation (u, v) of a pair of angles.
inline Vec2 angles_to_sphere_pixel(const SphericalGrid& grid, double lambda, double phi) {
  constexpr double kSlack = 1e-12;
  if (!(std::abs(lambda) <= grid.lambda_max + kSlack && std::abs(phi) <= grid.phi_max + kSlack))
    throw Error(ErrorCode::kOutOfGrid, "angles outside grid extents");
  const double k = grid.pixels_per_radian();
  return {k * lambda + grid.u0, k * phi + grid.v0};
}

inline Angles sphere_pixel_to_angles(const SphericalGrid& grid, double u, double v) {
  const double k = grid.pixels_per_radian();
  return {(u - grid.u0) / k, (v - grid.v0) / k};
}

/// 90 degree clockwise turn (display orientation) and its inverse.
inline Vec2 rotate_clockwise(const SphericalGrid& grid, const Vec2& uv) {
  return {(grid.out_w - 1) - uv.y(), uv.x()};
}
inline Vec2 unrotate_clockwise(const SphericalGrid& grid, const Vec2& col_row) {
  return {col_row.y(), (grid.out_w - 1) - col_row.x()};
}

namespace detail {

// Ray in the rectified camera with its X and Y components exchanged.
inline Ray swapped(const Ray& r) { return {r.y, r.x, r.z}; }

}  // namespace detail

/// Forward chain: rectified frame pixel -> swap -> angles -> (u, v) -> rotate.
inline Vec2 frame_to_sphere_pixel(const SphericalGrid& grid, const Intrinsics& intr, double x,
                                  double y) {
  const Angles a = ray_to_angles(detail::swapped(pixel_to_ray(intr, x, y)));
  return rotate_clockwise(grid, angles_to_sphere_pixel(grid, a.lambda, a.phi));
}

/// Exact inverse of frame_to_sphere_pixel for output pixel (col, row).
inline Vec2 sphere_pixel_to_frame(const SphericalGrid& grid, const Intrinsics& intr, double col,
                                  double row) {
  const Vec2 uv = unrotate_clockwise(grid, {col, row});
  const Angles a = sphere_pixel_to_angles(grid, uv.x(), uv.y());
  constexpr double kSlack = 1e-9;
  if (!(std::abs(a.lambda) <= grid.lambda_max + kSlack && std::abs(a.phi) <= grid.phi_max + kSlack))
    throw Error(ErrorCode::kOutOfGrid, "spherical pixel outside grid");
  if (std::abs(a.lambda) >= std::numbers::pi / 2 || std::abs(a.phi) >= std::numbers::pi / 2)
    throw Error(ErrorCode::kBehindCamera, "spherical pixel maps behind the camera");
  return ray_to_pixel(intr, detail::swapped(angles_to_ray(a.lambda, a.phi)));
}

/// Non-throwing variant used by the warps: nothing when the mapping fails.
inline std::optional<Vec2> try_sphere_pixel_to_frame(const SphericalGrid& grid,
                                                     const Intrinsics& intr, double col,
                                                     double row) {
  const Vec2 uv = unrotate_clockwise(grid, {col, row});
  const Angles a = sphere_pixel_to_angles(grid, uv.x(), uv.y());
  if (std::abs(a.phi) > kMaxLatitude || std::abs(a.lambda) >= std::numbers::pi / 2) return std::nullopt;
  const Ray r = detail::swapped(angles_to_ray(a.lambda, a.phi));
  if (!(r.z > 1e-12)) return std::nullopt;
  return ray_to_pixel(intr, r);
}

/// Grid covering the field of view of a rectified image with intrinsics
/// `intr`: corners and edge midpoints are pushed through the forward chain,
/// and `margin_px` pixels are added on every side. Default scale gives f
/// pixels per radian, matching the rectified resolution at the center.
inline SphericalGrid make_spherical_grid(const Intrinsics& intr, double margin_px = 2.0,
                                         std::optional<double> scale = std::nullopt) {
  const double s = scale.value_or(kTwoPi * intr.f());
  if (!(s > 0.0)) throw Error(ErrorCode::kInvalidArgument, "spherical scale must be positive");
  const double k = s / kTwoPi;
  double lam = 0.0;
  double phi = 0.0;
  const double xs[] = {0.0, intr.cx(), intr.width() - 1.0};
  const double ys[] = {0.0, intr.cy(), intr.height() - 1.0};
  for (double x : xs) {
    for (double y : ys) {
      const Angles a = ray_to_angles(detail::swapped(pixel_to_ray(intr, x, y)));
      lam = std::max(lam, std::abs(a.lambda));
      phi = std::max(phi, std::abs(a.phi));
    }
  }
  phi = std::min(phi, kMaxLatitude);
  SphericalGrid g;
  g.s = s;
  g.out_h = 2 * static_cast<int>(std::ceil(k * lam + margin_px)) + 1;
  g.out_w = 2 * static_cast<int>(std::ceil(k * phi + margin_px)) + 1;
  g.u0 = 0.5 * (g.out_h - 1);
  g.v0 = 0.5 * (g.out_w - 1);
  g.lambda_max = g.u0 / k;
  g.phi_max = std::min(g.v0 / k, kMaxLatitude);
  return g;
}

/// Resamples a planar rectified image onto the spherical grid with one
/// composite inverse map per output pixel.
inline SphericalImage spherical_warp(const MaskedImage& rectified, const Intrinsics& intr,
                                     const SphericalGrid& grid) {
  MaskedImage warped = inverse_warp(
      rectified.pixels, rectified.mask.empty() ? nullptr : &rectified.mask, grid.out_w,
      grid.out_h, [&](int col, int row) { return try_sphere_pixel_to_frame(grid, intr, col, row); });
  return {grid, std::move(warped.pixels), std::move(warped.mask)};
}

inline ColorImage spherical_warp_color(const ColorImage& rectified, const Intrinsics& intr,
                                       const SphericalGrid& grid) {
  return inverse_warp_color(rectified, grid.out_w, grid.out_h, [&](int col, int row) {
    return try_sphere_pixel_to_frame(grid, intr, col, row);
  });
}

}  // namespace epistereo

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "epistereo/geometry.hpp"
#include "epistereo/image.hpp"
#include "epistereo/warp.hpp"

namespace epistereo {

/// Shared orientation of a rectified stereo pair. Rows of `rotation` are the
/// rectified camera axes in world coordinates; row 0 points along the
/// baseline from the left to the right center.
struct RectifyingFrame {
  Mat3 rotation = Mat3::Identity();
  Vec3 principal_sum = Vec3::Zero();
  double baseline = 0.0;
  Vec3 left_center = Vec3::Zero();
};

/// Builds the rectifying rotation from two camera poses.
///
/// r1 follows the baseline, r2 = normalize(k x r1) where k is the sum of the
/// two principal rays, and r3 = r1 x r2. With this sign choice canonical
/// stereo (identical rotations, baseline along +X) yields the identity.
inline RectifyingFrame build_rectifying_rotation(const CameraPose& left, const CameraPose& right) {
  const Vec3 base = right.center() - left.center();
  const double b = base.norm();
  if (!(b > 1e-9)) throw Error(ErrorCode::kDegenerateBaseline, "camera centers coincide");
  const Vec3 r1 = base / b;
  const Vec3 k = left.principal_ray() + right.principal_ray();
  const Vec3 cross = k.cross(r1);
  // |k x r1| = |k| sin(angle); reject angles below 0.1 degree or vanishing k.
  const double min_sin = std::sin(0.1 * std::numbers::pi / 180.0);
  if (!(cross.norm() > min_sin * std::max(k.norm(), 1e-12)) || k.norm() < 1e-9)
    throw Error(ErrorCode::kDegeneratePrincipalRays,
                "sum of principal rays is parallel to the baseline");
  const Vec3 r2 = cross.normalized();
  const Vec3 r3 = r1.cross(r2).normalized();

  RectifyingFrame frame;
  frame.rotation.row(0) = r1.transpose();
  frame.rotation.row(1) = r2.transpose();
  frame.rotation.row(2) = r3.transpose();
  frame.principal_sum = k;
  frame.baseline = b;
  frame.left_center = left.center();
  return frame;
}

enum class ExtentMode { kFixed, kBoundingBox };

/// Homographies from original to rectified pixel coordinates plus the
/// intrinsics of the rectified views. `extent_offset` is how far the
/// principal point moved relative to the fixed-extent layout (zero in
/// kFixed mode).
struct HomographyPair {
  Mat3 left = Mat3::Identity();
  Mat3 right = Mat3::Identity();
  Intrinsics intrinsics{1.0, 2, 2};
  Vec2 extent_offset = Vec2::Zero();
};

/// Shared rectified intrinsics: mean focal length, per-axis max image size.
inline Intrinsics average_intrinsics(const Intrinsics& a, const Intrinsics& b) {
  return {0.5 * (a.f() + b.f()), std::max(a.width(), b.width()), std::max(a.height(), b.height())};
}

namespace detail {

inline Mat3 rectifying_homography(const Intrinsics& rectified, const CameraView& view,
                                  const Mat3& rotation) {
  return rectified.matrix() * rotation * view.pose.rotation().transpose() *
         view.intrinsics.inverse_matrix();
}

// Largest |x - cx|, |y - cy| reached by the warped source corners.
inline Vec2 warped_half_extent(const Mat3& h, const Intrinsics& src, const Intrinsics& dst) {
  Vec2 half(0.5 * dst.width(), 0.5 * dst.height());
  const double xs[] = {-0.5, 0.5 * src.width(), src.width() - 0.5};
  const double ys[] = {-0.5, 0.5 * src.height(), src.height() - 0.5};
  for (double x : xs) {
    for (double y : ys) {
      const auto p = apply_homography(h, x, y);
      if (!p) continue;
      half.x() = std::max(half.x(), std::abs(p->x() - dst.cx()));
      half.y() = std::max(half.y(), std::abs(p->y() - dst.cy()));
    }
  }
  return half;
}

}  // namespace detail

/// H = K_new R R_view^T K_view^-1 for each view.
///
/// In kBoundingBox mode the output extents grow symmetrically about the
/// principal point until every warped source corner fits (capped at 4x the
/// fixed size per axis), so the principal point stays at (w/2, h/2).
inline HomographyPair compute_homographies(const CameraView& left, const CameraView& right,
                                           const RectifyingFrame& frame,
                                           ExtentMode mode = ExtentMode::kFixed) {
  const Intrinsics fixed = average_intrinsics(left.intrinsics, right.intrinsics);
  HomographyPair out;
  out.intrinsics = fixed;
  if (mode == ExtentMode::kBoundingBox) {
    const Mat3 hl = detail::rectifying_homography(fixed, left, frame.rotation);
    const Mat3 hr = detail::rectifying_homography(fixed, right, frame.rotation);
    const Vec2 a = detail::warped_half_extent(hl, left.intrinsics, fixed);
    const Vec2 b = detail::warped_half_extent(hr, right.intrinsics, fixed);
    const int w = std::min(4 * fixed.width(),
                           2 * static_cast<int>(std::ceil(std::max(a.x(), b.x()))));
    const int h = std::min(4 * fixed.height(),
                           2 * static_cast<int>(std::ceil(std::max(a.y(), b.y()))));
    out.intrinsics = Intrinsics(fixed.f(), std::max(w, fixed.width()), std::max(h, fixed.height()));
    out.extent_offset = Vec2(out.intrinsics.cx() - fixed.cx(), out.intrinsics.cy() - fixed.cy());
  }
  out.left = detail::rectifying_homography(out.intrinsics, left, frame.rotation);
  out.right = detail::rectifying_homography(out.intrinsics, right, frame.rotation);
  return out;
}

/// Inverse-warps `image` through the original-to-output homography `h`.
inline MaskedImage warp_planar(const GrayImage& image, const Mask* mask, const Mat3& h, int out_w,
                               int out_h) {
  if (!(std::abs(h.determinant()) > 1e-12))
    throw Error(ErrorCode::kSingularHomography, "homography is not invertible");
  const Mat3 inv = h.inverse();
  return inverse_warp(image, mask, out_w, out_h,
                      [&](int x, int y) { return apply_homography(inv, x, y); });
}

inline ColorImage warp_planar_color(const ColorImage& image, const Mat3& h, int out_w, int out_h) {
  if (!(std::abs(h.determinant()) > 1e-12))
    throw Error(ErrorCode::kSingularHomography, "homography is not invertible");
  const Mat3 inv = h.inverse();
  return inverse_warp_color(image, out_w, out_h,
                            [&](int x, int y) { return apply_homography(inv, x, y); });
}

struct RectifiedPair {
  RectifyingFrame frame;
  HomographyPair homographies;
  MaskedImage left;
  MaskedImage right;
};

/// Frame-based rectification of a gray stereo pair.
inline RectifiedPair rectify_pair(const CameraView& left_view, const GrayImage& left_image,
                                  const CameraView& right_view, const GrayImage& right_image,
                                  ExtentMode mode = ExtentMode::kFixed) {
  RectifiedPair out;
  out.frame = build_rectifying_rotation(left_view.pose, right_view.pose);
  out.homographies = compute_homographies(left_view, right_view, out.frame, mode);
  const Intrinsics& k = out.homographies.intrinsics;
  out.left = warp_planar(left_image, nullptr, out.homographies.left, k.width(), k.height());
  out.right = warp_planar(right_image, nullptr, out.homographies.right, k.width(), k.height());
  return out;
}

}  // namespace epistereo

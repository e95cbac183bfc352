#pragma once

#include <cmath>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "epistereo/error.hpp"

namespace epistereo {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole intrinsics with the principal point fixed at the image center
/// (w/2, h/2). No skew, no distortion.
class Intrinsics {
 public:
  Intrinsics(double focal_px, int width, int height)
      : f_(focal_px), w_(width), h_(height) {
    if (!(focal_px > 0.0) || !std::isfinite(focal_px))
      throw Error(ErrorCode::kInvalidArgument, "focal length must be positive");
    if (width < 2 || height < 2)
      throw Error(ErrorCode::kInvalidArgument, "image must be at least 2x2");
  }

  double f() const { return f_; }
  int width() const { return w_; }
  int height() const { return h_; }
  double cx() const { return 0.5 * w_; }
  double cy() const { return 0.5 * h_; }

  /// K with the principal point at (w/2, h/2).
  Mat3 matrix() const {
    Mat3 k;
    k << f_, 0.0, cx(), 0.0, f_, cy(), 0.0, 0.0, 1.0;
    return k;
  }

  Mat3 inverse_matrix() const {
    Mat3 k;
    k << 1.0 / f_, 0.0, -cx() / f_, 0.0, 1.0 / f_, -cy() / f_, 0.0, 0.0, 1.0;
    return k;
  }

  friend bool operator==(const Intrinsics&, const Intrinsics&) = default;

 private:
  double f_;
  int w_;
  int h_;
};

/// World-to-camera rotation R (rows are the camera axes expressed in world
/// coordinates) and camera center c in meters. Camera-frame point is R(X - c).
class CameraPose {
 public:
  static constexpr double kTolerance = 1e-9;

  CameraPose() : rotation_(Mat3::Identity()), center_(Vec3::Zero()) {}
  CameraPose(const Mat3& rotation, const Vec3& center) : rotation_(rotation), center_(center) {
    const double ortho = (rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (!(ortho <= kTolerance) || std::abs(rotation.determinant() - 1.0) > kTolerance)
      throw Error(ErrorCode::kInvalidArgument, "rotation must be orthonormal with det +1");
    if (!center.allFinite()) throw Error(ErrorCode::kInvalidArgument, "camera center not finite");
  }

  const Mat3& rotation() const { return rotation_; }
  const Vec3& center() const { return center_; }
  /// Principal ray in world coordinates (third row of R).
  Vec3 principal_ray() const { return rotation_.row(2).transpose(); }

  Vec3 to_camera(const Vec3& world) const { return rotation_ * (world - center_); }
  Vec3 to_world(const Vec3& camera) const { return center_ + rotation_.transpose() * camera; }

 private:
  Mat3 rotation_;
  Vec3 center_;
};

struct CameraView {
  Intrinsics intrinsics;
  CameraPose pose;
};

/// Viewing direction in a camera frame. Not normalized unless asked.
struct Ray {
  double x = 0.0;
  double y = 0.0;
  double z = 1.0;

  Vec3 vec() const { return {x, y, z}; }
  Ray normalized() const {
    const double n = std::sqrt(x * x + y * y + z * z);
    return {x / n, y / n, z / n};
  }
};

inline Ray pixel_to_ray(const Intrinsics& intr, double x, double y) {
  return {(x - intr.cx()) / intr.f(), (y - intr.cy()) / intr.f(), 1.0};
}

inline Vec2 ray_to_pixel(const Intrinsics& intr, const Ray& ray) {
  if (!(ray.z > 0.0)) throw Error(ErrorCode::kBehindCamera, "ray has non-positive depth");
  return {intr.f() * ray.x / ray.z + intr.cx(), intr.f() * ray.y / ray.z + intr.cy()};
}

inline Vec2 project_point(const CameraView& view, const Vec3& world) {
  const Vec3 pc = view.pose.to_camera(world);
  if (!(pc.z() > 0.0)) throw Error(ErrorCode::kBehindCamera, "point is behind the camera");
  return ray_to_pixel(view.intrinsics, {pc.x(), pc.y(), pc.z()});
}

/// Rotation about a world axis by angle (radians), as a camera-to-world rotation.
inline Mat3 axis_rotation(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

}  // namespace epistereo

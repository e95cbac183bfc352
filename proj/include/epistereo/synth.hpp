#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>

#include "epistereo/error.hpp"
#include "epistereo/geometry.hpp"
#include "epistereo/image.hpp"
#include "epistereo/point_cloud.hpp"

namespace epistereo {

enum class SurfaceKind { kPlane, kRamp, kSteps, kHeightfield };

inline SurfaceKind parse_surface_kind(const std::string& name) {
  if (name == "plane") return SurfaceKind::kPlane;
  if (name == "ramp") return SurfaceKind::kRamp;
  if (name == "steps") return SurfaceKind::kSteps;
  if (name == "heightfield") return SurfaceKind::kHeightfield;
  throw Error(ErrorCode::kInvalidArgument, "unknown scene kind: " + name);
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform value in [-1, 1] attached to an integer lattice point.
inline double lattice_value(std::int64_t i, std::int64_t j, std::int64_t k, std::uint64_t seed) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(i));
  h = splitmix64(h ^ static_cast<std::uint64_t>(j));
  h = splitmix64(h ^ static_cast<std::uint64_t>(k));
  return static_cast<double>(h >> 11) * (2.0 / 9007199254740992.0) - 1.0;
}

inline double quintic(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

// Smooth 3D value noise in [-1, 1] with unit lattice spacing.
inline double value_noise(const Vec3& p, std::uint64_t seed) {
  const double fx = std::floor(p.x()), fy = std::floor(p.y()), fz = std::floor(p.z());
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const auto iz = static_cast<std::int64_t>(fz);
  const double tx = quintic(p.x() - fx), ty = quintic(p.y() - fy), tz = quintic(p.z() - fz);
  double acc = 0.0;
  for (int c = 0; c < 8; ++c) {
    const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    const double wgt = (dx ? tx : 1.0 - tx) * (dy ? ty : 1.0 - ty) * (dz ? tz : 1.0 - tz);
    acc += wgt * lattice_value(ix + dx, iy + dy, iz + dz, seed);
  }
  return acc;
}

// 2D variant for heightfield relief.
inline double value_noise_2d(double x, double y, std::uint64_t seed) {
  return value_noise(Vec3(x, y, 0.25), seed);
}

}  // namespace detail

/// Procedural heightfield scene: the surface is Z = height(X, Y) in world
/// coordinates, always inside [z_min(), z_max()], textured with band-limited
/// value noise.
struct SyntheticScene {
  SurfaceKind kind = SurfaceKind::kPlane;
  double depth = 10.0;         // base depth, meters
  double slope_x = 0.0;        // ramp dZ/dX
  double slope_y = 0.3;        // ramp dZ/dY
  double depth_spread = 4.0;   // ramp clamp half-width and steps overall height, meters
  double step_width = 1.0;     // steps: run of one step along X, meters
  int step_levels = 4;
  double relief = 0.5;         // heightfield amplitude, meters
  double relief_wavelength = 2.0;
  double texture_scale = 0.03; // finest texture cell, meters
  int octaves = 3;
  double contrast = 1.0;
  std::uint64_t seed = 1;

  double z_min() const {
    switch (kind) {
      case SurfaceKind::kPlane: return depth;
      case SurfaceKind::kRamp: return depth - depth_spread;
      case SurfaceKind::kSteps: return depth;
      case SurfaceKind::kHeightfield: return depth - relief;
    }
    return depth;
  }
  double z_max() const {
    switch (kind) {
      case SurfaceKind::kPlane: return depth;
      case SurfaceKind::kRamp: return depth + depth_spread;
      case SurfaceKind::kSteps: return depth + depth_spread;
      case SurfaceKind::kHeightfield: return depth + relief;
    }
    return depth;
  }

  void validate() const {
    if (!(z_min() > 0.0)) throw Error(ErrorCode::kInvalidArgument, "scene depths must be positive");
    if (!(texture_scale > 0.0) || octaves < 1)
      throw Error(ErrorCode::kInvalidArgument, "texture parameters must be positive");
    if (kind == SurfaceKind::kSteps && (step_levels < 2 || !(step_width > 0.0)))
      throw Error(ErrorCode::kInvalidArgument, "steps need >= 2 levels and positive width");
  }

  double height(double x, double y) const {
    switch (kind) {
      case SurfaceKind::kPlane:
        return depth;
      case SurfaceKind::kRamp:
        return std::clamp(depth + slope_x * x + slope_y * y, z_min(), z_max());
      case SurfaceKind::kSteps: {
        const double level = std::floor(x / step_width);
        const double m = level - step_levels * std::floor(level / step_levels);
        return depth + depth_spread * m / (step_levels - 1);
      }
      case SurfaceKind::kHeightfield:
        return depth + relief * detail::value_noise_2d(x / relief_wavelength,
                                                       y / relief_wavelength, seed ^ 0x5151);
    }
    return depth;
  }

  /// Texture intensity in [0, 255] at a surface point.
  double intensity(const Vec3& p) const {
    double sum = 0.0;
    double norm = 0.0;
    double amp = 1.0;
    double freq = 1.0 / (texture_scale * (1 << (octaves - 1)));
    for (int o = 0; o < octaves; ++o) {
      sum += amp * detail::value_noise(p * freq, seed + 977 * o);
      norm += amp;
      amp *= 0.6;
      freq *= 2.0;
    }
    // Value noise rarely exceeds half its range; stretch for contrast.
    const double v = 128.0 + 127.0 * contrast * std::clamp(2.0 * sum / norm, -1.0, 1.0);
    return std::clamp(v, 0.0, 255.0);
  }

  /// First intersection of the ray c + t dir (t > 0) with the surface.
  std::optional<Vec3> intersect(const Vec3& c, const Vec3& dir) const {
    if (!(dir.z() > 1e-12)) return std::nullopt;
    if (kind == SurfaceKind::kPlane) {
      const double t = (depth - c.z()) / dir.z();
      if (!(t > 0.0)) return std::nullopt;
      return c + t * dir;
    }
    // March in ray depth from z_min to z_max looking for the first sign
    // change of (ray z - surface z), then bisect.
    auto g = [&](double t) {
      const Vec3 p = c + t * dir;
      return p.z() - height(p.x(), p.y());
    };
    const double t0 = std::max((z_min() - c.z()) / dir.z(), 0.0);
    const double t1 = (z_max() - c.z()) / dir.z();
    if (!(t1 > 0.0)) return std::nullopt;
    const double span = z_max() - z_min();
    const double step_z = kind == SurfaceKind::kHeightfield
                              ? std::min(span / 64.0, relief_wavelength / 64.0)
                              : std::max(span / 256.0, 1e-6);
    const double dt = step_z / dir.z();
    double a = t0;
    double ga = g(a);
    if (ga >= 0.0) return c + a * dir;
    const int steps = static_cast<int>(std::ceil((t1 - t0) / dt)) + 1;
    for (int i = 1; i <= steps; ++i) {
      double b = std::min(t0 + i * dt, t1 + dt);
      const double gb = g(b);
      if (gb >= 0.0) {
        for (int k = 0; k < 60; ++k) {
          const double m = 0.5 * (a + b);
          if (g(m) >= 0.0) b = m; else a = m;
          if (b - a <= 1e-12 * b) break;
        }
        // b sits on or just past the surface; snap to the heightfield.
        Vec3 p = c + b * dir;
        if (kind != SurfaceKind::kSteps) p.z() = height(p.x(), p.y());
        return p;
      }
      a = b;
    }
    return std::nullopt;
  }
};

/// Rendered view with per-pixel ground truth.
struct RenderedView {
  GrayImage image;     // 8-bit intensities stored as float
  Image<float> depth;  // camera-frame Z through each pixel center; -inf on miss
};

struct RenderedPair {
  RenderedView left;
  RenderedView right;
  PointCloud truth;  // dense surface samples seen by the left view
};

namespace detail {

inline RenderedView render_view(const SyntheticScene& scene, const CameraView& view,
                                int supersample) {
  const Intrinsics& k = view.intrinsics;
  RenderedView out{GrayImage(k.width(), k.height(), 0.0f),
                   Image<float>(k.width(), k.height(), -std::numeric_limits<float>::infinity())};
  const Mat3 rt = view.pose.rotation().transpose();
  const Vec3 c = view.pose.center();
  parallel_for(0, k.height(), [&](int y) {
    for (int x = 0; x < k.width(); ++x) {
      double acc = 0.0;
      int hits = 0;
      for (int sy = 0; sy < supersample; ++sy) {
        for (int sx = 0; sx < supersample; ++sx) {
          const double px = x - 0.5 + (sx + 0.5) / supersample;
          const double py = y - 0.5 + (sy + 0.5) / supersample;
          const auto p = scene.intersect(c, rt * pixel_to_ray(k, px, py).vec());
          if (!p) continue;
          acc += scene.intensity(*p);
          ++hits;
        }
      }
      if (hits > 0) out.image(x, y) = static_cast<float>(std::round(acc / hits));
      if (const auto p = scene.intersect(c, rt * pixel_to_ray(k, x, y).vec()))
        out.depth(x, y) = static_cast<float>(view.pose.to_camera(*p).z());
    }
  });
  return out;
}

}  // namespace detail

/// Ray-cast rendering of both views with `supersample`^2 samples per pixel
/// averaged and rounded to 8-bit levels. The truth cloud holds surface
/// points under a `truth_density`^2 grid of sub-pixel rays of the left view.
inline RenderedPair render_pair(const SyntheticScene& scene, const CameraView& left,
                                const CameraView& right, int supersample = 2,
                                int truth_density = 2) {
  scene.validate();
  RenderedPair out{detail::render_view(scene, left, supersample),
                   detail::render_view(scene, right, supersample), {}};
  auto any_hit = [](const Image<float>& depth) {
    return std::any_of(depth.data().begin(), depth.data().end(),
                       [](float z) { return std::isfinite(z); });
  };
  if (!any_hit(out.left.depth) || !any_hit(out.right.depth))
    throw Error(ErrorCode::kSceneNotVisible, "scene not visible from both cameras");

  const Intrinsics& k = left.intrinsics;
  const Mat3 rt = left.pose.rotation().transpose();
  const int n = truth_density;
  std::vector<PointCloud> rows(static_cast<std::size_t>(k.height()));
  parallel_for(0, k.height(), [&](int y) {
    for (int x = 0; x < k.width(); ++x)
      for (int sy = 0; sy < n; ++sy)
        for (int sx = 0; sx < n; ++sx) {
          const double px = x - 0.5 + (sx + 0.5) / n;
          const double py = y - 0.5 + (sy + 0.5) / n;
          if (auto p = scene.intersect(left.pose.center(), rt * pixel_to_ray(k, px, py).vec()))
            rows[y].points.push_back(*p);
        }
  });
  for (const auto& r : rows) out.truth.append(r);
  return out;
}

/// Two identical cameras at (-b/2, 0, z) and (+b/2, 0, z), each turned
/// about the world Y axis by half the convergence angle toward the other so
/// that their principal rays meet at (0, 0, scene.depth). Zero convergence
/// gives canonical stereo at z = 0.
inline std::pair<CameraView, CameraView> make_oblique_pair(double convergence_deg,
                                                           double baseline_m,
                                                           const SyntheticScene& scene,
                                                           const Intrinsics& intrinsics) {
  if (!(convergence_deg >= 0.0 && convergence_deg <= 60.0))
    throw Error(ErrorCode::kInvalidArgument, "convergence must be within [0, 60] degrees");
  if (!(baseline_m > 0.0)) throw Error(ErrorCode::kInvalidArgument, "baseline must be positive");
  const double half = 0.5 * convergence_deg * std::numbers::pi / 180.0;
  const double z = half > 0.0 ? scene.depth - 0.5 * baseline_m / std::tan(half) : 0.0;
  // Camera-to-world rotations; world-to-camera is the transpose.
  const Mat3 left_c2w = axis_rotation(Vec3::UnitY(), half);
  const Mat3 right_c2w = axis_rotation(Vec3::UnitY(), -half);
  return {CameraView{intrinsics, CameraPose(left_c2w.transpose(), Vec3(-0.5 * baseline_m, 0, z))},
          CameraView{intrinsics, CameraPose(right_c2w.transpose(), Vec3(0.5 * baseline_m, 0, z))}};
}

}  // namespace epistereo

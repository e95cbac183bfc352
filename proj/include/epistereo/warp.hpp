#pragma once

#include <cmath>
#include <optional>

#include "epistereo/geometry.hpp"
#include "epistereo/image.hpp"

namespace epistereo {

/// Inverse warping: each output pixel (x, y) is filled from the source
/// coordinate source_of(x, y), bilinearly interpolated. Output pixels whose
/// source coordinate is undefined or falls outside the valid source area
/// get value 0 and mask 0. Rows are processed in parallel.
template <typename SourceOf>
MaskedImage inverse_warp(const GrayImage& src, const Mask* src_mask, int out_w, int out_h,
                         SourceOf&& source_of) {
  MaskedImage out{GrayImage(out_w, out_h, 0.0f), Mask(out_w, out_h, 0)};
  parallel_for(0, out_h, [&](int y) {
    float* dst = out.pixels.row(y);
    std::uint8_t* valid = out.mask.row(y);
    for (int x = 0; x < out_w; ++x) {
      const std::optional<Vec2> s = source_of(x, y);
      if (!s) continue;
      const std::optional<double> v = sample_bilinear(src, src_mask, s->x(), s->y());
      if (!v) continue;
      dst[x] = static_cast<float>(*v);
      valid[x] = 1;
    }
  });
  return out;
}

/// Per-channel bilinear warp of a color image; used only for point coloring.
template <typename SourceOf>
ColorImage inverse_warp_color(const ColorImage& src, int out_w, int out_h, SourceOf&& source_of) {
  ColorImage out(out_w, out_h);
  Image<float> channel[3] = {Image<float>(src.width(), src.height()),
                             Image<float>(src.width(), src.height()),
                             Image<float>(src.width(), src.height())};
  for (std::size_t i = 0; i < src.size(); ++i) {
    channel[0].data()[i] = src.data()[i].r;
    channel[1].data()[i] = src.data()[i].g;
    channel[2].data()[i] = src.data()[i].b;
  }
  parallel_for(0, out_h, [&](int y) {
    for (int x = 0; x < out_w; ++x) {
      const std::optional<Vec2> s = source_of(x, y);
      if (!s) continue;
      std::uint8_t c[3] = {0, 0, 0};
      for (int k = 0; k < 3; ++k) {
        const auto v = sample_bilinear(channel[k], nullptr, s->x(), s->y());
        if (!v) break;
        c[k] = static_cast<std::uint8_t>(std::clamp(std::lround(*v), 0L, 255L));
      }
      out(x, y) = {c[0], c[1], c[2]};
    }
  });
  return out;
}

/// Applies a 3x3 pixel homography to a point; nothing when the point maps to
/// infinity or behind the projective plane.
inline std::optional<Vec2> apply_homography(const Mat3& h, double x, double y) {
  const Vec3 p = h * Vec3(x, y, 1.0);
  if (!(p.z() > 1e-12)) return std::nullopt;
  return Vec2(p.x() / p.z(), p.y() / p.z());
}

}  // namespace epistereo

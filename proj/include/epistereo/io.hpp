#pragma once

#include <png.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "epistereo/disparity.hpp"
#include "epistereo/error.hpp"
#include "epistereo/geometry.hpp"
#include "epistereo/image.hpp"
#include "epistereo/rectify.hpp"
#include "epistereo/spherical.hpp"
#include "epistereo/triangulate.hpp"

namespace epistereo {

using Json = nlohmann::json;

// ---------------------------------------------------------------- PNG

namespace detail {

inline std::vector<std::uint8_t> read_png_raw(const std::string& path, std::uint32_t format,
                                              int& width, int& height) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw Error(ErrorCode::kIoError, "cannot read PNG " + path + ": " + img.message);
  img.format = format;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw Error(ErrorCode::kIoError, "cannot decode PNG " + path + ": " + img.message);
  }
  width = static_cast<int>(img.width);
  height = static_cast<int>(img.height);
  return buf;
}

inline void write_png_raw(const std::string& path, const std::uint8_t* data, int width, int height,
                          std::uint32_t format) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = format;
  if (!png_image_write_to_file(&img, path.c_str(), 0, data, 0, nullptr))
    throw Error(ErrorCode::kIoError, "cannot write PNG " + path + ": " + img.message);
}

}  // namespace detail

inline ColorImage read_png_color(const std::string& path) {
  int w = 0, h = 0;
  const auto raw = detail::read_png_raw(path, PNG_FORMAT_RGB, w, h);
  ColorImage out(w, h);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = {raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]};
  return out;
}

/// Gray intensities; color files are converted with the 0.299/0.587/0.114 luma weights.
inline GrayImage read_png_gray(const std::string& path) {
  return to_gray(read_png_color(path));
}

inline void write_png(const std::string& path, const GrayImage& img) {
  std::vector<std::uint8_t> raw(img.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    raw[i] = static_cast<std::uint8_t>(std::clamp(std::lround(img.data()[i]), 0L, 255L));
  detail::write_png_raw(path, raw.data(), img.width(), img.height(), PNG_FORMAT_GRAY);
}

inline void write_png(const std::string& path, const ColorImage& img) {
  std::vector<std::uint8_t> raw(3 * img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    raw[3 * i] = img.data()[i].r;
    raw[3 * i + 1] = img.data()[i].g;
    raw[3 * i + 2] = img.data()[i].b;
  }
  detail::write_png_raw(path, raw.data(), img.width(), img.height(), PNG_FORMAT_RGB);
}

/// Masks are stored as 0/255 gray PNGs.
inline void write_mask_png(const std::string& path, const Mask& mask) {
  std::vector<std::uint8_t> raw(mask.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = mask.data()[i] ? 255 : 0;
  detail::write_png_raw(path, raw.data(), mask.width(), mask.height(), PNG_FORMAT_GRAY);
}

inline Mask read_mask_png(const std::string& path) {
  int w = 0, h = 0;
  const auto raw = detail::read_png_raw(path, PNG_FORMAT_GRAY, w, h);
  Mask out(w, h);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = raw[i] >= 128 ? 1 : 0;
  return out;
}

/// 8-bit rendering of a disparity map scaled over [lo, hi]; invalid is black.
inline GrayImage visualize_disparity(const DisparityMap& disp, double lo, double hi) {
  GrayImage out(disp.width(), disp.height(), 0.0f);
  const double span = hi > lo ? hi - lo : 1.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const float d = disp.values.data()[i];
    if (!DisparityMap::is_valid(d)) continue;
    out.data()[i] = static_cast<float>(1.0 + 254.0 * std::clamp((d - lo) / span, 0.0, 1.0));
  }
  return out;
}

// ---------------------------------------------------------------- PFM

/// Single-channel little-endian PFM ("Pf", scale -1). Rows are stored
/// bottom-to-top as the format prescribes.
inline void write_pfm(const std::string& path, const Image<float>& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path + " for writing");
  out << "Pf\n" << img.width() << " " << img.height() << "\n-1.0\n";
  for (int y = img.height() - 1; y >= 0; --y)
    out.write(reinterpret_cast<const char*>(img.row(y)),
              static_cast<std::streamsize>(sizeof(float) * img.width()));
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path);
}

inline Image<float> read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  in.get();
  if (!in || magic != "Pf" || w <= 0 || h <= 0)
    throw Error(ErrorCode::kMalformedFile, "not a single-channel PFM: " + path);
  if (scale > 0.0) throw Error(ErrorCode::kMalformedFile, "big-endian PFM not supported");
  Image<float> img(w, h);
  for (int y = h - 1; y >= 0; --y)
    in.read(reinterpret_cast<char*>(img.row(y)), static_cast<std::streamsize>(sizeof(float) * w));
  if (!in) throw Error(ErrorCode::kMalformedFile, "truncated PFM: " + path);
  return img;
}

// ---------------------------------------------------------------- JSON

namespace detail {

inline Json mat_to_json(const Mat3& m) {
  Json a = Json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  return a;
}

inline Mat3 json_to_mat(const Json& j) {
  if (!j.is_array() || j.size() != 9) throw Error(ErrorCode::kMalformedFile, "expected 9 numbers");
  Mat3 m;
  for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = j.at(i).get<double>();
  return m;
}

inline Json vec_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Vec3 json_to_vec(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::kMalformedFile, "expected 3 numbers");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kMalformedFile, path + ": " + e.what());
  }
}

}  // namespace detail

/// Writes `j` with full double precision (nlohmann emits shortest round-trip form).
inline void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
}

inline Json camera_to_json(const CameraView& v) {
  return {{"focal_px", v.intrinsics.f()},
          {"width", v.intrinsics.width()},
          {"height", v.intrinsics.height()},
          {"rotation", detail::mat_to_json(v.pose.rotation())},
          {"center", detail::vec_to_json(v.pose.center())}};
}

inline CameraView camera_from_json(const Json& j) {
  try {
    return {Intrinsics(j.at("focal_px").get<double>(), j.at("width").get<int>(),
                       j.at("height").get<int>()),
            CameraPose(detail::json_to_mat(j.at("rotation")), detail::json_to_vec(j.at("center")))};
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kMalformedFile, std::string("camera: ") + e.what());
  }
}

/// Camera pair file: {"left": camera, "right": camera}.
inline std::pair<CameraView, CameraView> read_camera_pair(const std::string& path) {
  const Json j = detail::read_json_file(path);
  if (!j.contains("left") || !j.contains("right"))
    throw Error(ErrorCode::kMalformedFile, path + ": needs \"left\" and \"right\" cameras");
  return {camera_from_json(j.at("left")), camera_from_json(j.at("right"))};
}

inline void write_camera_pair(const std::string& path, const CameraView& left,
                              const CameraView& right) {
  write_json_file(path, {{"left", camera_to_json(left)}, {"right", camera_to_json(right)}});
}

inline Json grid_to_json(const SphericalGrid& g) {
  return {{"s", g.s},           {"out_w", g.out_w},   {"out_h", g.out_h},
          {"u0", g.u0},         {"v0", g.v0},         {"lambda_max", g.lambda_max},
          {"phi_max", g.phi_max}};
}

inline SphericalGrid grid_from_json(const Json& j) {
  SphericalGrid g;
  g.s = j.at("s").get<double>();
  g.out_w = j.at("out_w").get<int>();
  g.out_h = j.at("out_h").get<int>();
  g.u0 = j.at("u0").get<double>();
  g.v0 = j.at("v0").get<double>();
  g.lambda_max = j.at("lambda_max").get<double>();
  g.phi_max = j.at("phi_max").get<double>();
  if (!(g.s > 0.0) || g.out_w < 2 || g.out_h < 2)
    throw Error(ErrorCode::kMalformedFile, "invalid spherical grid");
  return g;
}

/// Rectification sidecar; doubles as the triangulation geometry file.
inline Json geometry_to_json(const StereoGeometry& geom, const HomographyPair* homographies) {
  Json j = {{"mode", geom.grid ? "spherical" : "frame"},
            {"rotation", detail::mat_to_json(geom.frame.rotation)},
            {"principal_sum", detail::vec_to_json(geom.frame.principal_sum)},
            {"baseline", geom.frame.baseline},
            {"left_center", detail::vec_to_json(geom.frame.left_center)},
            {"focal_px", geom.rectified.f()},
            {"width", geom.rectified.width()},
            {"height", geom.rectified.height()},
            {"max_depth", geom.max_depth}};
  if (homographies) {
    j["H_left"] = detail::mat_to_json(homographies->left);
    j["H_right"] = detail::mat_to_json(homographies->right);
    j["extent_offset"] = {homographies->extent_offset.x(), homographies->extent_offset.y()};
  }
  if (geom.grid) j["grid"] = grid_to_json(*geom.grid);
  return j;
}

inline StereoGeometry geometry_from_json(const Json& j) {
  try {
    StereoGeometry g;
    g.frame.rotation = detail::json_to_mat(j.at("rotation"));
    if (j.contains("principal_sum")) g.frame.principal_sum = detail::json_to_vec(j.at("principal_sum"));
    g.frame.baseline = j.at("baseline").get<double>();
    g.frame.left_center = detail::json_to_vec(j.at("left_center"));
    g.rectified = Intrinsics(j.at("focal_px").get<double>(), j.at("width").get<int>(),
                             j.at("height").get<int>());
    if (j.contains("max_depth")) g.max_depth = j.at("max_depth").get<double>();
    if (j.contains("grid")) g.grid = grid_from_json(j.at("grid"));
    if (!(g.frame.baseline > 0.0)) throw Error(ErrorCode::kMalformedFile, "baseline must be > 0");
    return g;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kMalformedFile, std::string("geometry: ") + e.what());
  }
}

inline StereoGeometry read_geometry(const std::string& path) {
  return geometry_from_json(detail::read_json_file(path));
}

}  // namespace epistereo

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "epistereo/error.hpp"
#include "epistereo/geometry.hpp"
#include "epistereo/image.hpp"

namespace epistereo {

/// World-frame points in meters, optionally colored (colors empty or one
/// per point).
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Rgb> colors;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_colors() const { return !colors.empty(); }

  void append(const PointCloud& other) {
    const bool keep_colors = (empty() || has_colors()) && other.has_colors();
    if (!keep_colors) colors.clear();
    points.insert(points.end(), other.points.begin(), other.points.end());
    if (keep_colors) colors.insert(colors.end(), other.colors.begin(), other.colors.end());
  }
};

/// Binary little-endian PLY with float32 x, y, z and optional uchar
/// red, green, blue per vertex.
inline void write_ply(const PointCloud& cloud, const std::string& path) {
  if (cloud.has_colors() && cloud.colors.size() != cloud.points.size())
    throw Error(ErrorCode::kInvalidArgument, "color count differs from point count");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path + " for writing");
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n";
  if (cloud.has_colors())
    out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";

  const std::size_t stride = 12 + (cloud.has_colors() ? 3 : 0);
  std::vector<char> buf(stride * cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    char* p = buf.data() + i * stride;
    const float xyz[3] = {static_cast<float>(cloud.points[i].x()),
                          static_cast<float>(cloud.points[i].y()),
                          static_cast<float>(cloud.points[i].z())};
    std::memcpy(p, xyz, 12);  // little-endian host assumed
    if (cloud.has_colors()) {
      p[12] = static_cast<char>(cloud.colors[i].r);
      p[13] = static_cast<char>(cloud.colors[i].g);
      p[14] = static_cast<char>(cloud.colors[i].b);
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path);
}

/// Reads clouds written by write_ply. Only the vertex element with float
/// x/y/z and optional uchar red/green/blue is understood.
inline PointCloud read_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "ply") throw Error(ErrorCode::kMalformedPly, "missing magic");
  std::size_t count = 0;
  bool has_count = false;
  std::vector<std::string> props;
  bool binary_le = false;
  while (std::getline(in, line)) {
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      binary_le = fmt == "binary_little_endian";
    } else if (kw == "element") {
      std::string name;
      ls >> name >> count;
      if (name != "vertex" || ls.fail())
        throw Error(ErrorCode::kMalformedPly, "unsupported element: " + line);
      has_count = true;
    } else if (kw == "property") {
      std::string type, name;
      ls >> type >> name;
      props.push_back(type + " " + name);
    } else if (kw != "comment" && kw != "obj_info") {
      throw Error(ErrorCode::kMalformedPly, "unexpected header line: " + line);
    }
  }
  if (line != "end_header" || !binary_le || !has_count)
    throw Error(ErrorCode::kMalformedPly, "incomplete or non-binary header");
  const std::vector<std::string> xyz = {"float x", "float y", "float z"};
  const std::vector<std::string> rgb = {"float x", "float y", "float z", "uchar red",
                                        "uchar green", "uchar blue"};
  const bool colored = props == rgb;
  if (!colored && props != xyz) throw Error(ErrorCode::kMalformedPly, "unsupported properties");

  const std::size_t stride = colored ? 15 : 12;
  std::vector<char> buf(stride * count);
  in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size())
    throw Error(ErrorCode::kMalformedPly, "truncated vertex data");

  PointCloud cloud;
  cloud.points.resize(count);
  if (colored) cloud.colors.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const char* p = buf.data() + i * stride;
    float v[3];
    std::memcpy(v, p, 12);
    cloud.points[i] = Vec3(v[0], v[1], v[2]);
    if (colored)
      cloud.colors[i] = {static_cast<std::uint8_t>(p[12]), static_cast<std::uint8_t>(p[13]),
                         static_cast<std::uint8_t>(p[14])};
  }
  return cloud;
}

}  // namespace epistereo

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include "test_support.hpp"

using namespace epistereo;
using namespace epistereo::testing;

namespace {

StereoGeometry canonical_geometry(double b, double f, int w, int h) {
  StereoGeometry g;
  g.frame.baseline = b;
  g.rectified = Intrinsics(f, w, h);
  return g;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::path(::testing::TempDir()) / name).string();
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Rectified-frame ray through a spherical pixel, written out from the angle
// definitions: column/row undo the clockwise turn, (lambda, phi) give the
// ray with X and Y exchanged.
Vec3 sphere_ray(const SphericalGrid& g, double col, double row) {
  const double k = g.s / (2.0 * std::numbers::pi);
  const double u = row;
  const double v = (g.out_w - 1) - col;
  const double lambda = (u - g.u0) / k;
  const double phi = (v - g.v0) / k;
  return {-std::sin(phi), std::sin(lambda) * std::cos(phi), std::cos(lambda) * std::cos(phi)};
}

// Midpoint of the shortest segment between two rays.
Vec3 ray_midpoint(const Vec3& o1, const Vec3& d1, const Vec3& o2, const Vec3& d2) {
  const Vec3 w = o1 - o2;
  const double a = d1.dot(d1), b = d1.dot(d2), c = d2.dot(d2), d = d1.dot(w), e = d2.dot(w);
  const double den = a * c - b * b;
  const double s = (b * e - c * d) / den;
  const double t = (a * e - b * d) / den;
  return 0.5 * ((o1 + s * d1) + (o2 + t * d2));
}

}  // namespace

TEST(DisparityToDepth, Examples) {
  const StereoGeometry g = canonical_geometry(1.0, 1000.0, 100, 100);
  EXPECT_DOUBLE_EQ(disparity_to_depth(g, 100.0), 10.0);
  EXPECT_DOUBLE_EQ(disparity_to_depth(g, 50.0), 20.0);
  EXPECT_DOUBLE_EQ(disparity_to_depth(canonical_geometry(0.25, 800.0, 10, 10), 4.0), 50.0);
}

TEST(DisparityToDepth, NonPositive) {
  const StereoGeometry g = canonical_geometry(1.0, 1000.0, 100, 100);
  for (double d : {0.0, -3.0, 0.05}) {
    try {
      disparity_to_depth(g, d);
      FAIL() << d;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kNonPositiveDisparity);
    }
  }
  EXPECT_FALSE(triangulate_frame_pixel(g, 5, 5, 0.0));
}

TEST(FrameCloud, CanonicalPlane) {
  const StereoGeometry g = canonical_geometry(1.0, 1000.0, 64, 48);
  DisparityMap d(64, 48);
  for (float& v : d.values.data()) v = 100.0f;
  d.values(3, 3) = DisparityMap::kInvalid;
  const PointCloud c = frame_disparity_cloud(d, g);
  ASSERT_EQ(c.size(), 64u * 48u - 1u);
  for (const Vec3& p : c.points) EXPECT_NEAR(p.z(), 10.0, 1e-12);
  // First point is pixel (0, 0).
  EXPECT_NEAR(c.points[0].x(), -32.0 * 10.0 / 1000.0, 1e-12);
  EXPECT_NEAR(c.points[0].y(), -24.0 * 10.0 / 1000.0, 1e-12);
}

TEST(FrameCloud, InvertsProjection) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    StereoGeometry g = canonical_geometry(0.3 + u(rng) * 0.2 + 0.2, 700.0, 640, 480);
    g.frame.rotation = random_rotation(rng);
    g.frame.left_center = Vec3(u(rng), u(rng), u(rng)) * 5.0;
    const Vec3 rect(u(rng) * 3.0, u(rng) * 2.0, 6.0 + 4.0 * u(rng));
    const Vec3 world = g.frame.left_center + g.frame.rotation.transpose() * rect;
    const double x = g.rectified.cx() + g.focal() * rect.x() / rect.z();
    const double y = g.rectified.cy() + g.focal() * rect.y() / rect.z();
    const double d = g.baseline() * g.focal() / rect.z();
    const auto p = triangulate_frame_pixel(g, x, y, d);
    ASSERT_TRUE(p);
    EXPECT_LT((*p - world).norm(), 1e-9);
  }
}

TEST(FrameCloud, CarriesColors) {
  const StereoGeometry g = canonical_geometry(1.0, 100.0, 4, 2);
  DisparityMap d(4, 2);
  d.values(1, 0) = 10.0f;
  d.values(2, 1) = 20.0f;
  ColorImage colors(4, 2, Rgb{1, 2, 3});
  colors(2, 1) = Rgb{9, 8, 7};
  const PointCloud c = frame_disparity_cloud(d, g, &colors);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.colors[1], (Rgb{9, 8, 7}));
  const ColorImage wrong(3, 2);
  EXPECT_THROW(frame_disparity_cloud(d, g, &wrong), Error);
}

TEST(SphericalCloud, MatchesTwoRayMidpoint) {
  StereoGeometry g = canonical_geometry(0.8, 500.0, 320, 240);
  g.grid = make_spherical_grid(g.rectified);
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> ucol(0.3 * g.grid->out_w, 0.8 * g.grid->out_w);
  std::uniform_real_distribution<double> urow(0.3 * g.grid->out_h, 0.7 * g.grid->out_h);
  std::uniform_real_distribution<double> ud(5.0, 80.0);
  int checked = 0;
  for (int i = 0; i < 500; ++i) {
    const double col = ucol(rng);
    const double row = urow(rng);
    const double ds = ud(rng);
    const auto p = triangulate_spherical_pixel(g, col, row, ds);
    const Vec3 dl = sphere_ray(*g.grid, col, row);
    const Vec3 dr = sphere_ray(*g.grid, col - ds, row);
    if (!p) continue;
    const Vec3 m = ray_midpoint(Vec3::Zero(), dl, Vec3(g.baseline(), 0, 0), dr);
    EXPECT_LT((*p - m).norm(), 1e-6 * std::max(1.0, m.norm()));
    ++checked;
  }
  EXPECT_GT(checked, 400);
}

TEST(SphericalCloud, ZeroDisparityIsEmpty) {
  StereoGeometry g = canonical_geometry(1.0, 300.0, 64, 64);
  g.grid = make_spherical_grid(g.rectified);
  DisparityMap d(g.grid->out_w, g.grid->out_h, DisparitySpace::kSpherical);
  for (float& v : d.values.data()) v = 0.0f;
  EXPECT_TRUE(spherical_disparity_cloud(d, g).empty());
  EXPECT_THROW(frame_disparity_cloud(d, g), Error);
  g.grid.reset();
  EXPECT_THROW(spherical_disparity_cloud(d, g), Error);
}

TEST(Ply, EmptyRoundTrip) {
  const std::string path = temp_path("empty.ply");
  write_ply(PointCloud{}, path);
  EXPECT_TRUE(read_ply(path).empty());
}

TEST(Ply, ColoredRoundTripIsByteExact) {
  PointCloud c;
  c.points = {{0.5, -1.25, 3.0}, {1e-3, 2e3, -7.5}, {0, 0, 0}};
  c.colors = {{255, 0, 1}, {2, 128, 64}, {9, 9, 9}};
  const std::string a = temp_path("three.ply");
  const std::string b = temp_path("three_again.ply");
  write_ply(c, a);
  const PointCloud r = read_ply(a);
  ASSERT_EQ(r.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(r.points[i], c.points[i].cast<float>().cast<double>());
    EXPECT_EQ(r.colors[i], c.colors[i]);
  }
  write_ply(r, b);
  EXPECT_EQ(file_bytes(a), file_bytes(b));
  EXPECT_EQ(file_bytes(a).size(), file_bytes(a).find("end_header\n") + 11 + 3 * 15);
}

TEST(Ply, LargeRoundTrip) {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<float> u(-100.0f, 100.0f);
  PointCloud c;
  for (int i = 0; i < 100000; ++i) c.points.emplace_back(u(rng), u(rng), u(rng));
  const std::string a = temp_path("large.ply");
  const std::string b = temp_path("large_again.ply");
  write_ply(c, a);
  const PointCloud r = read_ply(a);
  ASSERT_EQ(r.size(), c.size());
  EXPECT_FALSE(r.has_colors());
  for (std::size_t i = 0; i < c.size(); ++i) ASSERT_EQ(r.points[i], c.points[i]);
  write_ply(r, b);
  EXPECT_EQ(file_bytes(a), file_bytes(b));
}

TEST(Ply, Malformed) {
  const std::string path = temp_path("bad.ply");
  auto expect_malformed = [&](const std::string& content) {
    std::ofstream(path, std::ios::binary) << content;
    try {
      read_ply(path);
      FAIL() << content;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kMalformedPly);
    }
  };
  expect_malformed("plx\n");
  expect_malformed("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
                   "property float z\nend_header\n0 0 0\n");
  expect_malformed("ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\n"
                   "property float y\nproperty float z\nend_header\n012345678901");
  EXPECT_THROW(read_ply(temp_path("missing.ply")), Error);
}

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "test_support.hpp"

using namespace epistereo;
using namespace epistereo::testing;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / ("epistereo_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Small ramp pair written to `dir`; returns the rectified depth bounds.
std::pair<double, double> small_ramp(const std::string& dir, std::uint64_t seed) {
  SyntheticScene s;
  s.kind = SurfaceKind::kRamp;
  s.seed = seed;
  const auto [l, r] = make_oblique_pair(0.0, 1.2, s, Intrinsics(250.0, 160, 128));
  const RenderedPair p = write_synthetic_pair(dir, s, l, r);
  return rectified_depth_bounds(p.truth, l, r);
}

PipelineConfig parse_text(const std::string& text, const fs::path& base = {}) {
  std::istringstream in(text);
  return parse_config(in, base);
}

int run_cli(const std::string& args) {
  const char* cli = std::getenv("EPISTEREO_CLI");
  const std::string cmd = std::string(cli) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, ParsesKeysAndPairs) {
  const PipelineConfig c = parse_text(
      "# comment\n"
      "mode = spherical\n"
      "z_min = 2.5   # trailing comment\n"
      "z_max = 40\n"
      "extent = bbox\n"
      "p1 = 8\n"
      "p2 = 96\n"
      "jobs = 3\n"
      "max_dist = 0.5\n"
      "pair.a.left = l.png\n"
      "pair.a.right = r.png\n"
      "pair.a.cameras = cams.json\n"
      "pair.b.left = /abs/l.png\n",
      "/data");
  EXPECT_EQ(c.mode, PipelineMode::kSpherical);
  EXPECT_EQ(c.z_min, 2.5);
  EXPECT_EQ(c.z_max, 40.0);
  EXPECT_EQ(c.extent, ExtentMode::kBoundingBox);
  EXPECT_EQ(c.sgm.p1, 8);
  EXPECT_EQ(c.sgm.p2, 96);
  EXPECT_EQ(c.jobs, 3);
  EXPECT_EQ(*c.max_dist, 0.5);
  ASSERT_EQ(c.pairs.size(), 2u);
  EXPECT_EQ(c.pairs[0].name, "a");
  EXPECT_EQ(c.pairs[0].left, "/data/l.png");
  EXPECT_EQ(c.pairs[0].cameras, "/data/cams.json");
  EXPECT_EQ(c.pairs[1].left, "/abs/l.png");
}

TEST(Config, DefaultsTextRoundTrips) {
  const PipelineConfig c = parse_text(default_config_text());
  const PipelineConfig d;
  EXPECT_EQ(c.mode, d.mode);
  EXPECT_EQ(c.z_min, d.z_min);
  EXPECT_EQ(c.z_max, d.z_max);
  EXPECT_EQ(c.sgm.p1, d.sgm.p1);
  EXPECT_EQ(c.sgm.p2, d.sgm.p2);
  EXPECT_EQ(c.sgm.num_paths, d.sgm.num_paths);
  EXPECT_EQ(c.sgm.uniqueness_ratio, d.sgm.uniqueness_ratio);
  EXPECT_TRUE(c.pairs.empty());
  EXPECT_FALSE(c.max_dist);
}

TEST(Config, RejectsBadInput) {
  for (const char* text : {"bogus = 1\n", "z_min = abc\n", "extent = wide\n", "pair.x.depth = a\n",
                           "no equals sign\n"}) {
    try {
      parse_text(text);
      FAIL() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kValidation) << text;
    }
  }
}

TEST(Config, MissingFilesFailValidation) {
  PipelineConfig c = parse_text("pair.a.left = nope.png\npair.a.right = nope.png\n"
                                "pair.a.cameras = nope.json\n");
  try {
    c.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
  }
  try {
    load_config("/nonexistent/pipeline.cfg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
  }
  c.pairs.clear();
  EXPECT_THROW(c.validate(), Error);
}

TEST(DisparityRange, FromDepthBounds) {
  StereoGeometry g;
  g.frame.baseline = 1.0;
  g.rectified = Intrinsics(1000.0, 100, 100);
  EXPECT_EQ(derive_disparity_range(g, 5.0, 20.0), (DisparityRange{50, 200}));
  EXPECT_EQ(derive_disparity_range(g, 5.0, 20.0, 3), (DisparityRange{47, 203}));
  EXPECT_EQ(derive_disparity_range(g, 3.0, 7.0), (DisparityRange{142, 334}));
  EXPECT_EQ(derive_disparity_range(g, 1.0, 1e6, 5).min, 0);
  for (auto [lo, hi] : {std::pair{5.0, std::numeric_limits<double>::infinity()},
                        std::pair{0.0, 10.0}, std::pair{10.0, 5.0}}) {
    try {
      derive_disparity_range(g, lo, hi);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidDepthBounds);
    }
  }
}

TEST(DisparityRange, SphericalCoversSampledCorrespondences) {
  StereoGeometry g;
  g.frame.baseline = 0.5;
  g.rectified = Intrinsics(300.0, 200, 160);
  g.grid = make_spherical_grid(g.rectified);
  const DisparityRange r = derive_spherical_disparity_range(g, 4.0, 16.0, 0, 1);
  // Disparities of random visible points between the depth bounds.
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> ux(0.0, 199.0), uy(0.0, 159.0), uz(4.0, 16.0);
  for (int i = 0; i < 2000; ++i) {
    const double x = ux(rng), y = uy(rng), z = uz(rng);
    const double xr = x - 0.5 * 300.0 / z;
    if (xr < 0.0) continue;
    const Vec2 l = frame_to_sphere_pixel(*g.grid, g.rectified, x, y);
    const Vec2 rr = frame_to_sphere_pixel(*g.grid, g.rectified, xr, y);
    const double ds = l.x() - rr.x();
    EXPECT_GE(ds, r.min - 1.0);
    EXPECT_LE(ds, r.max + 1.0);
  }
}

TEST(DisparityRange, ContainsRenderedTruth) {
  SyntheticScene s;
  s.kind = SurfaceKind::kHeightfield;
  const Intrinsics k(250.0, 160, 128);
  const auto [l, r] = make_oblique_pair(35.0, 2.0 * 10.0 * std::sin(17.5 * kDeg), s, k);
  const RenderedPair p = render_pair(s, l, r, 1, 1);
  const RectifiedPair rect = rectify_pair(l, p.left.image, r, p.right.image, ExtentMode::kBoundingBox);
  StereoGeometry g;
  g.frame = rect.frame;
  g.rectified = rect.homographies.intrinsics;
  g.grid = make_spherical_grid(g.rectified);
  const auto [zlo, zhi] = rectified_depth_bounds(p.truth, l, r);
  const DisparityRange fr = derive_disparity_range(g, zlo, zhi);
  const DisparityRange sr = derive_spherical_disparity_range(g, zlo, zhi);
  int checked = 0;
  for (const Vec3& x : p.truth.points) {
    const Vec2 pl = project_point(l, x);
    const Vec2 pr = project_point(r, x);
    const auto ql = apply_homography(rect.homographies.left, pl.x(), pl.y());
    const auto qr = apply_homography(rect.homographies.right, pr.x(), pr.y());
    ASSERT_TRUE(ql && qr);
    const double d = ql->x() - qr->x();
    EXPECT_GE(d, fr.min);
    EXPECT_LE(d, fr.max);
    const Vec2 sl = frame_to_sphere_pixel(*g.grid, g.rectified, ql->x(), ql->y());
    const Vec2 srp = frame_to_sphere_pixel(*g.grid, g.rectified, qr->x(), qr->y());
    EXPECT_GE(sl.x() - srp.x(), sr.min);
    EXPECT_LE(sl.x() - srp.x(), sr.max);
    ++checked;
  }
  EXPECT_EQ(checked, 160 * 128);
}

TEST(Pipeline, CanonicalSmoke) {
  const std::string dir = temp_dir("smoke");
  const auto [zlo, zhi] = small_ramp(dir, 5);
  std::ostringstream cfg;
  cfg << "z_min = " << 0.9 * zlo << "\nz_max = " << 1.1 * zhi << "\nout_dir = out\n"
      << "reference = truth.ply\npair.p.left = left.png\npair.p.right = right.png\n"
      << "pair.p.cameras = cameras.json\n";
  const PipelineConfig c = parse_text(cfg.str(), dir);
  std::ostringstream log;
  const PipelineResult r = run_pipeline(c, log);
  const fs::path out = fs::path(dir) / "out";
  for (const char* f : {"p_frame.ply", "p_spherical.ply", "merged_frame.ply", "merged_spherical.ply",
                        "report.json", "summary.json"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  EXPECT_GT(r.merged_frame.size(), 5000u);
  EXPECT_GT(r.merged_spherical.size(), 5000u);
  const Json report = detail::read_json_file((out / "report.json").string());
  EXPECT_EQ(report["frame_points"].get<std::size_t>(), r.merged_frame.size());
  EXPECT_EQ(report["completeness"]["count_b"].get<std::size_t>(), r.merged_frame.size());
  EXPECT_LT(report["frame_accuracy"]["mean_abs_dist"].get<double>(), 0.1);
  EXPECT_LT(report["spherical_accuracy"]["mean_abs_dist"].get<double>(), 0.1);
  EXPECT_EQ(read_ply((out / "merged_frame.ply").string()).size(), r.merged_frame.size());
  EXPECT_NE(log.str().find("frame points"), std::string::npos);
}

TEST(Pipeline, FailedPairIsSkipped) {
  const std::string dir = temp_dir("skip");
  small_ramp(dir, 6);
  std::ofstream(fs::path(dir) / "broken.png") << "not a png";
  const PipelineConfig c = parse_text(
      "mode = frame\nz_min = 4\nz_max = 20\n"
      "pair.good.left = left.png\npair.good.right = right.png\npair.good.cameras = cameras.json\n"
      "pair.bad.left = broken.png\npair.bad.right = right.png\npair.bad.cameras = cameras.json\n",
      dir);
  std::ostringstream log;
  const PipelineResult r = run_pipeline(c, log);
  EXPECT_TRUE(r.pairs[0].error.empty());
  EXPECT_FALSE(r.pairs[1].error.empty());
  EXPECT_TRUE(r.report["pairs"][1].contains("error"));
  EXPECT_NE(log.str().find("[pair bad] failed"), std::string::npos);
}

TEST(Pipeline, JobsDoNotChangeOutput) {
  const std::string dir = temp_dir("jobs");
  small_ramp((fs::path(dir) / "a").string(), 7);
  small_ramp((fs::path(dir) / "b").string(), 8);
  auto run = [&](int jobs) {
    std::ostringstream cfg;
    cfg << "z_min = 4\nz_max = 20\nout_dir = out" << jobs << "\njobs = " << jobs << "\n";
    for (const char* n : {"a", "b"})
      cfg << "pair." << n << ".left = " << n << "/left.png\npair." << n << ".right = " << n
          << "/right.png\npair." << n << ".cameras = " << n << "/cameras.json\n";
    std::ostringstream log;
    run_pipeline(parse_text(cfg.str(), dir), log);
    return fs::path(dir) / ("out" + std::to_string(jobs));
  };
  const fs::path one = run(1);
  const fs::path two = run(2);
  for (const char* f : {"merged_frame.ply", "merged_spherical.ply", "report.json", "a_frame.ply",
                        "b_spherical.ply"})
    EXPECT_EQ(file_bytes(one / f), file_bytes(two / f)) << f;
}

TEST(Cli, ExitCodes) {
  if (!std::getenv("EPISTEREO_CLI")) GTEST_SKIP() << "EPISTEREO_CLI not set";
  const std::string dir = temp_dir("cli");
  EXPECT_EQ(run_cli("--no-such-flag"), 1);
  EXPECT_EQ(run_cli("pipeline " + dir + "/missing.cfg"), 1);
  EXPECT_EQ(run_cli("synth --convergence 75 --out " + dir), 1);
  EXPECT_EQ(run_cli("eval --test " + dir + "/a.ply --ref " + dir + "/b.ply"), 1);
  std::ofstream(fs::path(dir) / "bad.ply") << "ply\nformat ascii 1.0\n";
  EXPECT_EQ(run_cli("eval --test " + dir + "/bad.ply --ref " + dir + "/bad.ply"), 2);
  EXPECT_EQ(run_cli("pipeline --print-defaults"), 0);
  EXPECT_EQ(run_cli("synth --scene plane --width 96 --height 80 --focal 200 --out " + dir + "/s"), 0);
  EXPECT_EQ(run_cli("pipeline " + dir + "/s/pipeline.cfg"), 0);
  EXPECT_TRUE(fs::exists(fs::path(dir) / "s" / "out" / "report.json"));
  EXPECT_EQ(run_cli("eval --test " + dir + "/s/truth.ply --ref " + dir + "/s/truth.ply --out " + dir +
                    "/e.json"),
            0);
  const Json e = detail::read_json_file(dir + "/e.json");
  EXPECT_EQ(e["mean_abs_dist"].get<double>(), 0.0);
}

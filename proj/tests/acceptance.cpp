// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails. Usage: acceptance [work_dir]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <sstream>

#include "sgm_reference.hpp"
#include "test_support.hpp"

using namespace epistereo;
using namespace epistereo::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path g_work;

fs::path fresh_dir(const std::string& name) {
  const fs::path p = g_work / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// ------------------------------------------------------------------ 1, 2

constexpr int kAlignPairs = 20;
constexpr int kAlignPoints = 100;
constexpr double kAlignTol = 0.5;

struct AlignmentStats {
  double frame_max = 0.0;
  double sphere_max = 0.0;
  int frame_ok = 0;
  int sphere_ok = 0;
  int samples = 0;
  double seconds = 0.0;
};

const AlignmentStats& alignment_stats() {
  static const AlignmentStats stats = [] {
    AlignmentStats s;
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    const Intrinsics k(800.0, 640, 480);
    for (int i = 0; i < kAlignPairs; ++i) {
      const double conv = 40.0 * (i + 1) / kAlignPairs;
      const auto [l, r] = random_pair(rng, conv, k);
      const HomographyPair h = compute_homographies(l, r, build_rectifying_rotation(l.pose, r.pose),
                                                    ExtentMode::kBoundingBox);
      const SphericalGrid grid = make_spherical_grid(h.intrinsics);
      for (int j = 0; j < kAlignPoints; ++j) {
        ++s.samples;
        const auto p = random_visible_point(rng, l, r);
        if (!p) continue;
        const Vec2 pl = project_point(l, *p);
        const Vec2 pr = project_point(r, *p);
        const auto ql = apply_homography(h.left, pl.x(), pl.y());
        const auto qr = apply_homography(h.right, pr.x(), pr.y());
        if (!ql || !qr) continue;
        const double fr = std::abs(ql->y() - qr->y());
        s.frame_max = std::max(s.frame_max, fr);
        s.frame_ok += fr <= kAlignTol;
        try {
          const Vec2 sl = frame_to_sphere_pixel(grid, h.intrinsics, ql->x(), ql->y());
          const Vec2 sr = frame_to_sphere_pixel(grid, h.intrinsics, qr->x(), qr->y());
          const double sp = std::abs(sl.y() - sr.y());
          s.sphere_max = std::max(s.sphere_max, sp);
          s.sphere_ok += sp <= kAlignTol;
        } catch (const Error&) {
        }
      }
    }
    s.seconds = seconds_since(t0);
    return s;
  }();
  return stats;
}

Outcome criterion_frame_alignment() {
  const AlignmentStats& s = alignment_stats();
  return {s.frame_ok == s.samples && s.seconds < 5.0,
          fmt("%d/%d samples with |dy| <= %.1f px, max %.2e px, %.2f s (limit 5 s)", s.frame_ok,
              s.samples, kAlignTol, s.frame_max, s.seconds)};
}

Outcome criterion_sphere_alignment() {
  const AlignmentStats& s = alignment_stats();
  return {s.sphere_ok == s.samples,
          fmt("%d/%d samples with |drow| <= %.1f px, max %.2e px", s.sphere_ok, s.samples, kAlignTol,
              s.sphere_max)};
}

// ------------------------------------------------------------------ 3

Outcome criterion_round_trips() {
  constexpr int kSamples = 10000;
  constexpr double kPixelTol = 1e-9;
  constexpr double kAngleTol = 1e-12;
  std::mt19937_64 rng(3);
  const Intrinsics k(500.0, 512, 512);
  const SphericalGrid grid = make_spherical_grid(k);
  std::uniform_real_distribution<double> ux(8.0, 503.0);
  double pix = 0.0;
  for (int i = 0; i < kSamples; ++i) {
    const double x = ux(rng);
    const double y = ux(rng);
    const Vec2 s = frame_to_sphere_pixel(grid, k, x, y);
    const Vec2 b = sphere_pixel_to_frame(grid, k, s.x(), s.y());
    pix = std::max({pix, std::abs(b.x() - x), std::abs(b.y() - y)});
  }
  std::uniform_real_distribution<double> ul(-1.4, 1.4);
  std::uniform_real_distribution<double> up(-80.0 * kDeg, 80.0 * kDeg);
  double ang = 0.0;
  for (int i = 0; i < kSamples; ++i) {
    const double lambda = ul(rng);
    const double phi = up(rng);
    const Angles a = ray_to_angles(angles_to_ray(lambda, phi));
    ang = std::max({ang, std::abs(a.lambda - lambda), std::abs(a.phi - phi)});
  }
  return {pix <= kPixelTol && ang <= kAngleTol,
          fmt("frame<->sphere max %.2e px (tol 1e-9), angles<->ray max %.2e rad (tol 1e-12), %d "
              "samples each",
              pix, ang, kSamples)};
}

// ------------------------------------------------------------------ 4

Outcome criterion_sgm_oracle() {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> size(1, 32);
  std::uniform_int_distribution<int> lo(0, 8);
  std::uniform_int_distribution<int> count(0, 16);
  std::uniform_int_distribution<int> cost(0, 48);
  int exact = 0;
  constexpr int kVolumes = 50;
  for (int t = 0; t < kVolumes; ++t) {
    const int w = size(rng);
    const int h = size(rng);
    Image<DisparityRange> ranges(w, h, DisparityRange{0, 15});
    if (t % 2 == 1)
      for (auto& r : ranges.data()) {
        const int m = lo(rng);
        r = {m, m + count(rng) - 1};
      }
    CostVolume v(ranges, 48);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int d = ranges(x, y).min; d <= ranges(x, y).max; ++d)
          v.at(x, y, d) = static_cast<Cost>(cost(rng));
    SgmParams p;
    p.num_paths = t % 5 == 0 ? 4 : 8;
    p.p1 = std::uniform_int_distribution<int>(1, 30)(rng);
    p.p2 = std::uniform_int_distribution<int>(p.p1 + 1, 200)(rng);
    const CostVolume agg = sgm_aggregate(v, p);
    const auto ref = reference_aggregate(v, p.num_paths, p.p1, p.p2);
    bool same = true;
    for (int y = 0; y < h && same; ++y)
      for (int x = 0; x < w && same; ++x)
        for (int d = ranges(x, y).min; d <= ranges(x, y).max; ++d)
          same = same && agg.at(x, y, d) == ref[static_cast<std::size_t>(y) * w + x][d - ranges(x, y).min];
    exact += same;
  }
  const CostVolume raw = random_volume(rng, 32, 32, {0, 15}, 48);
  SgmParams zero;
  zero.p1 = 0;
  zero.p2 = 0;
  const CostVolume agg = sgm_aggregate(raw, zero);
  const auto ref = reference_aggregate(raw, 8, 0, 0);
  bool degenerate = true;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int d = 0; d <= 15; ++d)
        degenerate = degenerate && agg.at(x, y, d) == 8 * raw.at(x, y, d) &&
                     ref[static_cast<std::size_t>(y) * 32 + x][d] == agg.at(x, y, d);
  return {exact == kVolumes && degenerate,
          fmt("%d/%d random volumes bit-exact, P1=P2=0 case %s", exact, kVolumes,
              degenerate ? "exact" : "differs")};
}

// ------------------------------------------------------------------ 5

Outcome criterion_ramp_accuracy() {
  SyntheticScene scene;
  scene.kind = SurfaceKind::kRamp;
  const Intrinsics k(500.0, 512, 512);
  const double b = 1.0;
  const auto [l, r] = make_oblique_pair(0.0, b, scene, k);
  const fs::path dir = fresh_dir("ramp");
  const RenderedPair pair = write_synthetic_pair(dir.string(), scene, l, r);
  const auto [zlo, zhi] = rectified_depth_bounds(pair.truth, l, r);

  PipelineConfig c;
  c.pairs = {{"ramp", (dir / "left.png").string(), (dir / "right.png").string(),
              (dir / "cameras.json").string()}};
  c.mode = PipelineMode::kFrame;
  c.z_min = 0.9 * zlo;
  c.z_max = 1.1 * zhi;
  c.out_dir = (dir / "out").string();
  omp_set_num_threads(1);
  const auto t0 = Clock::now();
  std::ostringstream log;
  const PipelineResult res = run_pipeline(c, log);
  const double secs = seconds_since(t0);
  omp_set_num_threads(omp_get_num_procs());

  const DisparityMap& d = res.pairs[0].frame->disparity;
  std::size_t good = 0;
  for (int y = 0; y < 512; ++y)
    for (int x = 0; x < 512; ++x) {
      if (!d.valid(x, y) || !std::isfinite(pair.left.depth(x, y))) continue;
      good += std::abs(d.values(x, y) - b * k.f() / pair.left.depth(x, y)) <= 1.0;
    }
  const double frac = static_cast<double>(good) / std::max<std::size_t>(1, d.valid_count());
  return {frac >= 0.95 && secs < 60.0,
          fmt("%.2f%% of %zu valid disparities within 1.0 px (min 95%%), pipeline %.1f s "
              "single-threaded (limit 60 s)",
              100.0 * frac, d.valid_count(), secs)};
}

// ------------------------------------------------------------------ 6

Outcome criterion_plane_rmse() {
  SyntheticScene scene;
  scene.kind = SurfaceKind::kPlane;
  scene.depth = 10.0;
  const Intrinsics k(500.0, 512, 512);
  const double b = 1.0;
  const auto [l, r] = make_oblique_pair(0.0, b, scene, k);
  const RenderedPair pair = render_pair(scene, l, r);
  PairOptions opt;
  opt.mode = PipelineMode::kBoth;
  opt.z_min = 5.0;
  opt.z_max = 30.0;
  const PairResult res = process_pair({l, r, pair.left.image, pair.right.image}, opt);
  const double bound = scene.depth * scene.depth * 0.5 / (b * k.f());
  auto rmse = [&](const PointCloud& c) {
    double sum = 0.0;
    for (const Vec3& p : c.points) sum += (p.z() - scene.depth) * (p.z() - scene.depth);
    return c.empty() ? std::numeric_limits<double>::infinity() : std::sqrt(sum / c.size());
  };
  const double f = rmse(res.frame->cloud);
  const double s = rmse(res.spherical->cloud);
  return {f <= bound && s <= bound,
          fmt("RMSE frame %.4f m (%zu pts), spherical %.4f m (%zu pts), bound Z^2*0.5/(b f) = "
              "%.4f m",
              f, res.frame->cloud.size(), s, res.spherical->cloud.size(), bound)};
}

// ------------------------------------------------------------------ 7

constexpr int kObliquePairs = 10;
constexpr double kSceneDistance = 10.0;

struct ObliqueRun {
  double convergence;
  std::size_t frame_points;
  std::size_t spherical_points;
  double frame_mean;
  double spherical_mean;
};

Outcome criterion_oblique_comparison() {
  std::vector<ObliqueRun> runs;
  for (int i = 0; i < kObliquePairs; ++i) {
    SyntheticScene scene;
    scene.kind = i % 2 == 0 ? SurfaceKind::kRamp : SurfaceKind::kHeightfield;
    scene.depth = kSceneDistance;
    scene.seed = 100 + i;
    const double conv = 30.0 + 2.0 * i;
    const double b = 2.0 * kSceneDistance * std::sin(0.5 * conv * kDeg);
    const Intrinsics k(500.0, 512, 512);
    const auto [l, r] = make_oblique_pair(conv, b, scene, k);
    const fs::path dir = fresh_dir("oblique_" + std::to_string(i));
    const RenderedPair pair = write_synthetic_pair(dir.string(), scene, l, r);
    const auto [zlo, zhi] = rectified_depth_bounds(pair.truth, l, r);

    PipelineConfig c;
    c.pairs = {{"oblique", (dir / "left.png").string(), (dir / "right.png").string(),
                (dir / "cameras.json").string()}};
    c.mode = PipelineMode::kBoth;
    c.extent = ExtentMode::kBoundingBox;
    c.z_min = 0.9 * zlo;
    c.z_max = 1.1 * zhi;
    c.reference = (dir / "truth.ply").string();
    c.out_dir = (dir / "out").string();
    std::ostringstream log;
    const PipelineResult res = run_pipeline(c, log);
    const Json& rep = res.report;
    runs.push_back({conv, res.merged_frame.size(), res.merged_spherical.size(),
                    rep["frame_accuracy"]["mean_abs_dist"].get<double>(),
                    rep["spherical_accuracy"]["mean_abs_dist"].get<double>()});
    const ObliqueRun& o = runs.back();
    std::cout << fmt("  pair %d conv %.0f deg: points frame %zu spherical %zu, mean dist frame "
                     "%.4f m spherical %.4f m",
                     i, o.convergence, o.frame_points, o.spherical_points, o.frame_mean,
                     o.spherical_mean)
              << std::endl;
  }
  int more_points = 0;
  int closer = 0;
  for (const ObliqueRun& o : runs) {
    more_points += o.spherical_points >= o.frame_points;
    closer += o.spherical_mean <= o.frame_mean;
  }
  return {more_points >= 8 && closer >= 7,
          fmt("(a) spherical count >= frame on %d/%d pairs (need 8), (b) spherical mean <= frame "
              "on %d/%d pairs (need 7)",
              more_points, kObliquePairs, closer, kObliquePairs)};
}

// ------------------------------------------------------------------ 8

Outcome criterion_evaluation_oracle() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_int_distribution<int> n(1, 1000);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    PointCloud a, b;
    for (int i = n(rng); i > 0; --i) a.points.emplace_back(u(rng), u(rng), u(rng));
    for (int i = n(rng); i > 0; --i) b.points.emplace_back(u(rng), u(rng), u(rng));
    std::vector<double> dist;
    for (const Vec3& p : a.points) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& q : b.points) best = std::min(best, (p - q).norm());
      dist.push_back(best);
    }
    double mean = 0.0;
    for (double d : dist) mean += d;
    mean /= dist.size();
    double var = 0.0;
    for (double d : dist) var += (d - mean) * (d - mean);
    const double sd = std::sqrt(var / dist.size());
    const CloudDistance c = cloud_to_cloud(a, b);
    worst = std::max({worst, std::abs(c.mean_abs_dist - mean), std::abs(c.std_dist - sd)});
  }
  // Clone on a 1 m lattice shifted by a dyadic vector of length 0.375 m.
  PointCloud ref;
  for (int x = 0; x < 10; ++x)
    for (int y = 0; y < 10; ++y)
      for (int z = 0; z < 10; ++z) ref.points.emplace_back(x, y, z);
  const Vec3 t(0.0, 0.375, 0.0);
  PointCloud clone = ref;
  for (Vec3& p : clone.points) p += t;
  const CloudDistance c = cloud_to_cloud(clone, ref);
  const bool exact = c.mean_abs_dist == t.norm() && c.std_dist == 0.0;
  return {worst <= 1e-12 && exact,
          fmt("max |kd-tree - brute force| %.2e (tol 1e-12) over 20 cloud pairs, translated clone "
              "mean %.17g m for |t| = %.17g m",
              worst, c.mean_abs_dist, t.norm())};
}

// ------------------------------------------------------------------ 9

Outcome criterion_determinism() {
  const fs::path dir = fresh_dir("determinism");
  std::vector<PairSpec> pairs;
  for (int i = 0; i < 3; ++i) {
    SyntheticScene scene;
    scene.kind = SurfaceKind::kRamp;
    scene.seed = 900 + i;
    const double conv = 15.0 * i;
    const auto [l, r] =
        make_oblique_pair(conv, conv > 0.0 ? 2.0 * 10.0 * std::sin(0.5 * conv * kDeg) : 1.0, scene,
                          Intrinsics(300.0, 256, 256));
    const fs::path p = dir / ("p" + std::to_string(i));
    write_synthetic_pair(p.string(), scene, l, r);
    pairs.push_back({"p" + std::to_string(i), (p / "left.png").string(), (p / "right.png").string(),
                     (p / "cameras.json").string()});
  }
  auto run = [&](const std::string& name, int jobs, int threads) {
    PipelineConfig c;
    c.pairs = pairs;
    c.mode = PipelineMode::kBoth;
    c.extent = ExtentMode::kBoundingBox;
    c.z_min = 3.0;
    c.z_max = 30.0;
    c.jobs = jobs;
    c.reference = (dir / "p0" / "truth.ply").string();
    c.out_dir = (dir / name).string();
    omp_set_num_threads(threads);
    std::ostringstream log;
    run_pipeline(c, log);
    return dir / name;
  };
  const fs::path a = run("run_a", 1, 1);
  const fs::path b = run("run_b", 1, 1);
  const fs::path c = run("run_jobs3", 3, 4);
  omp_set_num_threads(omp_get_num_procs());
  int compared = 0;
  int identical = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const std::string name = entry.path().filename().string();
    if (entry.path().extension() != ".ply" && name != "report.json") continue;
    const std::string bytes = file_bytes(entry.path());
    ++compared;
    identical += bytes == file_bytes(b / name) && bytes == file_bytes(c / name);
  }
  return {compared > 0 && identical == compared,
          fmt("%d/%d PLY and report files byte-identical across two runs and jobs=3", identical,
              compared)};
}

}  // namespace

int main(int argc, char** argv) {
  g_work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "epistereo_acceptance";
  fs::create_directories(g_work);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"frame epipolar row alignment", criterion_frame_alignment},
      {"spherical epipolar row alignment", criterion_sphere_alignment},
      {"mapping round trips", criterion_round_trips},
      {"SGM oracle equivalence", criterion_sgm_oracle},
      {"ramp matching accuracy", criterion_ramp_accuracy},
      {"plane triangulation RMSE", criterion_plane_rmse},
      {"oblique spherical vs frame", criterion_oblique_comparison},
      {"evaluation oracle", criterion_evaluation_oracle},
      {"determinism", criterion_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << i + 1 << " " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  std::cout << criteria.size() - failed << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}

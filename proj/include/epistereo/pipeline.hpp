#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "epistereo/disparity.hpp"
#include "epistereo/evaluate.hpp"
#include "epistereo/hierarchical.hpp"
#include "epistereo/io.hpp"
#include "epistereo/point_cloud.hpp"
#include "epistereo/rectify.hpp"
#include "epistereo/sgm.hpp"
#include "epistereo/spherical.hpp"
#include "epistereo/triangulate.hpp"

namespace epistereo {

enum class PipelineMode { kFrame, kSpherical, kBoth };

inline PipelineMode parse_mode(const std::string& s) {
  if (s == "frame") return PipelineMode::kFrame;
  if (s == "spherical") return PipelineMode::kSpherical;
  if (s == "both") return PipelineMode::kBoth;
  throw Error(ErrorCode::kValidation, "mode must be frame, spherical or both: " + s);
}

inline std::string to_string(PipelineMode m) {
  switch (m) {
    case PipelineMode::kFrame: return "frame";
    case PipelineMode::kSpherical: return "spherical";
    case PipelineMode::kBoth: return "both";
  }
  return "both";
}

// ---------------------------------------------------------------- ranges

/// [floor(b f / Z_max), ceil(b f / Z_min)] widened by `margin`, never below 0.
inline DisparityRange derive_disparity_range(const StereoGeometry& geom, double z_min, double z_max,
                                             int margin = 0) {
  if (!(z_min > 0.0) || !(z_max > z_min) || !std::isfinite(z_max))
    throw Error(ErrorCode::kInvalidDepthBounds, "need finite 0 < Z_min < Z_max");
  const double bf = geom.baseline() * geom.focal();
  const int lo = std::max(0, static_cast<int>(std::floor(bf / z_max)) - margin);
  const int hi = static_cast<int>(std::ceil(bf / z_min)) + margin;
  return {lo, hi};
}

namespace detail {

// Output column of a rectified pixel, without the grid extent check.
inline double sphere_column(const SphericalGrid& grid, const Intrinsics& intr, double x, double y) {
  const Ray r = swapped(pixel_to_ray(intr, x, y));
  const double phi = std::atan(-r.y / std::sqrt(r.x * r.x + r.z * r.z));
  return (grid.out_w - 1) - (grid.pixels_per_radian() * phi + grid.v0);
}

}  // namespace detail

/// Spherical disparity interval for rectified depths in [Z_min, Z_max],
/// found by mapping sampled spherical pixels to both depth bounds; the
/// disparity of a pixel is monotone in depth so the extremes are attained
/// at the bounds.
inline DisparityRange derive_spherical_disparity_range(const StereoGeometry& geom, double z_min,
                                                       double z_max, int margin = 0,
                                                       int stride = 4) {
  if (!(z_min > 0.0) || !(z_max > z_min) || !std::isfinite(z_max))
    throw Error(ErrorCode::kInvalidDepthBounds, "need finite 0 < Z_min < Z_max");
  if (!geom.grid) throw Error(ErrorCode::kInvalidArgument, "spherical grid missing");
  const SphericalGrid& g = *geom.grid;
  const double bf = geom.baseline() * geom.focal();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int row = 0; row < g.out_h; row += stride) {
    for (int col = 0; col < g.out_w; col += stride) {
      const auto left = try_sphere_pixel_to_frame(g, geom.rectified, col, row);
      if (!left) continue;
      for (double z : {z_min, z_max}) {
        const double ds = col - detail::sphere_column(g, geom.rectified, left->x() - bf / z, left->y());
        lo = std::min(lo, ds);
        hi = std::max(hi, ds);
      }
    }
  }
  if (!(lo <= hi)) throw Error(ErrorCode::kEmptyRange, "no spherical pixel maps to the frame");
  return {std::max(0, static_cast<int>(std::floor(lo)) - margin),
          static_cast<int>(std::ceil(hi)) + margin};
}

// ---------------------------------------------------------------- config

/// One stereo pair: image files and a camera-pair JSON.
struct PairSpec {
  std::string name;
  std::string left;
  std::string right;
  std::string cameras;
};

struct PipelineConfig {
  std::vector<PairSpec> pairs;
  PipelineMode mode = PipelineMode::kBoth;
  SgmParams sgm;
  double z_min = 1.0;
  double z_max = 100.0;
  int range_margin = 2;
  ExtentMode extent = ExtentMode::kFixed;
  double max_depth = kDefaultMaxDepth;
  std::string out_dir = "out";
  std::string reference;  // optional reference cloud for accuracy
  std::optional<double> max_dist;
  int jobs = 1;

  /// Checks values and that every referenced file exists; throws Validation.
  void validate() const {
    namespace fs = std::filesystem;
    if (pairs.empty()) throw Error(ErrorCode::kValidation, "no pairs configured");
    if (!(z_min > 0.0) || !(z_max > z_min) || !std::isfinite(z_max))
      throw Error(ErrorCode::kValidation, "need finite 0 < z_min < z_max");
    if (jobs < 1) throw Error(ErrorCode::kValidation, "jobs must be >= 1");
    try {
      sgm.validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::kValidation, e.what());
    }
    for (const PairSpec& p : pairs) {
      for (const std::string* f : {&p.left, &p.right, &p.cameras}) {
        if (f->empty()) throw Error(ErrorCode::kValidation, "pair " + p.name + " is incomplete");
        if (!fs::exists(*f)) throw Error(ErrorCode::kValidation, "missing file: " + *f);
      }
    }
    if (!reference.empty() && !fs::exists(reference))
      throw Error(ErrorCode::kValidation, "missing file: " + reference);
  }
};

/// Documented keys with their default values, one per line.
inline std::string default_config_text() {
  const PipelineConfig c;
  std::ostringstream o;
  o << "# epistereo pipeline configuration (key = value, '#' starts a comment)\n"
    << "mode = " << to_string(c.mode) << "            # frame | spherical | both\n"
    << "out_dir = " << c.out_dir << "\n"
    << "z_min = " << c.z_min << "              # rectified depth bounds, meters\n"
    << "z_max = " << c.z_max << "\n"
    << "range_margin = " << c.range_margin << "       # disparity range padding, pixels\n"
    << "extent = fixed          # fixed | bbox\n"
    << "max_depth = " << c.max_depth << "      # points beyond are rejected\n"
    << "reference =             # optional reference cloud (PLY)\n"
    << "max_dist =              # optional cloud-to-cloud cutoff, meters\n"
    << "jobs = " << c.jobs << "                # pairs processed concurrently\n"
    << "p1 = " << c.sgm.p1 << "\n"
    << "p2 = " << c.sgm.p2 << "\n"
    << "num_paths = " << c.sgm.num_paths << "\n"
    << "census_w = " << c.sgm.census_w << "\n"
    << "census_h = " << c.sgm.census_h << "\n"
    << "lr_threshold = " << c.sgm.lr_threshold << "\n"
    << "uniqueness_ratio = " << c.sgm.uniqueness_ratio << "\n"
    << "pyramid_levels = " << c.sgm.pyramid_levels << "      # 0 = automatic\n"
    << "search_margin = " << c.sgm.search_margin << "\n"
    << "# pair.<name>.left = left.png\n"
    << "# pair.<name>.right = right.png\n"
    << "# pair.<name>.cameras = cameras.json\n";
  return o.str();
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T v{};
  in >> v;
  if (in.fail() || !in.eof())
    throw Error(ErrorCode::kValidation, "bad value for " + key + ": " + value);
  return v;
}

// Applies sgm.* keys shared by the pipeline config and `match --params`.
inline bool apply_sgm_key(SgmParams& p, const std::string& key, const std::string& value) {
  if (key == "p1") p.p1 = parse_number<int>(key, value);
  else if (key == "p2") p.p2 = parse_number<int>(key, value);
  else if (key == "num_paths") p.num_paths = parse_number<int>(key, value);
  else if (key == "census_w") p.census_w = parse_number<int>(key, value);
  else if (key == "census_h") p.census_h = parse_number<int>(key, value);
  else if (key == "lr_threshold") p.lr_threshold = parse_number<double>(key, value);
  else if (key == "uniqueness_ratio") p.uniqueness_ratio = parse_number<double>(key, value);
  else if (key == "pyramid_levels") p.pyramid_levels = parse_number<int>(key, value);
  else if (key == "search_margin") p.search_margin = parse_number<int>(key, value);
  else return false;
  return true;
}

// Ordered key/value lines; relative paths resolve against `base`.
inline std::vector<std::pair<std::string, std::string>> read_key_values(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::kValidation, "line " + std::to_string(lineno) + ": expected key = value");
    kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return kv;
}

}  // namespace detail

inline SgmParams parse_sgm_params(std::istream& in) {
  SgmParams p;
  for (const auto& [k, v] : detail::read_key_values(in))
    if (!detail::apply_sgm_key(p, k, v)) throw Error(ErrorCode::kValidation, "unknown key: " + k);
  return p;
}

/// Parses the flat key-value configuration. Relative file paths are taken
/// relative to `base_dir`. Does not check that files exist; see validate().
inline PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {}) {
  PipelineConfig c;
  auto resolve = [&](const std::string& v) {
    if (v.empty()) return v;
    const std::filesystem::path p(v);
    return (p.is_absolute() || base_dir.empty() ? p : base_dir / p).string();
  };
  std::map<std::string, std::size_t> pair_index;
  for (const auto& [key, value] : detail::read_key_values(in)) {
    if (detail::apply_sgm_key(c.sgm, key, value)) continue;
    if (key.rfind("pair.", 0) == 0) {
      const auto dot = key.rfind('.');
      if (dot <= 5) throw Error(ErrorCode::kValidation, "bad pair key: " + key);
      const std::string name = key.substr(5, dot - 5);
      const std::string field = key.substr(dot + 1);
      auto it = pair_index.find(name);
      if (it == pair_index.end()) {
        it = pair_index.emplace(name, c.pairs.size()).first;
        c.pairs.push_back({name, "", "", ""});
      }
      PairSpec& p = c.pairs[it->second];
      if (field == "left") p.left = resolve(value);
      else if (field == "right") p.right = resolve(value);
      else if (field == "cameras") p.cameras = resolve(value);
      else throw Error(ErrorCode::kValidation, "unknown pair field: " + key);
    } else if (key == "mode") c.mode = parse_mode(value);
    else if (key == "out_dir") c.out_dir = resolve(value);
    else if (key == "z_min") c.z_min = detail::parse_number<double>(key, value);
    else if (key == "z_max") c.z_max = detail::parse_number<double>(key, value);
    else if (key == "range_margin") c.range_margin = detail::parse_number<int>(key, value);
    else if (key == "extent") {
      if (value == "fixed") c.extent = ExtentMode::kFixed;
      else if (value == "bbox") c.extent = ExtentMode::kBoundingBox;
      else throw Error(ErrorCode::kValidation, "extent must be fixed or bbox");
    } else if (key == "max_depth") c.max_depth = detail::parse_number<double>(key, value);
    else if (key == "reference") c.reference = resolve(value);
    else if (key == "max_dist") {
      if (!value.empty()) c.max_dist = detail::parse_number<double>(key, value);
    } else if (key == "jobs") c.jobs = detail::parse_number<int>(key, value);
    else throw Error(ErrorCode::kValidation, "unknown key: " + key);
  }
  return c;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kValidation, "cannot open config " + path);
  return parse_config(in, std::filesystem::path(path).parent_path());
}

// ---------------------------------------------------------------- per pair

/// Result of one mode on one pair.
struct ModeResult {
  DisparityMap disparity;
  DisparityRange range;
  PointCloud cloud;
};

struct PairResult {
  std::string name;
  StereoGeometry geometry;  // frame geometry; spherical adds the grid
  std::optional<ModeResult> frame;
  std::optional<ModeResult> spherical;
  std::optional<SphericalGrid> grid;
  std::string error;  // non-empty when the pair failed
  std::vector<std::pair<std::string, double>> timings;
};

struct PairInput {
  CameraView left_view;
  CameraView right_view;
  GrayImage left;
  GrayImage right;
};

struct PairOptions {
  PipelineMode mode = PipelineMode::kBoth;
  SgmParams sgm;
  double z_min = 1.0;
  double z_max = 100.0;
  int range_margin = 2;
  ExtentMode extent = ExtentMode::kFixed;
  double max_depth = kDefaultMaxDepth;
};

/// Rectify, optionally warp to the sphere, match and triangulate one pair.
/// Both modes share the same rectified images and SGM parameters.
inline PairResult process_pair(const PairInput& in, const PairOptions& opt,
                               const std::string& name = "pair") {
  using Clock = std::chrono::steady_clock;
  PairResult out;
  out.name = name;
  auto t0 = Clock::now();
  auto lap = [&](const std::string& stage) {
    const auto t1 = Clock::now();
    out.timings.emplace_back(stage, std::chrono::duration<double>(t1 - t0).count());
    t0 = t1;
  };

  const RectifiedPair rect = rectify_pair(in.left_view, in.left, in.right_view, in.right, opt.extent);
  out.geometry.frame = rect.frame;
  out.geometry.rectified = rect.homographies.intrinsics;
  out.geometry.max_depth = opt.max_depth;
  lap("rectify");

  if (opt.mode != PipelineMode::kSpherical) {
    ModeResult m;
    m.range = derive_disparity_range(out.geometry, opt.z_min, opt.z_max, opt.range_margin);
    m.disparity = hierarchical_match(rect.left, rect.right, m.range, opt.sgm, DisparitySpace::kFrame);
    m.cloud = frame_disparity_cloud(m.disparity, out.geometry);
    out.frame = std::move(m);
    lap("frame");
  }
  if (opt.mode != PipelineMode::kFrame) {
    const SphericalGrid grid = make_spherical_grid(rect.homographies.intrinsics);
    StereoGeometry geom = out.geometry;
    geom.grid = grid;
    const SphericalImage sl = spherical_warp(rect.left, geom.rectified, grid);
    const SphericalImage sr = spherical_warp(rect.right, geom.rectified, grid);
    lap("spherical_warp");
    ModeResult m;
    m.range = derive_spherical_disparity_range(geom, opt.z_min, opt.z_max, opt.range_margin);
    m.disparity = hierarchical_match({sl.pixels, sl.mask}, {sr.pixels, sr.mask}, m.range, opt.sgm,
                                     DisparitySpace::kSpherical);
    m.cloud = spherical_disparity_cloud(m.disparity, geom);
    out.spherical = std::move(m);
    out.grid = grid;
    lap("spherical");
  }
  return out;
}

// ---------------------------------------------------------------- pipeline

struct PipelineResult {
  std::vector<PairResult> pairs;
  PointCloud merged_frame;
  PointCloud merged_spherical;
  Json report;
};

namespace detail {

inline Json distance_json(const CloudDistance& d) {
  Json j = {{"mean_abs_dist", d.mean_abs_dist},
            {"std_dist", d.std_dist},
            {"points_used", d.points_used}};
  j["max_dist"] = d.max_dist ? Json(*d.max_dist) : Json(nullptr);
  return j;
}

inline Json completeness_json(const Completeness& c) {
  Json j = {{"count_a", c.count_a}, {"count_b", c.count_b}};
  j["completeness_gain_pct"] = c.gain_pct ? Json(*c.gain_pct) : Json(nullptr);
  if (c.division_by_zero()) j["division_by_zero"] = true;
  return j;
}

}  // namespace detail

/// Report JSON mirroring the evaluation fields for one test/reference pair.
inline Json eval_report_json(const EvalReport& r) {
  Json j = detail::completeness_json(r.counts);
  j.update(detail::distance_json(r.distance));
  return j;
}

/// Runs every configured pair, writes per-pair and merged clouds plus
/// report.json (deterministic content) and summary.json (timings) into
/// out_dir. Pairs that fail are logged and skipped; throws when all fail.
inline PipelineResult run_pipeline(const PipelineConfig& config, std::ostream& log = std::cerr) {
  namespace fs = std::filesystem;
  config.validate();
  fs::create_directories(config.out_dir);

  const PairOptions opt{config.mode,   config.sgm,          config.z_min, config.z_max,
                        config.range_margin, config.extent, config.max_depth};
  PipelineResult result;
  result.pairs.resize(config.pairs.size());
  std::mutex log_mutex;

  auto work = [&](std::size_t i) {
    const PairSpec& spec = config.pairs[i];
    PairResult& r = result.pairs[i];
    try {
      const auto [lv, rv] = read_camera_pair(spec.cameras);
      const PairInput input{lv, rv, read_png_gray(spec.left), read_png_gray(spec.right)};
      r = process_pair(input, opt, spec.name);
    } catch (const std::exception& e) {
      r = PairResult{};
      r.name = spec.name;
      r.error = e.what();
    }
    std::lock_guard lock(log_mutex);
    if (!r.error.empty()) {
      log << "[pair " << spec.name << "] failed: " << r.error << "\n";
      return;
    }
    for (const auto& [stage, seconds] : r.timings)
      log << "[pair " << spec.name << "] " << stage << " " << seconds << " s\n";
    if (r.frame) log << "[pair " << spec.name << "] frame points " << r.frame->cloud.size() << "\n";
    if (r.spherical)
      log << "[pair " << spec.name << "] spherical points " << r.spherical->cloud.size() << "\n";
  };

  const std::size_t jobs = std::min<std::size_t>(config.jobs, config.pairs.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < config.pairs.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < config.pairs.size(); i = next++) work(i);
      });
    for (auto& th : pool) th.join();
  }

  std::size_t ok = 0;
  Json pairs_json = Json::array();
  Json summary_pairs = Json::array();
  for (const PairResult& r : result.pairs) {
    Json pj = {{"name", r.name}};
    Json sj = {{"name", r.name}};
    if (!r.error.empty()) {
      pj["error"] = r.error;
      pairs_json.push_back(pj);
      summary_pairs.push_back(sj);
      continue;
    }
    ++ok;
    for (const auto& [stage, seconds] : r.timings) sj["seconds"][stage] = seconds;
    if (r.frame) {
      pj["frame_points"] = r.frame->cloud.size();
      pj["frame_range"] = {r.frame->range.min, r.frame->range.max};
      write_ply(r.frame->cloud, (fs::path(config.out_dir) / (r.name + "_frame.ply")).string());
      result.merged_frame.append(r.frame->cloud);
    }
    if (r.spherical) {
      pj["spherical_points"] = r.spherical->cloud.size();
      pj["spherical_range"] = {r.spherical->range.min, r.spherical->range.max};
      write_ply(r.spherical->cloud,
                (fs::path(config.out_dir) / (r.name + "_spherical.ply")).string());
      result.merged_spherical.append(r.spherical->cloud);
    }
    pairs_json.push_back(pj);
    summary_pairs.push_back(sj);
  }
  if (ok == 0) throw Error(ErrorCode::kIoError, "all pairs failed");

  Json report = {{"mode", to_string(config.mode)}, {"pairs", pairs_json}};
  const bool do_frame = config.mode != PipelineMode::kSpherical;
  const bool do_sph = config.mode != PipelineMode::kFrame;
  if (do_frame) {
    write_ply(result.merged_frame, (fs::path(config.out_dir) / "merged_frame.ply").string());
    report["frame_points"] = result.merged_frame.size();
  }
  if (do_sph) {
    write_ply(result.merged_spherical, (fs::path(config.out_dir) / "merged_spherical.ply").string());
    report["spherical_points"] = result.merged_spherical.size();
  }
  if (do_frame && do_sph)
    report["completeness"] =
        detail::completeness_json(completeness(result.merged_spherical, result.merged_frame));
  if (!config.reference.empty()) {
    const PointCloud ref = read_ply(config.reference);
    if (do_frame && !result.merged_frame.empty())
      report["frame_accuracy"] =
          detail::distance_json(cloud_to_cloud(result.merged_frame, ref, config.max_dist));
    if (do_sph && !result.merged_spherical.empty())
      report["spherical_accuracy"] =
          detail::distance_json(cloud_to_cloud(result.merged_spherical, ref, config.max_dist));
  }
  write_json_file((fs::path(config.out_dir) / "report.json").string(), report);
  write_json_file((fs::path(config.out_dir) / "summary.json").string(),
                  {{"pairs_ok", ok}, {"pairs_total", result.pairs.size()}, {"pairs", summary_pairs}});
  result.report = std::move(report);
  return result;
}

}  // namespace epistereo

// Command-line front end: per-stage subcommands and the pipeline runner.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "epistereo/epistereo.hpp"

namespace fs = std::filesystem;
using namespace epistereo;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct ValidationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

DisparityRange parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ValidationFailure("range must look like min:max");
  try {
    return {std::stoi(text.substr(0, colon)), std::stoi(text.substr(colon + 1))};
  } catch (const std::exception&) {
    throw ValidationFailure("range must look like min:max");
  }
}

ExtentMode parse_extent(const std::string& s) {
  if (s == "fixed") return ExtentMode::kFixed;
  if (s == "bbox") return ExtentMode::kBoundingBox;
  throw ValidationFailure("extent must be fixed or bbox");
}

std::string path_in(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

// ------------------------------------------------------------------ synth

struct SynthArgs {
  std::string scene = "ramp";
  double convergence = 0.0;
  double baseline = 1.0;
  double focal = 500.0;
  int width = 512;
  int height = 512;
  double depth = 10.0;
  std::uint64_t seed = 1;
  std::string out;
};

void run_synth(const SynthArgs& a) {
  SyntheticScene scene;
  scene.kind = parse_surface_kind(a.scene);
  scene.depth = a.depth;
  scene.seed = a.seed;
  const Intrinsics k(a.focal, a.width, a.height);
  const auto [lv, rv] = make_oblique_pair(a.convergence, a.baseline, scene, k);
  const RenderedPair pair = render_pair(scene, lv, rv);

  fs::create_directories(a.out);
  write_png(path_in(a.out, "left.png"), pair.left.image);
  write_png(path_in(a.out, "right.png"), pair.right.image);
  write_pfm(path_in(a.out, "left_depth.pfm"), pair.left.depth);
  write_pfm(path_in(a.out, "right_depth.pfm"), pair.right.depth);
  write_camera_pair(path_in(a.out, "cameras.json"), lv, rv);
  write_ply(pair.truth, path_in(a.out, "truth.ply"));

  // Depth bounds in the rectified frame, padded, for a ready-to-run config.
  const RectifyingFrame frame = build_rectifying_rotation(lv.pose, rv.pose);
  double zlo = std::numeric_limits<double>::infinity();
  double zhi = 0.0;
  for (const Vec3& p : pair.truth.points) {
    const double z = (frame.rotation * (p - frame.left_center)).z();
    zlo = std::min(zlo, z);
    zhi = std::max(zhi, z);
  }
  std::ofstream cfg(path_in(a.out, "pipeline.cfg"));
  cfg << "mode = both\n"
      << "out_dir = out\n"
      << "z_min = " << std::max(0.1, 0.9 * zlo) << "\n"
      << "z_max = " << 1.1 * zhi << "\n"
      << "extent = " << (a.convergence > 0.0 ? "bbox" : "fixed") << "\n"
      << "reference = truth.ply\n"
      << "pair.synth.left = left.png\n"
      << "pair.synth.right = right.png\n"
      << "pair.synth.cameras = cameras.json\n";
  std::cerr << "rendered " << a.width << "x" << a.height << ", truth points "
            << pair.truth.size() << "\n";
}

// ---------------------------------------------------------------- rectify

struct RectifyArgs {
  std::string left, right, cameras, out;
  std::string mode = "frame";
  std::string extent = "fixed";
};

void run_rectify(const RectifyArgs& a) {
  if (a.mode != "frame" && a.mode != "spherical")
    throw ValidationFailure("mode must be frame or spherical");
  const auto [lv, rv] = read_camera_pair(a.cameras);
  const ColorImage lc = read_png_color(a.left);
  const ColorImage rc = read_png_color(a.right);
  const RectifiedPair rect = rectify_pair(lv, to_gray(lc), rv, to_gray(rc), parse_extent(a.extent));
  const HomographyPair& h = rect.homographies;
  const Intrinsics& k = h.intrinsics;

  StereoGeometry geom{rect.frame, k, std::nullopt, kDefaultMaxDepth};
  MaskedImage left = rect.left;
  MaskedImage right = rect.right;
  ColorImage left_color = warp_planar_color(lc, h.left, k.width(), k.height());
  ColorImage right_color = warp_planar_color(rc, h.right, k.width(), k.height());
  if (a.mode == "spherical") {
    const SphericalGrid grid = make_spherical_grid(k);
    geom.grid = grid;
    const SphericalImage sl = spherical_warp(left, k, grid);
    const SphericalImage sr = spherical_warp(right, k, grid);
    left = {sl.pixels, sl.mask};
    right = {sr.pixels, sr.mask};
    left_color = spherical_warp_color(left_color, k, grid);
    right_color = spherical_warp_color(right_color, k, grid);
  }

  fs::create_directories(a.out);
  write_png(path_in(a.out, "left.png"), left.pixels);
  write_png(path_in(a.out, "right.png"), right.pixels);
  write_png(path_in(a.out, "left_color.png"), left_color);
  write_png(path_in(a.out, "right_color.png"), right_color);
  write_mask_png(path_in(a.out, "left_mask.png"), left.mask);
  write_mask_png(path_in(a.out, "right_mask.png"), right.mask);
  write_json_file(path_in(a.out, "geometry.json"), geometry_to_json(geom, &h));
  std::cerr << "rectified to " << left.pixels.width() << "x" << left.pixels.height() << "\n";
}

// ------------------------------------------------------------------ match

struct MatchArgs {
  std::string left, right, left_mask, right_mask, range, params, out, png;
  std::string space = "frame";
};

void run_match(const MatchArgs& a) {
  const DisparityRange range = parse_range(a.range);
  if (a.space != "frame" && a.space != "spherical")
    throw ValidationFailure("space must be frame or spherical");
  SgmParams params;
  if (!a.params.empty()) {
    std::ifstream in(a.params);
    params = parse_sgm_params(in);
  }
  auto load = [](const std::string& image, const std::string& mask) {
    MaskedImage m{read_png_gray(image), {}};
    m.mask = mask.empty() ? full_mask(m.pixels.width(), m.pixels.height()) : read_mask_png(mask);
    return m;
  };
  const DisparityMap disp = hierarchical_match(
      load(a.left, a.left_mask), load(a.right, a.right_mask), range, params,
      a.space == "frame" ? DisparitySpace::kFrame : DisparitySpace::kSpherical);
  write_pfm(a.out, disp.values);
  if (!a.png.empty()) write_png(a.png, visualize_disparity(disp, range.min, range.max));
  std::cerr << "valid disparities " << disp.valid_count() << " of " << disp.values.size() << "\n";
}

// ------------------------------------------------------------ triangulate

struct TriangulateArgs {
  std::string disp, geom, out, colors;
};

void run_triangulate(const TriangulateArgs& a) {
  const StereoGeometry geom = read_geometry(a.geom);
  DisparityMap disp;
  disp.values = read_pfm(a.disp);
  disp.space = geom.grid ? DisparitySpace::kSpherical : DisparitySpace::kFrame;
  std::optional<ColorImage> colors;
  if (!a.colors.empty()) colors = read_png_color(a.colors);
  const PointCloud cloud = disparity_cloud(disp, geom, colors ? &*colors : nullptr);
  write_ply(cloud, a.out);
  std::cerr << "points " << cloud.size() << "\n";
}

// ------------------------------------------------------------------- eval

struct EvalArgs {
  std::string test, ref, out;
  std::optional<double> max_dist;
};

void run_eval(const EvalArgs& a) {
  const EvalReport r = evaluate_clouds(read_ply(a.test), read_ply(a.ref), a.max_dist);
  const Json j = eval_report_json(r);
  if (a.out.empty()) std::cout << j.dump(2) << "\n";
  else write_json_file(a.out, j);
}

// --------------------------------------------------------------- pipeline

struct PipelineArgs {
  std::string config;
  std::optional<int> jobs;
  bool print_defaults = false;
};

void run_pipeline_cmd(const PipelineArgs& a) {
  if (a.print_defaults) {
    std::cout << default_config_text();
    return;
  }
  if (a.config.empty()) throw ValidationFailure("a config file is required");
  PipelineConfig config = load_config(a.config);
  if (a.jobs) config.jobs = *a.jobs;
  const PipelineResult r = run_pipeline(config);
  std::cout << r.report.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frame and spherical epipolar stereo reconstruction"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Render a synthetic stereo pair with ground truth");
  s->add_option("--scene", synth.scene, "plane | ramp | steps | heightfield")->capture_default_str();
  s->add_option("--convergence", synth.convergence, "Degrees between principal rays")
      ->check(CLI::Range(0.0, 60.0))
      ->capture_default_str();
  s->add_option("--baseline", synth.baseline, "Meters")->capture_default_str();
  s->add_option("--focal", synth.focal, "Pixels")->capture_default_str();
  s->add_option("--width", synth.width)->capture_default_str();
  s->add_option("--height", synth.height)->capture_default_str();
  s->add_option("--depth", synth.depth, "Scene center depth, meters")->capture_default_str();
  s->add_option("--seed", synth.seed)->capture_default_str();
  s->add_option("--out", synth.out, "Output directory")->required();

  RectifyArgs rect;
  auto* r = app.add_subcommand("rectify", "Rectify a pair to frame or spherical epipolar images");
  r->add_option("--left", rect.left)->required()->check(CLI::ExistingFile);
  r->add_option("--right", rect.right)->required()->check(CLI::ExistingFile);
  r->add_option("--cameras", rect.cameras)->required()->check(CLI::ExistingFile);
  r->add_option("--mode", rect.mode, "frame | spherical")->capture_default_str();
  r->add_option("--extent", rect.extent, "fixed | bbox")->capture_default_str();
  r->add_option("--out", rect.out, "Output directory")->required();

  MatchArgs match;
  auto* m = app.add_subcommand("match", "Hierarchical SGM on an epipolar-aligned pair");
  m->add_option("--left", match.left)->required()->check(CLI::ExistingFile);
  m->add_option("--right", match.right)->required()->check(CLI::ExistingFile);
  m->add_option("--left-mask", match.left_mask)->check(CLI::ExistingFile);
  m->add_option("--right-mask", match.right_mask)->check(CLI::ExistingFile);
  m->add_option("--range", match.range, "Disparity search range min:max")->required();
  m->add_option("--params", match.params, "key = value SGM parameter file")
      ->check(CLI::ExistingFile);
  m->add_option("--space", match.space, "frame | spherical")->capture_default_str();
  m->add_option("--out", match.out, "Disparity PFM")->required();
  m->add_option("--png", match.png, "Optional disparity visualization");

  TriangulateArgs tri;
  auto* t = app.add_subcommand("triangulate", "Disparity map to point cloud");
  t->add_option("--disp", tri.disp)->required()->check(CLI::ExistingFile);
  t->add_option("--geom", tri.geom, "geometry.json from rectify")->required()->check(CLI::ExistingFile);
  t->add_option("--colors", tri.colors, "Color image aligned with the disparity map")
      ->check(CLI::ExistingFile);
  t->add_option("--out", tri.out, "PLY file")->required();

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Completeness and cloud-to-cloud distance");
  e->add_option("--test", eval.test)->required()->check(CLI::ExistingFile);
  e->add_option("--ref", eval.ref)->required()->check(CLI::ExistingFile);
  e->add_option("--max-dist", eval.max_dist, "Ignore distances above this, meters");
  e->add_option("--out", eval.out, "Report JSON (stdout when omitted)");

  PipelineArgs pipe;
  auto* p = app.add_subcommand("pipeline", "Run the configured pairs end to end");
  p->add_option("config", pipe.config, "Configuration file");
  p->add_option("--jobs", pipe.jobs, "Pairs processed concurrently")->check(CLI::PositiveNumber);
  p->add_flag("--print-defaults", pipe.print_defaults, "Print documented defaults and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& ok) {
    return app.exit(ok);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitValidation;
  }

  try {
    if (*s) run_synth(synth);
    else if (*r) run_rectify(rect);
    else if (*m) run_match(match);
    else if (*t) run_triangulate(tri);
    else if (*e) run_eval(eval);
    else if (*p) run_pipeline_cmd(pipe);
  } catch (const ValidationFailure& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitValidation;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return err.code() == ErrorCode::kValidation ? kExitValidation : kExitRuntime;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}

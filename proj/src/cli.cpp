// Copyright Contributors to the posecast project
// SPDX-License-Identifier: Apache-2.0
//
#include "posecast/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "posecast/fitter.hpp"
#include "posecast/io.hpp"

namespace posecast::cli {

namespace {

using io::json;

enum class LogLevel { Quiet, Info, Debug };

LogLevel log_level() {
  const char* env = std::getenv("POSECAST_LOG");
  if (!env) return LogLevel::Quiet;
  const std::string v(env);
  if (v == "debug") return LogLevel::Debug;
  if (v == "info") return LogLevel::Info;
  return LogLevel::Quiet;
}

struct SceneFlags {
  std::string template_path;
  std::string pose_path;
  std::string camera_path;
  int width = 64;
  int height = 64;
  int samples = 32;
  int threads = 1;
  std::uint64_t seed = 0;
};

void add_scene_flags(CLI::App& cmd, SceneFlags& f, bool with_pose = true) {
  cmd.add_option("--template", f.template_path, "Template JSON (default: built-in humanoid)");
  if (with_pose) cmd.add_option("--pose", f.pose_path, "Pose JSON (default: identity pose)");
  cmd.add_option("--camera", f.camera_path, "Camera JSON (default: built-in camera)");
  cmd.add_option("--width", f.width, "Image width in pixels")->check(CLI::Range(1, 8192));
  cmd.add_option("--height", f.height, "Image height in pixels")->check(CLI::Range(1, 8192));
  cmd.add_option("--samples", f.samples, "Samples per ray (>= 2)")->check(CLI::Range(2, 1 << 16));
  cmd.add_option("--threads", f.threads, "Renderer worker threads")->check(CLI::Range(1, 256));
  cmd.add_option("--seed", f.seed, "RNG seed");
}

Template load_template_or_default(const SceneFlags& f) {
  return f.template_path.empty() ? default_human_template() : io::load_template(f.template_path);
}

Camera load_camera_or_default(const SceneFlags& f) {
  return f.camera_path.empty() ? Camera{} : io::load_camera(f.camera_path);
}

std::optional<Posed> load_pose_if_given(const std::string& path, std::size_t parts) {
  if (path.empty()) return std::nullopt;
  Posed pose = io::load_pose(path);
  if (pose.size() != parts) {
    raise(ErrorCode::Parse, "'" + path + "': pose has " + std::to_string(pose.size()) + " parts, template has " +
                                std::to_string(parts));
  }
  return pose;
}

RenderSettings settings_from(const SceneFlags& f) {
  RenderSettings s;
  s.width = f.width;
  s.height = f.height;
  s.samples_per_ray = f.samples;
  s.threads = f.threads;
  return s;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::Io: return kIoError;
    case ErrorCode::NonFiniteUpdate: return kNonFinite;
    default: return kParseError;
  }
}

// ---------------------------------------------------------------- render

struct RenderCmd {
  SceneFlags scene;
  std::string out = "render.ppm";
};

int cmd_render(const RenderCmd& c, std::ostream& out) {
  const Template tmpl = load_template_or_default(c.scene);
  const Camera cam = load_camera_or_default(c.scene);
  const Posed pose = load_pose_if_given(c.scene.pose_path, tmpl.size()).value_or(Posed::identity(tmpl.size()));
  const RenderSettings settings = settings_from(c.scene);
  validate(settings);
  const ImageBuffer img = render(apply_pose(tmpl, pose), cam, settings);
  io::write_ppm(c.out, img);

  const double n = static_cast<double>(img.pixel_count());
  json stats{{"output", c.out},
             {"width", img.width},
             {"height", img.height},
             {"mean_alpha", img.alpha.sum() / n},
             {"max_alpha", img.alpha.maxCoeff()},
             {"covered_fraction", static_cast<double>((img.alpha.array() > 0.5).count()) / n}};
  out << stats.dump() << '\n';
  return kOk;
}

// ------------------------------------------------------------- gradcheck

struct GradcheckCmd {
  SceneFlags scene;
  std::string target_path;
  double eps = 1e-5;
  int iter = 0;
  double threshold = 1e-3;
  bool sabotage = false;
};

int cmd_gradcheck(const GradcheckCmd& c, std::ostream& out, std::ostream& err) {
  if (!(c.eps >= 1e-8 && c.eps <= 1e-2)) {
    err << "gradcheck: --eps " << c.eps << " outside [1e-8, 1e-2]\n";
    return kParseError;
  }
  Scene scene;
  scene.tmpl = load_template_or_default(c.scene);
  scene.camera = load_camera_or_default(c.scene);
  scene.settings = settings_from(c.scene);
  validate(scene.settings);
  if (!c.target_path.empty()) {
    scene.target = io::read_ppm(c.target_path);
    if (scene.target.width != scene.settings.width || scene.target.height != scene.settings.height) {
      err << "gradcheck: target '" << c.target_path << "' is " << scene.target.width << "x" << scene.target.height
          << ", expected " << scene.settings.width << "x" << scene.settings.height << '\n';
      return kParseError;
    }
  } else {
    scene.target = render(apply_pose(scene.tmpl, Posed::identity(scene.tmpl.size())), scene.camera, scene.settings);
  }
  const Posed pose = load_pose_if_given(c.scene.pose_path, scene.tmpl.size())
                         .value_or(sample_probe_pose(c.scene.seed, scene));

  const PoseObjective objective(scene, c.iter);
  const ParamVector p = to_params(pose);
  ParamVector analytic(p.size());
  objective.value_and_gradient(p, analytic);
  if (c.sabotage) analytic[0] = 2.0 * analytic[0] + 1.0;  // harness self-test
  const GradientReport report =
      finite_diff_check([&](const ParamVector& q) { return objective.value(q); }, analytic, p, c.eps);

  json j = io::gradient_report_to_json(report);
  j["threshold"] = c.threshold;
  j["pass"] = report.max_rel_err < c.threshold;
  out << j.dump() << '\n';
  return report.max_rel_err < c.threshold ? kOk : kCheckFailed;
}

// ------------------------------------------------------------------- fit

struct FitCmd {
  SceneFlags scene;
  bool out_given = false;
  std::string target_path;
  std::string init_path;
  std::string out = "fit_pose.json";
  std::string log_path;
  std::string side_by_side_path;
  int iters = 800;
  double lr = 0.01;
  bool no_early_stop = false;
  bool no_rotation_prior = false;
  bool experiment = false;
  int seeds = 10;
};

int cmd_experiment(const FitCmd& c, std::ostream& out, std::ostream& err, bool width_set, bool height_set) {
  SynthConfig config;
  if (width_set) config.width = c.scene.width;
  if (height_set) config.height = c.scene.height;
  config.samples = c.scene.samples;
  config.threads = c.scene.threads;
  config.iters = c.iters;
  json runs = json::array();
  int converged = 0;
  for (int s = 0; s < c.seeds; ++s) {
    const SynthReport r = synth_experiment(static_cast<std::uint64_t>(s), config);
    if (log_level() != LogLevel::Quiet) {
      err << "seed " << s << ": mse " << r.final_mse << ", mean rotation error " << r.mean_rotation_error << '\n';
    }
    converged += r.converged ? 1 : 0;
    json row{{"seed", r.seed},
             {"initial_mse", r.initial_mse},
             {"final_mse", r.final_mse},
             {"mean_rotation_error", r.mean_rotation_error},
             {"max_scale_error", r.max_scale_error},
             {"iterations", r.iterations},
             {"converged", r.converged}};
    runs.push_back(std::move(row));
  }
  json summary{{"width", config.width},
               {"height", config.height},
               {"samples", config.samples},
               {"iters", config.iters},
               {"lr", config.lr},
               {"runs", runs},
               {"converged", converged}};
  if (c.out_given) io::write_json(c.out, summary);
  out << summary.dump(2) << '\n';
  return converged == c.seeds ? kOk : kCheckFailed;
}

int cmd_fit(const FitCmd& c, std::ostream& out, std::ostream& err, bool width_set, bool height_set) {
  if (c.experiment) return cmd_experiment(c, out, err, width_set, height_set);
  if (c.target_path.empty()) {
    err << "fit: --target is required unless --experiment is given\n";
    return kParseError;
  }
  const Template tmpl = load_template_or_default(c.scene);
  const Camera cam = load_camera_or_default(c.scene);
  const ImageBuffer target = io::read_ppm(c.target_path);
  RenderSettings settings = settings_from(c.scene);
  if (!width_set) settings.width = target.width;
  if (!height_set) settings.height = target.height;
  if (target.width != settings.width || target.height != settings.height) {
    err << "fit: target '" << c.target_path << "' is " << target.width << "x" << target.height << ", expected "
        << settings.width << "x" << settings.height << '\n';
    return kParseError;
  }
  validate(settings);
  const Posed init = load_pose_if_given(c.init_path.empty() ? c.scene.pose_path : c.init_path, tmpl.size())
                         .value_or(Posed::identity(tmpl.size()));

  FitOptions opts;
  opts.iters = c.iters;
  opts.lr = c.lr;
  opts.seed = c.scene.seed;
  opts.early_stop = !c.no_early_stop;
  opts.terms.rotation = !c.no_rotation_prior;
  const FitResult result = fit_pose(target, tmpl, cam, settings, init, opts);
  if (log_level() == LogLevel::Debug) {
    for (const auto& e : result.log) err << "iter " << e.iter << " total " << e.loss.total << '\n';
  }

  io::write_json(c.out, io::pose_to_json(result.pose));
  if (!c.log_path.empty()) {
    std::ofstream log(c.log_path);
    if (!log) raise(ErrorCode::Io, "cannot write '" + c.log_path + "'");
    io::write_fit_log_csv(log, result.log);
    if (!log) raise(ErrorCode::Io, "failed writing '" + c.log_path + "'");
  }
  if (!c.side_by_side_path.empty()) {
    const ImageBuffer fitted = render(apply_pose(tmpl, result.pose), cam, settings);
    io::write_ppm(c.side_by_side_path, io::side_by_side(target, fitted));
  }
  json summary = io::fit_result_to_json(result);
  summary.erase("log");
  out << summary.dump() << '\n';
  if (result.aborted) {
    err << "fit: " << *result.aborted << '\n';
    return kNonFinite;
  }
  return result.converged ? kOk : kCheckFailed;
}

// ------------------------------------------------------------- templates

struct TemplateValidateCmd {
  std::string template_path;
  std::string write_path;
};

int cmd_template_validate(const TemplateValidateCmd& c, std::ostream& out) {
  const Template tmpl = c.template_path.empty() ? default_human_template() : io::load_template(c.template_path);
  validate(tmpl);
  if (!c.write_path.empty()) io::write_json(c.write_path, io::template_to_json(tmpl));
  out << json{{"valid", true}, {"parts", tmpl.size()}}.dump() << '\n';
  return kOk;
}

struct ExportGridCmd {
  SceneFlags scene;
  std::string out = "grid.json";
  int resolution = 32;
  std::vector<double> lo{-1.0, -1.0, -1.0};
  std::vector<double> hi{1.0, 1.0, 1.0};
};

int cmd_export_grid(const ExportGridCmd& c, std::ostream& out) {
  const Template tmpl = load_template_or_default(c.scene);
  const Posed pose = load_pose_if_given(c.scene.pose_path, tmpl.size()).value_or(Posed::identity(tmpl.size()));
  const Vec3d lo(c.lo[0], c.lo[1], c.lo[2]);
  const Vec3d hi(c.hi[0], c.hi[1], c.hi[2]);
  const io::OccupancyGrid grid = io::rasterize_occupancy(apply_pose(tmpl, pose), c.resolution, lo, hi);
  io::write_json(c.out, io::grid_to_json(grid));
  out << json{{"output", c.out}, {"resolution", c.resolution}, {"cells", grid.values.size()}}.dump() << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"posecast: render, differentiate and fit a Gaussian-ellipsoid body template"};
  app.require_subcommand(1);

  RenderCmd render_cmd;
  auto* render_app = app.add_subcommand("render", "Render a posed template to a binary PPM");
  add_scene_flags(*render_app, render_cmd.scene);
  render_app->add_option("--out", render_cmd.out, "Output PPM path");

  GradcheckCmd grad_cmd;
  grad_cmd.scene.width = 32;
  grad_cmd.scene.height = 32;
  auto* grad_app = app.add_subcommand("gradcheck", "Compare analytic and central-difference gradients");
  add_scene_flags(*grad_app, grad_cmd.scene);
  grad_app->add_option("--target", grad_cmd.target_path, "Target PPM (default: render of the identity pose)");
  grad_app->add_option("--eps", grad_cmd.eps, "Central-difference step, in [1e-8, 1e-2]");
  grad_app->add_option("--iter", grad_cmd.iter, "Iteration used for the rotation weight")->check(CLI::NonNegativeNumber);
  grad_app->add_option("--threshold", grad_cmd.threshold, "Pass threshold on max relative error");
  grad_app->add_flag("--sabotage", grad_cmd.sabotage, "Corrupt one analytic component (self-test)");

  FitCmd fit_cmd;
  auto* fit_app = app.add_subcommand("fit", "Recover a pose from a target image with Adam");
  add_scene_flags(*fit_app, fit_cmd.scene, false);
  fit_app->add_option("--target", fit_cmd.target_path, "Target PPM");
  fit_app->add_option("--init,--pose", fit_cmd.init_path, "Initial pose JSON (default: identity)");
  fit_app->add_option("--out", fit_cmd.out, "Fitted pose JSON (experiment: summary JSON)");
  fit_app->add_option("--log", fit_cmd.log_path, "Per-iteration CSV log");
  fit_app->add_option("--side-by-side", fit_cmd.side_by_side_path, "Target|fit comparison PPM");
  fit_app->add_option("--iters", fit_cmd.iters, "Adam iterations")->check(CLI::NonNegativeNumber);
  fit_app->add_option("--lr", fit_cmd.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  fit_app->add_flag("--no-early-stop", fit_cmd.no_early_stop, "Run every iteration even once converged");
  fit_app->add_flag("--no-rotation-prior", fit_cmd.no_rotation_prior, "Drop the decaying rotation-norm term");
  fit_app->add_flag("--experiment", fit_cmd.experiment, "Run the synthetic recovery experiment instead");
  fit_app->add_option("--seeds", fit_cmd.seeds, "Experiment seeds 0..N-1")->check(CLI::Range(1, 1000));

  TemplateValidateCmd tv_cmd;
  auto* tv_app = app.add_subcommand("template-validate", "Parse and validate a template JSON");
  tv_app->add_option("--template", tv_cmd.template_path, "Template JSON (default: built-in humanoid)");
  tv_app->add_option("--write", tv_cmd.write_path, "Also write the canonical serialization here");

  ExportGridCmd grid_cmd;
  auto* grid_app = app.add_subcommand("template-export-grid", "Rasterize composite occupancy to a dense grid");
  add_scene_flags(*grid_app, grid_cmd.scene);
  grid_app->add_option("--out", grid_cmd.out, "Output grid JSON");
  grid_app->add_option("--resolution", grid_cmd.resolution, "Cells per axis")->check(CLI::Range(1, 512));
  grid_app->add_option("--lo", grid_cmd.lo, "Lower grid corner")->expected(3);
  grid_app->add_option("--hi", grid_cmd.hi, "Upper grid corner")->expected(3);

  std::vector<std::string> argv_store = args;
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kParseError;
  }

  try {
    if (render_app->parsed()) return cmd_render(render_cmd, out);
    if (grad_app->parsed()) return cmd_gradcheck(grad_cmd, out, err);
    if (fit_app->parsed()) {
      fit_cmd.out_given = fit_app->count("--out") > 0;
      return cmd_fit(fit_cmd, out, err, fit_app->count("--width") > 0, fit_app->count("--height") > 0);
    }
    if (tv_app->parsed()) return cmd_template_validate(tv_cmd, out);
    if (grid_app->parsed()) return cmd_export_grid(grid_cmd, out);
  } catch (const Error& e) {
    err << "posecast: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "posecast: " << e.what() << '\n';
    return kParseError;
  }
  return kParseError;
}

int run(int argc, char** argv) {
  return run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

}  // namespace posecast::cli

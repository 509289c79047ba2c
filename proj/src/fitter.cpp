// Copyright Contributors to the posecast project
// SPDX-License-Identifier: Apache-2.0
//
#include "posecast/fitter.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

namespace posecast {

AdamState AdamState::zeros(Eigen::Index n, const AdamOptions& hyper) {
  AdamState s;
  s.m = ParamVector::Zero(n);
  s.v = ParamVector::Zero(n);
  s.hyper = hyper;
  return s;
}

AdamUpdate adam_step(const AdamState& state, const ParamVector& p, const ParamVector& g,
                     std::optional<std::size_t> parts) {
  if (p.size() != g.size() || state.m.size() != p.size() || state.v.size() != p.size()) {
    raise(ErrorCode::DimensionMismatch, "adam state, parameters and gradient differ in length");
  }
  const AdamOptions& h = state.hyper;
  AdamUpdate out{state, p};
  AdamState& s = out.state;
  s.step += 1;
  s.m = h.beta1 * state.m + (1.0 - h.beta1) * g;
  s.v = h.beta2 * state.v + (1.0 - h.beta2) * g.cwiseProduct(g);
  const double c1 = 1.0 - std::pow(h.beta1, s.step);
  const double c2 = 1.0 - std::pow(h.beta2, s.step);
  out.params = p - h.lr * ((s.m / c1).array() / ((s.v / c2).array().sqrt() + h.epsilon)).matrix();
  if (parts) {
    out.params.segment(scale_offset(*parts, 0), static_cast<Eigen::Index>(3 * *parts)) =
        out.params.segment(scale_offset(*parts, 0), static_cast<Eigen::Index>(3 * *parts))
            .cwiseMax(kMinScale)
            .cwiseMin(kMaxScale);
  }
  if (!out.params.allFinite()) raise(ErrorCode::NonFiniteUpdate, "Adam produced non-finite parameters");
  return out;
}

FitResult fit_pose(const ImageBuffer& target, const Template& tmpl, const Camera& cam,
                   const RenderSettings& settings, const Posed& init, const FitOptions& opts) {
  validate(tmpl);
  if (target.width != settings.width || target.height != settings.height) {
    raise(ErrorCode::DimensionMismatch, "target is " + std::to_string(target.width) + "x" +
                                            std::to_string(target.height) + ", render settings are " +
                                            std::to_string(settings.width) + "x" + std::to_string(settings.height));
  }
  if (opts.iters < 0) raise(ErrorCode::InvalidArgument, "iteration count must be non-negative");

  const auto start = std::chrono::steady_clock::now();
  Scene scene{tmpl, cam, settings, target};
  scene.settings.threads = std::max(opts.threads, settings.threads);
  PoseObjective objective(scene, 0, opts.terms);

  AdamOptions hyper;
  hyper.lr = opts.lr;
  const std::size_t k = tmpl.size();
  ParamVector p = to_params(init);
  AdamState state = AdamState::zeros(p.size(), hyper);

  FitResult result;
  result.seed = opts.seed;
  result.log.reserve(static_cast<std::size_t>(opts.iters));
  double best = std::numeric_limits<double>::infinity();
  int iter = 0;
  ParamVector grad(p.size());
  for (; iter < opts.iters; ++iter) {
    objective.set_iteration(iter);
    const LossBreakdown loss = objective.evaluate(p, &grad).loss;
    if (!std::isfinite(loss.total) || !grad.allFinite()) {
      result.aborted = "non-finite loss or gradient at iteration " + std::to_string(iter);
      break;
    }
    best = std::min(best, loss.total);
    result.log.push_back({iter, loss, grad.norm(), best});
    if (opts.early_stop && loss.recon < opts.convergence_threshold) break;
    try {
      AdamUpdate up = adam_step(state, p, grad, k);
      state = std::move(up.state);
      p = std::move(up.params);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFiniteUpdate) throw;
      result.aborted = std::string(e.what()) + " at iteration " + std::to_string(iter);
      break;
    }
  }

  result.pose = from_params<double>(p, k);
  objective.set_iteration(std::min(iter, opts.iters));
  result.final_loss = objective.evaluate(p, nullptr).loss;
  result.converged = !result.aborted && std::isfinite(result.final_loss.total) &&
                     result.final_loss.recon < opts.convergence_threshold;
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::vector<double> rotation_errors(const Posed& estimate, const Posed& truth) {
  if (estimate.size() != truth.size()) raise(ErrorCode::DimensionMismatch, "poses differ in part count");
  std::vector<double> err(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    err[i] = geodesic_angle(rodrigues(estimate.rotations[i]), rodrigues(truth.rotations[i]));
  }
  return err;
}

namespace {

Vec3d uniform_in_ball(std::mt19937_64& rng, double radius) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  while (true) {
    const Vec3d v(u(rng), u(rng), u(rng));
    if (v.squaredNorm() <= 1.0) return radius * v;
  }
}

}  // namespace

Posed sample_pose(std::uint64_t seed, std::size_t parts, const PoseSampling& sampling) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> scale(sampling.min_scale, sampling.max_scale);
  std::uniform_real_distribution<double> shift(-sampling.max_translation, sampling.max_translation);
  Posed pose = Posed::identity(parts);
  for (std::size_t i = 0; i < parts; ++i) {
    pose.rotations[i] = uniform_in_ball(rng, sampling.max_rotation);
    for (int c = 0; c < 3; ++c) pose.scales[i][c] = scale(rng);
  }
  if (sampling.max_translation > 0.0) {
    for (int c = 0; c < 3; ++c) pose.translation[c] = shift(rng);
  }
  return pose;
}

Posed sample_probe_pose(std::uint64_t seed, const Scene& scene, const PoseSampling& sampling,
                        double min_clip_margin, int max_attempts) {
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const std::uint64_t s = attempt == 0 ? seed : seed * 1000003ULL + static_cast<std::uint64_t>(attempt);
    const Posed pose = sample_pose(s, scene.tmpl.size(), sampling);
    RenderStats stats;
    render_gaussians(prepare_gaussians(apply_pose(scene.tmpl, pose)), scene.camera, scene.settings, &stats);
    if (stats.clip_margin >= min_clip_margin) return pose;
  }
  raise(ErrorCode::InvalidArgument, "no pose clear of the clip point after " + std::to_string(max_attempts) + " attempts");
}

SynthReport synth_experiment(std::uint64_t seed, const SynthConfig& config) {
  const Template tmpl = default_human_template();
  const Camera cam;
  RenderSettings settings;
  settings.width = config.width;
  settings.height = config.height;
  settings.samples_per_ray = config.samples;
  settings.threads = config.threads;
  const std::size_t k = tmpl.size();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> scale_dist(config.min_scale, config.max_scale);
  std::uniform_real_distribution<double> factor_dist(1.0 - config.scale_perturbation,
                                                     1.0 + config.scale_perturbation);

  SynthReport report;
  report.seed = seed;
  report.truth = Posed::identity(k);
  for (std::size_t i = 0; i < k; ++i) {
    report.truth.rotations[i] = uniform_in_ball(rng, config.max_rotation);
    for (int c = 0; c < 3; ++c) report.truth.scales[i][c] = scale_dist(rng);
  }
  report.init = report.truth;
  for (std::size_t i = 0; i < k; ++i) {
    report.init.rotations[i] += uniform_in_ball(rng, config.rotation_perturbation);
    for (int c = 0; c < 3; ++c) report.init.scales[i][c] *= factor_dist(rng);
  }

  const ImageBuffer target = render(apply_pose(tmpl, report.truth), cam, settings);
  report.initial_mse = recon_loss(render(apply_pose(tmpl, report.init), cam, settings), target);

  FitOptions opts;
  opts.iters = config.iters;
  opts.lr = config.lr;
  opts.seed = seed;
  opts.terms = config.terms;
  const FitResult fit = fit_pose(target, tmpl, cam, settings, report.init, opts);

  report.fitted = fit.pose;
  report.iterations = static_cast<int>(fit.log.size());
  report.converged = fit.converged;
  report.final_mse = recon_loss(render(apply_pose(tmpl, fit.pose), cam, settings), target);
  report.rotation_errors = rotation_errors(fit.pose, report.truth);
  report.scale_errors.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    report.scale_errors[i] = (fit.pose.scales[i] - report.truth.scales[i]).cwiseAbs().maxCoeff();
  }
  report.mean_rotation_error =
      std::accumulate(report.rotation_errors.begin(), report.rotation_errors.end(), 0.0) / static_cast<double>(k);
  report.max_scale_error = *std::max_element(report.scale_errors.begin(), report.scale_errors.end());
  return report;
}

}  // namespace posecast

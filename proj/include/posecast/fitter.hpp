// Copyright Contributors to the posecast project
// SPDX-License-Identifier: Apache-2.0
//
// Analysis-by-synthesis pose recovery with Adam.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "posecast/autodiff.hpp"

namespace posecast {

struct AdamOptions {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  int step = 0;
  ParamVector m;
  ParamVector v;
  AdamOptions hyper;

  static AdamState zeros(Eigen::Index n, const AdamOptions& hyper = {});
};

struct AdamUpdate {
  AdamState state;
  ParamVector params;
};

/// One bias-corrected Adam update. When `parts` is given the scale block of
/// the pose layout is clamped to [kMinScale, kMaxScale] afterwards.
AdamUpdate adam_step(const AdamState& state, const ParamVector& p, const ParamVector& g,
                     std::optional<std::size_t> parts = std::nullopt);

struct FitOptions {
  int iters = 800;
  double lr = 0.01;
  std::uint64_t seed = 0;
  LossTerms terms;
  /// Stop as soon as the logged reconstruction loss falls below the threshold.
  bool early_stop = false;
  double convergence_threshold = 1e-3;
  int threads = 1;
};

struct FitLogEntry {
  int iter = 0;
  LossBreakdown loss;
  double grad_norm = 0.0;
  /// Minimum total loss over entries 0..iter.
  double best_total = 0.0;

  bool operator==(const FitLogEntry&) const = default;
};

struct FitResult {
  Posed pose;
  std::vector<FitLogEntry> log;
  /// Loss at the returned pose, evaluated at the iteration after the last step.
  LossBreakdown final_loss;
  bool converged = false;
  /// Set when the loop stopped on a non-finite update; the log is partial.
  std::optional<std::string> aborted;
  double wall_time = 0.0;
  std::uint64_t seed = 0;
};

/// Runs up to opts.iters Adam steps on the pose objective, logging the loss
/// breakdown before every step. converged means the reconstruction loss at
/// the returned pose is below opts.convergence_threshold.
FitResult fit_pose(const ImageBuffer& target, const Template& tmpl, const Camera& cam,
                   const RenderSettings& settings, const Posed& init, const FitOptions& opts = {});

struct SynthConfig {
  int width = 64;
  int height = 64;
  int samples = 32;
  int iters = 800;
  double lr = 0.01;
  double max_rotation = 0.5;
  double min_scale = 0.8;
  double max_scale = 1.25;
  double rotation_perturbation = 0.3;
  double scale_perturbation = 0.1;  // multiplicative, factor in [1 - x, 1 + x]
  int threads = 1;
  /// The rotation-norm prior pulls every part toward r = 0, away from the
  /// sampled ground truth, so it is off for recovery runs.
  LossTerms terms{.recon = true, .boundary = true, .rotation = false};
};

struct SynthReport {
  std::uint64_t seed = 0;
  double final_mse = 0.0;
  double initial_mse = 0.0;
  std::vector<double> rotation_errors;  // geodesic, radians, per part
  std::vector<double> scale_errors;     // max abs component error, per part
  double mean_rotation_error = 0.0;
  double max_scale_error = 0.0;
  int iterations = 0;
  bool converged = false;
  Posed truth;
  Posed init;
  Posed fitted;
};

/// Samples a ground-truth pose from the seed, renders it with the default
/// template and camera, perturbs it and fits the perturbed pose back.
SynthReport synth_experiment(std::uint64_t seed, const SynthConfig& config = {});

struct PoseSampling {
  double max_rotation = 0.5;  // rotations uniform in the ball of this radius
  double min_scale = 0.8;
  double max_scale = 1.25;
  double max_translation = 0.0;  // per component, uniform in [-x, x]
};

/// Deterministic random pose for a given seed.
Posed sample_pose(std::uint64_t seed, std::size_t parts, const PoseSampling& sampling = {});

/// Draws poses (seed, then derived seeds) until every composite occupancy
/// and colour value rendered for `scene` stays at least `min_clip_margin`
/// away from the clip point, so central differences are valid there.
Posed sample_probe_pose(std::uint64_t seed, const Scene& scene, const PoseSampling& sampling = {},
                        double min_clip_margin = 1e-3, int max_attempts = 1000);

/// Geodesic error per part between two poses.
std::vector<double> rotation_errors(const Posed& estimate, const Posed& truth);

}  // namespace posecast

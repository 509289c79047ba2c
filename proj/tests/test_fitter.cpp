// Copyright Contributors to the posecast project
// SPDX-License-Identifier: Apache-2.0
//
#include <doctest.h>

#include "posecast/fitter.hpp"
#include "support.hpp"

using namespace posecast;
using posecast::testing::Rng;

namespace {

RenderSettings settings_of(int size, int samples = 16) {
  RenderSettings s;
  s.width = size;
  s.height = size;
  s.samples_per_ray = samples;
  return s;
}

}  // namespace

TEST_SUITE("fitter") {

TEST_CASE("adam leaves parameters alone under zero gradient") {
  Rng rng(61);
  ParamVector p(9);
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = posecast::testing::uniform(rng, -1, 1);
  const ParamVector start = p;
  AdamState s = AdamState::zeros(p.size());
  for (int n = 0; n < 20; ++n) {
    AdamUpdate up = adam_step(s, p, ParamVector::Zero(p.size()));
    s = up.state;
    p = up.params;
  }
  CHECK(p == start);
  CHECK(s.step == 20);
}

TEST_CASE("first adam step moves by the learning rate") {
  const ParamVector p = ParamVector::Zero(4);
  const ParamVector g = (ParamVector(4) << 3.0, -0.5, 1e-3, -200.0).finished();
  const AdamUpdate up = adam_step(AdamState::zeros(4), p, g);
  // m_hat = g and v_hat = g^2, so the step is lr * g / (|g| + eps).
  for (int i = 0; i < 4; ++i) {
    const double expected = -0.01 * g[i] / (std::abs(g[i]) + 1e-8);
    CHECK(up.params[i] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(up.params[i] + 0.01 * (g[i] > 0 ? 1 : -1)) < 1e-7);
  }
  CHECK(up.state.v.minCoeff() >= 0.0);
}

TEST_CASE("adam minimizes a convex bowl") {
  Rng rng(62);
  ParamVector p(6);
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = posecast::testing::uniform(rng, -1, 1);
  AdamOptions hyper;
  hyper.lr = 0.05;
  AdamState s = AdamState::zeros(p.size(), hyper);
  for (int n = 0; n < 500; ++n) {
    AdamUpdate up = adam_step(s, p, 2.0 * p);
    s = up.state;
    p = up.params;
  }
  CHECK(p.norm() < 1e-3);
}

TEST_CASE("adam clamps the scale block and rejects non-finite updates") {
  const std::size_t k = 2;
  ParamVector p = to_params(Posed::identity(k));
  ParamVector g = ParamVector::Zero(p.size());
  g[scale_offset(k, 0)] = 1.0;
  g[scale_offset(k, 1) + 2] = -1.0;
  p[scale_offset(k, 0)] = kMinScale;
  p[scale_offset(k, 1) + 2] = kMaxScale;
  const AdamUpdate up = adam_step(AdamState::zeros(p.size()), p, g, k);
  CHECK(up.params[scale_offset(k, 0)] == kMinScale);
  CHECK(up.params[scale_offset(k, 1) + 2] == kMaxScale);

  g[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    adam_step(AdamState::zeros(p.size()), p, g, k);
    FAIL("expected NonFiniteUpdate");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteUpdate);
  }
}

TEST_CASE("fitting a target rendered from the init pose converges immediately") {
  const Template t = default_human_template();
  Rng rng(63);
  const Posed init = posecast::testing::random_pose(rng, t.size(), 0.3, 0.9, 1.1);
  const RenderSettings s = settings_of(24);
  const ImageBuffer target = render(apply_pose(t, init), Camera{}, s);

  FitOptions opts;
  opts.iters = 50;
  opts.early_stop = true;
  const FitResult r = fit_pose(target, t, Camera{}, s, init, opts);
  CHECK(r.converged);
  CHECK(r.log.size() <= 5);
  CHECK(r.log.front().loss.recon < 1e-20);
  CHECK(to_params(r.pose) == to_params(init));
}

TEST_CASE("fit logs are reproducible and keep a running minimum") {
  const Template t = default_human_template();
  Rng rng(64);
  const Posed truth = posecast::testing::random_pose(rng, t.size(), 0.4, 0.9, 1.1);
  const RenderSettings s = settings_of(20);
  const ImageBuffer target = render(apply_pose(t, truth), Camera{}, s);
  FitOptions opts;
  opts.iters = 40;
  opts.seed = 9;
  const FitResult a = fit_pose(target, t, Camera{}, s, Posed::identity(t.size()), opts);
  const FitResult b = fit_pose(target, t, Camera{}, s, Posed::identity(t.size()), opts);
  REQUIRE(a.log.size() == 40);
  CHECK(a.log == b.log);
  CHECK(to_params(a.pose) == to_params(b.pose));
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].iter == static_cast<int>(i));
    CHECK(std::isfinite(a.log[i].loss.total));
    if (i > 0) CHECK(a.log[i].best_total <= a.log[i - 1].best_total);
    CHECK(a.log[i].best_total <= a.log[i].loss.total);
  }
  CHECK(a.log.back().loss.recon < a.log.front().loss.recon);
}

TEST_CASE("boundary term alone pulls the body into frame") {
  const Template t = default_human_template();
  Posed init = Posed::identity(t.size());
  init.translation = Vec3d(1.6, -0.4, 0.0);
  const RenderSettings s = settings_of(8, 4);
  const auto outside = project_anchors(apply_pose(t, init), Camera{});
  int count = 0;
  for (const auto& a : outside) count += (std::abs(a.ndc.x()) > 1 || std::abs(a.ndc.y()) > 1) ? 1 : 0;
  REQUIRE(count >= 4);

  FitOptions opts;
  opts.iters = 300;
  opts.terms = LossTerms{.recon = false, .boundary = true, .rotation = false};
  const FitResult r = fit_pose(ImageBuffer(8, 8), t, Camera{}, s, init, opts);
  CHECK(r.final_loss.boundary == 0.0);
  for (const auto& a : project_anchors(apply_pose(t, r.pose), Camera{})) {
    CHECK(std::abs(a.ndc.x()) <= 1.0);
    CHECK(std::abs(a.ndc.y()) <= 1.0);
  }
}

TEST_CASE("fit rejects a target of the wrong size") {
  const Template t = default_human_template();
  CHECK_THROWS_AS(fit_pose(ImageBuffer(10, 12), t, Camera{}, settings_of(10), Posed::identity(t.size())), Error);
}

TEST_CASE("synthetic experiment is deterministic") {
  SynthConfig c;
  c.width = 16;
  c.height = 16;
  c.samples = 12;
  c.iters = 15;
  const SynthReport a = synth_experiment(4, c);
  const SynthReport b = synth_experiment(4, c);
  CHECK(a.final_mse == b.final_mse);
  CHECK(a.rotation_errors == b.rotation_errors);
  CHECK(a.scale_errors == b.scale_errors);
  CHECK(to_params(a.fitted) == to_params(b.fitted));
  CHECK(a.iterations == 15);
  const SynthReport other = synth_experiment(5, c);
  CHECK(to_params(other.truth) != to_params(a.truth));
}

TEST_CASE("synthetic experiment with zero perturbation has zero error") {
  SynthConfig c;
  c.width = 16;
  c.height = 16;
  c.samples = 12;
  c.iters = 10;
  c.rotation_perturbation = 0.0;
  c.scale_perturbation = 0.0;
  const SynthReport r = synth_experiment(2, c);
  CHECK(to_params(r.init) == to_params(r.truth));
  CHECK(r.initial_mse == 0.0);
  CHECK(r.final_mse == 0.0);
  CHECK(r.mean_rotation_error == 0.0);
  CHECK(r.max_scale_error == 0.0);
}

TEST_CASE("pose sampling respects its ranges") {
  PoseSampling sampling;
  sampling.max_translation = 0.2;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Posed p = sample_pose(seed, 10, sampling);
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(p.rotations[i].norm() <= 0.5);
      CHECK(p.scales[i].minCoeff() >= 0.8);
      CHECK(p.scales[i].maxCoeff() <= 1.25);
    }
    CHECK(p.translation.cwiseAbs().maxCoeff() <= 0.2);
    CHECK(to_params(sample_pose(seed, 10, sampling)) == to_params(p));
  }
}

TEST_CASE("probe poses stay clear of the clip point") {
  Scene scene;
  scene.tmpl = default_human_template();
  scene.settings = settings_of(16, 16);
  const Posed p = sample_probe_pose(1, scene);
  RenderStats stats;
  render_gaussians(prepare_gaussians(apply_pose(scene.tmpl, p)), scene.camera, scene.settings, &stats);
  CHECK(stats.clip_margin >= 1e-3);
}

TEST_CASE("rotation errors are geodesic") {
  Posed a = Posed::identity(2);
  Posed b = Posed::identity(2);
  b.rotations[0] = Vec3d(0.2, 0, 0);
  a.rotations[1] = Vec3d(0, 0, M_PI);
  b.rotations[1] = Vec3d(0, 0, -M_PI);
  const auto e = rotation_errors(a, b);
  CHECK(e[0] == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(e[1] < 1e-7);
}

}  // TEST_SUITE

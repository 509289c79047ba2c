// Copyright Contributors to the posecast project
// SPDX-License-Identifier: Apache-2.0
//
// Shared generators and oracles for the test suites.
#pragma once

#include <filesystem>
#include <random>
#include <vector>

#include "posecast/camera.hpp"
#include "posecast/renderer.hpp"
#include "posecast/template.hpp"

namespace posecast::testing {

inline std::filesystem::path source_dir() { return POSECAST_SOURCE_DIR; }
inline std::filesystem::path golden_path() { return source_dir() / "tests" / "data" / "golden_default.ppm"; }

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline Vec3d random_vec(Rng& rng, double lo, double hi) {
  return {uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi)};
}

inline Vec3d random_in_ball(Rng& rng, double radius) {
  for (;;) {
    const Vec3d v = random_vec(rng, -1.0, 1.0);
    if (v.squaredNorm() <= 1.0) return radius * v;
  }
}

// Random rotation angle up to max_angle about a random unit axis.
inline Vec3d random_axis_angle(Rng& rng, double max_angle) {
  Vec3d axis;
  do {
    axis = random_vec(rng, -1.0, 1.0);
  } while (axis.norm() < 1e-3 || axis.norm() > 1.0);
  return axis.normalized() * uniform(rng, 0.0, max_angle);
}

inline Mat3d random_spd(Rng& rng) {
  Mat3d a;
  for (int i = 0; i < 9; ++i) a(i) = uniform(rng, -1.0, 1.0);
  return a * a.transpose() + 0.1 * Mat3d::Identity();
}

inline Mat3d random_invertible(Rng& rng) {
  for (;;) {
    Mat3d h;
    for (int i = 0; i < 9; ++i) h(i) = uniform(rng, -2.0, 2.0);
    if (std::abs(h.determinant()) > 0.1) return h;
  }
}

inline Posed random_pose(Rng& rng, std::size_t k, double max_angle, double smin, double smax,
                         double max_translation = 0.0) {
  Posed p = Posed::identity(k);
  for (std::size_t i = 0; i < k; ++i) {
    p.rotations[i] = random_axis_angle(rng, max_angle);
    p.scales[i] = Vec3d(uniform(rng, smin, smax), uniform(rng, smin, smax), uniform(rng, smin, smax));
  }
  if (max_translation > 0.0) p.translation = random_vec(rng, -max_translation, max_translation);
  return p;
}

inline GaussianPartd make_gaussian(const Vec3d& mean, const Vec3d& sigma, const Vec3d& colour) {
  GaussianPartd g;
  g.mean = mean;
  g.covariance = sigma.cwiseProduct(sigma).asDiagonal();
  g.base_colour = colour;
  return g;
}

inline TransformedTemplate<double> scene_of(std::vector<GaussianPartd> parts) {
  TransformedTemplate<double> tt;
  tt.parts = std::move(parts);
  return tt;
}

/// Straight-line scalar renderer used as an oracle for the production one.
ImageBuffer reference_render(const std::vector<GaussianPartd>& parts, const Camera& cam, int width, int height,
                             int samples, const Vec3d& background);

}  // namespace posecast::testing

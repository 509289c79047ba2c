// Copyright Contributors to the posecast project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <span>
#include <vector>

#include "posecast/renderer.hpp"
#include "posecast/template.hpp"

namespace posecast {

struct LossBreakdown {
  double recon = 0.0;
  double boundary = 0.0;
  double rot_reg = 0.0;
  double alpha = 0.0;
  double total = 0.0;

  bool operator==(const LossBreakdown&) const = default;
};

/// Mean over pixels of the squared RGB distance (channels summed). Alpha is
/// not compared.
double recon_loss(const ImageBuffer& rendered, const ImageBuffer& target);

/// d recon_loss / d rendered.rgb.
RgbBuffer recon_loss_gradient(const ImageBuffer& rendered, const ImageBuffer& target);

template <typename T>
T hinge_outside_unit(const T& v) {
  const double x = value_of(v);
  if (x > 1.0) return v;
  if (x < -1.0) return -v;
  return T(0.0);
}

/// Sum over points and axes of |coord| wherever |coord| > 1.
template <typename T>
T boundary_loss(std::span<const Vec2<T>> points) {
  T sum(0.0);
  for (const auto& p : points) sum += hinge_outside_unit(p.x()) + hinge_outside_unit(p.y());
  return sum;
}

/// Same, over projected anchors; anchors flagged behind the camera are skipped.
template <typename T>
T boundary_loss(std::span<const ProjectedAnchor<T>> anchors) {
  T sum(0.0);
  for (const auto& a : anchors) {
    if (a.behind_camera) continue;
    sum += hinge_outside_unit(a.ndc.x()) + hinge_outside_unit(a.ndc.y());
  }
  return sum;
}

/// Sum of per-part rotation vector norms (unweighted).
template <typename T>
T rotation_reg(const PoseParams<T>& pose) {
  T sum(0.0);
  for (const auto& r : pose.rotations) sum += safe_norm(r);
  return sum;
}

inline constexpr int kRotationDecayIters = 500;

/// Weight of the rotation regularizer: 1 at iteration 0, decaying linearly
/// to 0 at iteration 500 and staying there.
double alpha_schedule(int iter);

LossBreakdown total_loss(const ImageBuffer& rendered, const ImageBuffer& target,
                         std::span<const ProjectedAnchor<double>> anchors, const Posed& pose, int iter);

}  // namespace posecast

// Copyright Contributors to the posecast project
// SPDX-License-Identifier: Apache-2.0
//
#include "posecast/loss.hpp"

#include <algorithm>

namespace posecast {

namespace {

void check_same_size(const ImageBuffer& a, const ImageBuffer& b) {
  if (a.width != b.width || a.height != b.height) {
    raise(ErrorCode::DimensionMismatch, std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                                            std::to_string(b.width) + "x" + std::to_string(b.height));
  }
}

}  // namespace

double recon_loss(const ImageBuffer& rendered, const ImageBuffer& target) {
  check_same_size(rendered, target);
  if (rendered.pixel_count() == 0) return 0.0;
  return (rendered.rgb - target.rgb).squaredNorm() / static_cast<double>(rendered.pixel_count());
}

RgbBuffer recon_loss_gradient(const ImageBuffer& rendered, const ImageBuffer& target) {
  check_same_size(rendered, target);
  const double scale = rendered.pixel_count() == 0 ? 0.0 : 2.0 / static_cast<double>(rendered.pixel_count());
  return scale * (rendered.rgb - target.rgb);
}

double alpha_schedule(int iter) {
  if (iter < 0) raise(ErrorCode::InvalidArgument, "iteration must be non-negative");
  return std::max(0.0, 1.0 - static_cast<double>(iter) / kRotationDecayIters);
}

LossBreakdown total_loss(const ImageBuffer& rendered, const ImageBuffer& target,
                         std::span<const ProjectedAnchor<double>> anchors, const Posed& pose, int iter) {
  LossBreakdown b;
  b.recon = recon_loss(rendered, target);
  b.boundary = boundary_loss(anchors);
  b.rot_reg = rotation_reg(pose);
  b.alpha = alpha_schedule(iter);
  b.total = b.recon + b.boundary + b.alpha * b.rot_reg;
  return b;
}

}  // namespace posecast

// Copyright Contributors to the posecast project
// SPDX-License-Identifier: Apache-2.0
//
#include "posecast/geometry.hpp"

#include <string>

namespace posecast {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonPositiveScale: return "NonPositiveScale";
    case ErrorCode::SingularTransform: return "SingularTransform";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidTemplate: return "InvalidTemplate";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::NonFiniteObjective: return "NonFiniteObjective";
    case ErrorCode::NonFiniteUpdate: return "NonFiniteUpdate";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

void validate(const GaussianPartd& g) {
  if (!g.mean.allFinite() || !g.covariance.allFinite()) {
    raise(ErrorCode::InvalidArgument, "non-finite gaussian parameters");
  }
  if ((g.covariance - g.covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    raise(ErrorCode::InvalidArgument, "covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat3d> eig(g.covariance, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) {
    raise(ErrorCode::InvalidArgument, "covariance is not positive-definite");
  }
  if ((g.base_colour.array() < 0.0).any() || (g.base_colour.array() > 1.0).any()) {
    raise(ErrorCode::InvalidArgument, "base colour outside [0,1]");
  }
}

double geodesic_angle(const Mat3d& a, const Mat3d& b) {
  const Mat3d rel = a.transpose() * b;
  const Vec3d axis(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (rel.trace() - 1.0));
}

}  // namespace posecast

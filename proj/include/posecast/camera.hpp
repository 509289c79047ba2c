// Copyright Contributors to the posecast project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cmath>

#include "posecast/geometry.hpp"

namespace posecast {

template <typename T>
using Vec2 = Eigen::Matrix<T, 2, 1>;

/// Pinhole camera. Rays leave `position`; the view plane is the near plane.
struct Camera {
  Vec3d position{0.0, 0.0, 3.0};
  Vec3d look_at{0.0, 0.0, 0.0};
  Vec3d up{0.0, 1.0, 0.0};
  double vertical_fov = 38.6 * M_PI / 180.0;  // radians
  double near = 2.4;
  double far = 3.6;
};

/// Throws InvalidArgument on a degenerate camera.
void validate(const Camera& cam);

/// Orthonormal camera frame: forward points from position to look_at,
/// right and up span the view plane.
struct CameraFrame {
  Vec3d forward;
  Vec3d right;
  Vec3d up;
};

CameraFrame camera_frame(const Camera& cam);

/// Camera-space depth plus normalized image coordinates; the visible image
/// spans (-1, 1) on both axes with +y at the top row.
template <typename T>
struct Projection {
  Vec2<T> ndc;
  T depth;
};

template <typename T>
Projection<T> project_point(const Camera& cam, double aspect, const Vec3<T>& x) {
  const CameraFrame frame = camera_frame(cam);
  const double tan_half = std::tan(0.5 * cam.vertical_fov);
  const Vec3<T> v = x - cam.position.cast<T>();
  Projection<T> p;
  p.depth = v.dot(frame.forward.cast<T>());
  p.ndc.x() = v.dot(frame.right.cast<T>()) / (p.depth * T(tan_half * aspect));
  p.ndc.y() = v.dot(frame.up.cast<T>()) / (p.depth * T(tan_half));
  return p;
}

}  // namespace posecast

// Copyright Contributors to the posecast project
// SPDX-License-Identifier: Apache-2.0
//
#include "posecast/camera.hpp"

namespace posecast {

void validate(const Camera& cam) {
  if (!cam.position.allFinite() || !cam.look_at.allFinite() || !cam.up.allFinite()) {
    raise(ErrorCode::InvalidArgument, "camera vectors must be finite");
  }
  const Vec3d view = cam.look_at - cam.position;
  if (view.norm() < 1e-12) raise(ErrorCode::InvalidArgument, "camera look_at coincides with position");
  if (view.normalized().cross(cam.up).norm() < 1e-9) {
    raise(ErrorCode::InvalidArgument, "camera up is parallel to the view direction");
  }
  if (!(cam.vertical_fov > 0.0 && cam.vertical_fov < M_PI)) {
    raise(ErrorCode::InvalidArgument, "vertical fov must lie in (0, pi)");
  }
  if (!(cam.near > 0.0 && cam.far > cam.near)) {
    raise(ErrorCode::InvalidArgument, "camera requires far > near > 0");
  }
}

CameraFrame camera_frame(const Camera& cam) {
  CameraFrame f;
  f.forward = (cam.look_at - cam.position).normalized();
  f.right = f.forward.cross(cam.up).normalized();
  f.up = f.right.cross(f.forward);
  return f;
}

}  // namespace posecast

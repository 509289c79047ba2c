// Copyright Contributors to the posecast project
// SPDX-License-Identifier: Apache-2.0
//
#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "support.hpp"

namespace posecast::testing {

ImageBuffer reference_render(const std::vector<GaussianPartd>& parts, const Camera& cam, int width, int height,
                             int samples, const Vec3d& background) {
  const Vec3d forward = (cam.look_at - cam.position).normalized();
  const Vec3d right = forward.cross(cam.up).normalized();
  const Vec3d up = right.cross(forward);
  const double half_h = std::tan(cam.vertical_fov / 2.0);
  const double half_w = half_h * width / height;

  std::vector<Eigen::LLT<Mat3d>> factors;
  for (const auto& g : parts) factors.emplace_back(g.covariance);

  ImageBuffer img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = (x + 0.5) / width * 2.0 - 1.0;
      const double v = 1.0 - (y + 0.5) / height * 2.0;
      const Vec3d dir = (forward + u * half_w * right + v * half_h * up).normalized();
      const double cos_angle = dir.dot(forward);
      const double t0 = cam.near / cos_angle;
      const double t1 = cam.far / cos_angle;

      double trans = 1.0;
      double weight_sum = 0.0;
      Vec3d colour = Vec3d::Zero();
      for (int j = 0; j < samples; ++j) {
        const double t = t0 + j * (t1 - t0) / (samples - 1);
        const Vec3d p = cam.position + t * dir;
        double occ = 0.0;
        Vec3d col = Vec3d::Zero();
        for (std::size_t k = 0; k < parts.size(); ++k) {
          const Vec3d d = p - parts[k].mean;
          const double maha = d.dot(factors[k].solve(d));
          const double f = std::exp(-0.5 * maha);
          occ += f;
          col += f * parts[k].base_colour;
        }
        occ = std::min(occ, 1.0);
        for (int c = 0; c < 3; ++c) col[c] = std::min(col[c], 1.0);
        const double w = occ * trans;
        weight_sum += w;
        colour += w * col;
        trans *= 1.0 - occ;
      }
      const Eigen::Index i = img.index(x, y);
      img.rgb.row(i) = (colour + (1.0 - weight_sum) * background).transpose();
      img.alpha[i] = weight_sum;
    }
  }
  return img;
}

}  // namespace posecast::testing

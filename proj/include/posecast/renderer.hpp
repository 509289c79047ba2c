// Copyright Contributors to the posecast project
// SPDX-License-Identifier: Apache-2.0
//
// Emission-absorption ray casting over a posed template.
//
// Each pixel casts one ray from the camera through its centre on the near
// plane and takes J uniformly spaced samples up to the far plane. At every
// sample the part occupancies are summed and clipped to 1, the colour field
// sum(f_k * colour_k) is clipped per channel, and the samples are composited
// front to back with exclusive transmission T_j = prod_{i<j} (1 - f_i).
#pragma once

#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "posecast/camera.hpp"
#include "posecast/template.hpp"

namespace posecast {

struct RenderSettings {
  int width = 64;
  int height = 64;
  int samples_per_ray = 32;
  Vec3d background_colour = Vec3d::Zero();
  /// Worker threads for the pixel loop; output does not depend on it.
  int threads = 1;

  double aspect() const { return static_cast<double>(width) / height; }
};

void validate(const RenderSettings& settings);

using RgbBuffer = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Row-major image, row 0 at the top. rgb has one row per pixel.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  RgbBuffer rgb;
  Eigen::VectorXd alpha;

  ImageBuffer() = default;
  ImageBuffer(int w, int h) : width(w), height(h), rgb(RgbBuffer::Zero(static_cast<Eigen::Index>(w) * h, 3)),
                              alpha(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(w) * h)) {}

  Eigen::Index index(int x, int y) const { return static_cast<Eigen::Index>(y) * width + x; }
  Vec3d pixel(int x, int y) const { return rgb.row(index(x, y)).transpose(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

struct Ray {
  Vec3d origin;
  Vec3d direction;  // unit length
  double t_near = 0.0;
  double t_far = 0.0;

  double step(int samples) const { return (t_far - t_near) / (samples - 1); }
  double t_at(int j, int samples) const { return t_near + j * step(samples); }
  Vec3d at(int j, int samples) const { return origin + t_at(j, samples) * direction; }
};

/// Ray through the centre of pixel (x, y). t_near / t_far are where the ray
/// crosses the near and far planes.
Ray pixel_ray(const Camera& cam, const RenderSettings& settings, int x, int y);

/// One ray per pixel in row-major order.
std::vector<Ray> generate_rays(const Camera& cam, const RenderSettings& settings);

struct FieldSample {
  double occupancy = 0.0;
  Vec3d colour = Vec3d::Zero();
};

/// Clipped sum of part occupancies and of occupancy-weighted colours at x.
FieldSample composite_fields(const TransformedTemplate<double>& tt, const Vec3d& x);

/// Exclusive running product of (1 - f).
std::vector<double> transmission(std::span<const double> occupancies);

/// Part representation used by the ray marcher.
struct RenderGaussian {
  Vec3d mean;
  Mat3d precision;  // inverse covariance
  Vec3d colour;
};

std::vector<RenderGaussian> prepare_gaussians(const TransformedTemplate<double>& tt);

struct RenderStats {
  /// Smallest |v - 1| over every composite occupancy and colour channel
  /// evaluated; finite differences are unreliable when this is tiny.
  double clip_margin = std::numeric_limits<double>::infinity();
};

ImageBuffer render(const TransformedTemplate<double>& tt, const Camera& cam,
                   const RenderSettings& settings);

ImageBuffer render_gaussians(std::span<const RenderGaussian> parts, const Camera& cam,
                             const RenderSettings& settings, RenderStats* stats = nullptr);

/// Gradient of a scalar loss with respect to each part's mean and (full,
/// unsymmetrized) precision matrix.
struct GaussianGradient {
  std::vector<Vec3d> mean;
  std::vector<Mat3d> precision;

  explicit GaussianGradient(std::size_t k = 0)
      : mean(k, Vec3d::Zero()), precision(k, Mat3d::Zero()) {}
  GaussianGradient& operator+=(const GaussianGradient& other);
};

/// Reverse pass of render_gaussians: given dL/d(rgb) per pixel, returns
/// dL/d(mean) and dL/d(precision) for every part. The clip min(v, 1) is
/// differentiated with its left derivative (zero at and above 1).
GaussianGradient render_backward(std::span<const RenderGaussian> parts, const Camera& cam,
                                 const RenderSettings& settings, const RgbBuffer& d_rgb);

}  // namespace posecast

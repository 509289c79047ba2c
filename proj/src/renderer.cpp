// Copyright Contributors to the posecast project
// SPDX-License-Identifier: Apache-2.0
//
#include "posecast/renderer.hpp"

#include <algorithm>
#include <cmath>

#include "parallel.hpp"

namespace posecast {

void validate(const RenderSettings& settings) {
  if (settings.width < 1 || settings.height < 1) {
    raise(ErrorCode::InvalidArgument, "image dimensions must be at least 1x1");
  }
  if (settings.samples_per_ray < 2) {
    raise(ErrorCode::InvalidArgument, "samples per ray must be at least 2");
  }
  if ((settings.background_colour.array() < 0.0).any() || (settings.background_colour.array() > 1.0).any()) {
    raise(ErrorCode::InvalidArgument, "background colour outside [0,1]");
  }
  if (settings.threads < 1) raise(ErrorCode::InvalidArgument, "thread count must be positive");
}

Ray pixel_ray(const Camera& cam, const RenderSettings& settings, int x, int y) {
  const CameraFrame frame = camera_frame(cam);
  const double tan_half = std::tan(0.5 * cam.vertical_fov);
  const double ndc_x = (2.0 * (x + 0.5)) / settings.width - 1.0;
  const double ndc_y = 1.0 - (2.0 * (y + 0.5)) / settings.height;
  const Vec3d through = frame.forward + (ndc_x * tan_half * settings.aspect()) * frame.right +
                        (ndc_y * tan_half) * frame.up;
  Ray ray;
  ray.origin = cam.position;
  ray.direction = through.normalized();
  const double cos_axis = ray.direction.dot(frame.forward);
  ray.t_near = cam.near / cos_axis;
  ray.t_far = cam.far / cos_axis;
  return ray;
}

std::vector<Ray> generate_rays(const Camera& cam, const RenderSettings& settings) {
  std::vector<Ray> rays;
  rays.reserve(static_cast<std::size_t>(settings.width) * settings.height);
  for (int y = 0; y < settings.height; ++y) {
    for (int x = 0; x < settings.width; ++x) rays.push_back(pixel_ray(cam, settings, x, y));
  }
  return rays;
}

FieldSample composite_fields(const TransformedTemplate<double>& tt, const Vec3d& x) {
  double occupancy = 0.0;
  Vec3d colour = Vec3d::Zero();
  for (const auto& part : tt.parts) {
    const double f = occupancy_at(part, x);
    occupancy += f;
    colour += f * part.base_colour;
  }
  return {std::min(occupancy, 1.0), colour.cwiseMin(1.0)};
}

std::vector<double> transmission(std::span<const double> occupancies) {
  std::vector<double> t(occupancies.size());
  double running = 1.0;
  for (std::size_t j = 0; j < occupancies.size(); ++j) {
    t[j] = running;
    running *= 1.0 - occupancies[j];
  }
  return t;
}

std::vector<RenderGaussian> prepare_gaussians(const TransformedTemplate<double>& tt) {
  std::vector<RenderGaussian> out;
  out.reserve(tt.parts.size());
  for (const auto& p : tt.parts) out.push_back({p.mean, inverse3(p.covariance), p.base_colour});
  return out;
}

GaussianGradient& GaussianGradient::operator+=(const GaussianGradient& other) {
  for (std::size_t k = 0; k < mean.size(); ++k) {
    mean[k] += other.mean[k];
    precision[k] += other.precision[k];
  }
  return *this;
}

namespace {

// Along a ray x(t) = o + t d the Mahalanobis form of part k is the
// quadratic c + b t + a t^2, so each sample costs one exp per part.
struct RayQuadratic {
  double a, b, c;
  Vec3d q;  // origin - mean
};

void ray_quadratics(std::span<const RenderGaussian> parts, const Ray& ray, std::vector<RayQuadratic>& out) {
  out.resize(parts.size());
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Mat3d& p = parts[k].precision;
    const Vec3d q = ray.origin - parts[k].mean;
    const Vec3d pd = p * ray.direction;
    const Vec3d pq = p * q;
    out[k] = {ray.direction.dot(pd), q.dot(pd) + ray.direction.dot(pq), q.dot(pq), q};
  }
}

struct PixelResult {
  Vec3d rgb;
  double alpha;
  double clip_margin;
};

PixelResult march(std::span<const RenderGaussian> parts, const Ray& ray, int samples, const Vec3d& background,
                  std::vector<RayQuadratic>& quad) {
  ray_quadratics(parts, ray, quad);
  const double dt = ray.step(samples);
  Vec3d rgb = Vec3d::Zero();
  double alpha = 0.0;
  double trans = 1.0;
  double margin = std::numeric_limits<double>::infinity();
  for (int j = 0; j < samples; ++j) {
    const double t = ray.t_near + j * dt;
    double occ = 0.0;
    Vec3d col = Vec3d::Zero();
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const RayQuadratic& qk = quad[k];
      const double f = std::exp(-0.5 * (qk.c + t * (qk.b + t * qk.a)));
      occ += f;
      col += f * parts[k].colour;
    }
    margin = std::min({margin, std::abs(occ - 1.0), (col.array() - 1.0).abs().minCoeff()});
    const double f = std::min(occ, 1.0);
    const double w = trans * f;
    rgb += w * col.cwiseMin(1.0);
    alpha += w;
    trans *= 1.0 - f;
  }
  rgb += (1.0 - alpha) * background;
  return {rgb, alpha, margin};
}

}  // namespace

ImageBuffer render(const TransformedTemplate<double>& tt, const Camera& cam, const RenderSettings& settings) {
  const auto parts = prepare_gaussians(tt);
  return render_gaussians(parts, cam, settings);
}

ImageBuffer render_gaussians(std::span<const RenderGaussian> parts, const Camera& cam,
                             const RenderSettings& settings, RenderStats* stats) {
  validate(cam);
  validate(settings);
  ImageBuffer img(settings.width, settings.height);
  std::vector<double> row_margin(settings.height, std::numeric_limits<double>::infinity());
  detail::parallel_for(static_cast<std::size_t>(settings.height), settings.threads, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    std::vector<RayQuadratic> quad;
    for (int x = 0; x < settings.width; ++x) {
      const Ray ray = pixel_ray(cam, settings, x, y);
      const PixelResult px = march(parts, ray, settings.samples_per_ray, settings.background_colour, quad);
      const Eigen::Index i = img.index(x, y);
      img.rgb.row(i) = px.rgb.transpose();
      img.alpha[i] = px.alpha;
      row_margin[row] = std::min(row_margin[row], px.clip_margin);
    }
  });
  if (stats) stats->clip_margin = *std::min_element(row_margin.begin(), row_margin.end());
  return img;
}

namespace {

struct Workspace {
  std::vector<RayQuadratic> quad;
  std::vector<double> part_occ;  // samples x parts
  std::vector<double> occ_raw, occ, trans, err;
  std::vector<Vec3d> col_raw, col;
  std::vector<double> ga, gb, gc;
};

void backward_ray(std::span<const RenderGaussian> parts, const Ray& ray, int samples, const Vec3d& background,
                  const Vec3d& d_rgb, Workspace& ws, GaussianGradient& grad) {
  const std::size_t k_count = parts.size();
  const std::size_t n = static_cast<std::size_t>(samples);
  ray_quadratics(parts, ray, ws.quad);
  ws.part_occ.assign(n * k_count, 0.0);
  ws.occ_raw.assign(n, 0.0);
  ws.occ.assign(n, 0.0);
  ws.trans.assign(n, 0.0);
  ws.err.assign(n, 0.0);
  ws.col_raw.assign(n, Vec3d::Zero());
  ws.col.assign(n, Vec3d::Zero());

  const double dt = ray.step(samples);
  double trans = 1.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double t = ray.t_near + static_cast<double>(j) * dt;
    double occ = 0.0;
    Vec3d col = Vec3d::Zero();
    for (std::size_t k = 0; k < k_count; ++k) {
      const RayQuadratic& qk = ws.quad[k];
      const double f = std::exp(-0.5 * (qk.c + t * (qk.b + t * qk.a)));
      ws.part_occ[j * k_count + k] = f;
      occ += f;
      col += f * parts[k].colour;
    }
    ws.occ_raw[j] = occ;
    ws.col_raw[j] = col;
    ws.occ[j] = std::min(occ, 1.0);
    ws.col[j] = col.cwiseMin(1.0);
    ws.trans[j] = trans;
    trans *= 1.0 - ws.occ[j];
    // pixel = sum_j T_j f_j (col_j - bg) + bg
    ws.err[j] = d_rgb.dot(ws.col[j] - background);
  }

  ws.ga.assign(k_count, 0.0);
  ws.gb.assign(k_count, 0.0);
  ws.gc.assign(k_count, 0.0);
  // suffix = sum_{i>j} (T_i / T_{j+1}) f_i err_i, built back to front.
  double suffix = 0.0;
  for (std::size_t jj = n; jj-- > 0;) {
    const double f = ws.occ[jj];
    const double d_occ = ws.trans[jj] * (ws.err[jj] - suffix);
    const Vec3d d_col = (ws.trans[jj] * f) * d_rgb;
    suffix = f * ws.err[jj] + (1.0 - f) * suffix;

    const double d_occ_raw = ws.occ_raw[jj] < 1.0 ? d_occ : 0.0;
    Vec3d d_col_raw;
    for (int c = 0; c < 3; ++c) d_col_raw[c] = ws.col_raw[jj][c] < 1.0 ? d_col[c] : 0.0;
    if (d_occ_raw == 0.0 && d_col_raw.isZero()) continue;

    const double t = ray.t_near + static_cast<double>(jj) * dt;
    for (std::size_t k = 0; k < k_count; ++k) {
      const double d_fk = d_occ_raw + d_col_raw.dot(parts[k].colour);
      const double d_m = -0.5 * ws.part_occ[jj * k_count + k] * d_fk;
      ws.gc[k] += d_m;
      ws.gb[k] += d_m * t;
      ws.ga[k] += d_m * t * t;
    }
  }

  const Vec3d& d = ray.direction;
  for (std::size_t k = 0; k < k_count; ++k) {
    const Vec3d& q = ws.quad[k].q;
    const Mat3d& p = parts[k].precision;
    grad.precision[k] += ws.gc[k] * (q * q.transpose()) + ws.gb[k] * (q * d.transpose() + d * q.transpose()) +
                         ws.ga[k] * (d * d.transpose());
    grad.mean[k] -= (p + p.transpose()) * (ws.gc[k] * q + ws.gb[k] * d);
  }
}

}  // namespace

GaussianGradient render_backward(std::span<const RenderGaussian> parts, const Camera& cam,
                                 const RenderSettings& settings, const RgbBuffer& d_rgb) {
  validate(cam);
  validate(settings);
  const auto pixels = static_cast<Eigen::Index>(settings.width) * settings.height;
  if (d_rgb.rows() != pixels) {
    raise(ErrorCode::DimensionMismatch, "pixel gradient has " + std::to_string(d_rgb.rows()) +
                                            " rows, expected " + std::to_string(pixels));
  }
  // Per-row partial sums reduced in row order keep the result independent
  // of the thread count.
  std::vector<GaussianGradient> rows(settings.height, GaussianGradient(parts.size()));
  detail::parallel_for(static_cast<std::size_t>(settings.height), settings.threads, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    Workspace ws;
    for (int x = 0; x < settings.width; ++x) {
      const Eigen::Index i = static_cast<Eigen::Index>(y) * settings.width + x;
      const Vec3d g = d_rgb.row(i).transpose();
      if (g.isZero()) continue;
      backward_ray(parts, pixel_ray(cam, settings, x, y), settings.samples_per_ray, settings.background_colour, g,
                   ws, rows[row]);
    }
  });
  GaussianGradient total(parts.size());
  for (const auto& r : rows) total += r;
  return total;
}

}  // namespace posecast

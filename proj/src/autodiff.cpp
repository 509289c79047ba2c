// Copyright Contributors to the posecast project
// SPDX-License-Identifier: Apache-2.0
//
#include "posecast/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace posecast {

VectorX<ADScalar> seed(const ParamVector& p) {
  VectorX<ADScalar> out(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) out[i] = ADScalar(p[i], p.size(), i);
  return out;
}

void require_finite_gradient(const ParamVector& g) {
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) {
      raise(ErrorCode::NonFiniteGradient, "component " + std::to_string(i) + " = " + std::to_string(g[i]));
    }
  }
}

ParamVector gradient(const Objective& objective, const ParamVector& p) {
  ParamVector g(p.size());
  objective.value_and_gradient(p, g);
  require_finite_gradient(g);
  return g;
}

GradientReport finite_diff_check(const std::function<double(const ParamVector&)>& value, const ParamVector& analytic,
                                 const ParamVector& p, double eps) {
  if (!(eps >= 1e-8 && eps <= 1e-2)) {
    raise(ErrorCode::InvalidArgument, "finite-difference step " + std::to_string(eps) + " outside [1e-8, 1e-2]");
  }
  if (analytic.size() != p.size()) raise(ErrorCode::DimensionMismatch, "gradient and parameter sizes differ");
  GradientReport report;
  report.analytic = analytic;
  report.numeric = ParamVector::Zero(p.size());
  ParamVector probe = p;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    probe[i] = p[i] + eps;
    const double up = value(probe);
    probe[i] = p[i] - eps;
    const double down = value(probe);
    probe[i] = p[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      raise(ErrorCode::NonFiniteObjective, "probe along component " + std::to_string(i));
    }
    report.numeric[i] = (up - down) / (2.0 * eps);
  }
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double a = report.analytic[i];
    const double n = report.numeric[i];
    const double abs_err = std::abs(a - n);
    report.max_abs_err = std::max(report.max_abs_err, abs_err);
    report.max_rel_err = std::max(report.max_rel_err, abs_err / std::max({std::abs(a), std::abs(n), 1e-8}));
  }
  return report;
}

GradientReport finite_diff_check(const Objective& objective, const ParamVector& p, double eps) {
  ParamVector analytic(p.size());
  objective.value_and_gradient(p, analytic);
  return finite_diff_check([&](const ParamVector& q) { return objective.value(q); }, analytic, p, eps);
}

PoseObjective::PoseObjective(const Scene& scene, int iter, LossTerms terms)
    : scene_(scene), iter_(iter), terms_(terms) {
  if (terms_.recon && (scene.target.width != scene.settings.width || scene.target.height != scene.settings.height)) {
    raise(ErrorCode::DimensionMismatch, "target image does not match the render settings");
  }
}

double PoseObjective::value(const ParamVector& p) const { return evaluate(p, nullptr).loss.total; }

double PoseObjective::value_and_gradient(const ParamVector& p, ParamVector& grad) const {
  return evaluate(p, &grad).loss.total;
}

PoseEvaluation PoseObjective::evaluate(const ParamVector& p, ParamVector* grad) const {
  const std::size_t k = scene_.tmpl.size();
  const double aspect = scene_.settings.aspect();
  PoseEvaluation out;
  LossBreakdown& loss = out.loss;
  loss.alpha = alpha_schedule(iter_);

  if (!grad) {
    const Posed pose = from_params<double>(p, k);
    const auto tt = apply_pose(scene_.tmpl, pose);
    if (terms_.recon) {
      const auto parts = prepare_gaussians(tt);
      out.rendered = render_gaussians(parts, scene_.camera, scene_.settings, &out.stats);
      loss.recon = recon_loss(out.rendered, scene_.target);
    }
    if (terms_.boundary) {
      const auto anchors = project_anchors(tt, scene_.camera, aspect);
      loss.boundary = boundary_loss(std::span<const ProjectedAnchor<double>>(anchors));
    }
    if (terms_.rotation) loss.rot_reg = rotation_reg(pose);
    loss.total = loss.recon + loss.boundary + loss.alpha * loss.rot_reg;
    return out;
  }

  grad->setZero(p.size());
  const PoseParams<ADScalar> pose = from_params(seed(p), k);
  const auto tt = apply_pose(scene_.tmpl, pose);

  if (terms_.recon) {
    std::vector<Mat3<ADScalar>> precision(k);
    std::vector<RenderGaussian> parts(k);
    for (std::size_t i = 0; i < k; ++i) {
      precision[i] = inverse3(tt.parts[i].covariance);
      parts[i] = {values_of(tt.parts[i].mean), values_of(precision[i]), tt.parts[i].base_colour};
    }
    out.rendered = render_gaussians(parts, scene_.camera, scene_.settings, &out.stats);
    loss.recon = recon_loss(out.rendered, scene_.target);
    const GaussianGradient gg = render_backward(parts, scene_.camera, scene_.settings,
                                                recon_loss_gradient(out.rendered, scene_.target));
    for (std::size_t i = 0; i < k; ++i) {
      for (int r = 0; r < 3; ++r) {
        accumulate_derivatives(*grad, gg.mean[i][r], tt.parts[i].mean[r]);
        for (int c = 0; c < 3; ++c) accumulate_derivatives(*grad, gg.precision[i](r, c), precision[i](r, c));
      }
    }
  }
  if (terms_.boundary) {
    const auto anchors = project_anchors(tt, scene_.camera, aspect);
    const ADScalar b = boundary_loss(std::span<const ProjectedAnchor<ADScalar>>(anchors));
    loss.boundary = b.value();
    accumulate_derivatives(*grad, 1.0, b);
  }
  if (terms_.rotation) {
    const ADScalar r = rotation_reg(pose);
    loss.rot_reg = r.value();
    accumulate_derivatives(*grad, loss.alpha, r);
  }
  loss.total = loss.recon + loss.boundary + loss.alpha * loss.rot_reg;
  return out;
}

}  // namespace posecast

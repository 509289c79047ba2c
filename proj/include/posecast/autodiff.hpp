// Copyright Contributors to the posecast project
// SPDX-License-Identifier: Apache-2.0
//
// Gradients of scalar objectives over the flat pose vector
// [r_1..r_K | s_1..s_K | t], plus a central-difference checker.
//
// The pose-to-Gaussian chain (kinematics, projection, regularizers) is
// differentiated in forward mode with Eigen's AutoDiffScalar; the ray marcher
// supplies its own reverse pass. The two meet at each part's mean and
// precision matrix.
#pragma once

#include <concepts>
#include <functional>
#include <optional>
#include <type_traits>

#include <Eigen/Core>

#include "posecast/loss.hpp"
#include "posecast/renderer.hpp"
#include "posecast/template.hpp"

namespace posecast {

using ParamVector = Eigen::VectorXd;

template <typename T>
using VectorX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

inline Eigen::Index param_count(std::size_t parts) { return static_cast<Eigen::Index>(6 * parts + 3); }
inline Eigen::Index rotation_offset(std::size_t part) { return static_cast<Eigen::Index>(3 * part); }
inline Eigen::Index scale_offset(std::size_t parts, std::size_t part) {
  return static_cast<Eigen::Index>(3 * parts + 3 * part);
}
inline Eigen::Index translation_offset(std::size_t parts) { return static_cast<Eigen::Index>(6 * parts); }

template <typename T>
VectorX<T> to_params(const PoseParams<T>& pose) {
  const std::size_t k = pose.size();
  if (pose.scales.size() != k) raise(ErrorCode::DimensionMismatch, "rotation and scale counts differ");
  VectorX<T> p(param_count(k));
  for (std::size_t i = 0; i < k; ++i) {
    p.template segment<3>(rotation_offset(i)) = pose.rotations[i];
    p.template segment<3>(scale_offset(k, i)) = pose.scales[i];
  }
  p.template segment<3>(translation_offset(k)) = pose.translation;
  return p;
}

template <typename T>
PoseParams<T> from_params(const VectorX<T>& p, std::size_t parts) {
  if (p.size() != param_count(parts)) {
    raise(ErrorCode::DimensionMismatch, "parameter vector has length " + std::to_string(p.size()) +
                                            ", expected " + std::to_string(param_count(parts)));
  }
  PoseParams<T> pose;
  pose.rotations.resize(parts);
  pose.scales.resize(parts);
  for (std::size_t i = 0; i < parts; ++i) {
    pose.rotations[i] = p.template segment<3>(rotation_offset(i));
    pose.scales[i] = p.template segment<3>(scale_offset(parts, i));
  }
  pose.translation = p.template segment<3>(translation_offset(parts));
  return pose;
}

/// Lifts p to derivative scalars, parameter i seeded with unit vector e_i.
VectorX<ADScalar> seed(const ParamVector& p);

/// Adds weight * d(x)/d(params) into grad; constants carry no derivatives.
inline void accumulate_derivatives(ParamVector& grad, double weight, const ADScalar& x) {
  if (x.derivatives().size() == grad.size()) grad.noalias() += weight * x.derivatives();
}

void require_finite_gradient(const ParamVector& g);

/// A differentiable scalar objective of a parameter vector.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual double value(const ParamVector& p) const = 0;
  /// Returns the value and writes the exact gradient.
  virtual double value_and_gradient(const ParamVector& p, ParamVector& grad) const = 0;
};

/// Exact gradient of a generic scalar function written against a template
/// scalar: f must accept VectorX<ADScalar> and return ADScalar.
template <typename Fn>
  requires(!std::derived_from<std::remove_cvref_t<Fn>, Objective>)
ParamVector gradient(Fn&& f, const ParamVector& p) {
  const ADScalar y = f(seed(p));
  ParamVector g = ParamVector::Zero(p.size());
  accumulate_derivatives(g, 1.0, y);
  require_finite_gradient(g);
  return g;
}

/// Objective::value_and_gradient with the NonFiniteGradient check applied.
ParamVector gradient(const Objective& objective, const ParamVector& p);

struct GradientReport {
  ParamVector analytic;
  ParamVector numeric;
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
};

/// Compares the objective's analytic gradient against central differences
/// with step eps in [1e-8, 1e-2].
GradientReport finite_diff_check(const Objective& objective, const ParamVector& p, double eps = 1e-5);

/// Same for a value function and a precomputed analytic gradient.
GradientReport finite_diff_check(const std::function<double(const ParamVector&)>& value, const ParamVector& analytic,
                                 const ParamVector& p, double eps = 1e-5);

/// Which terms of the pose objective are active.
struct LossTerms {
  bool recon = true;
  bool boundary = true;
  bool rotation = true;
};

struct Scene {
  Template tmpl;
  Camera camera;
  RenderSettings settings;
  ImageBuffer target;
};

struct PoseEvaluation {
  LossBreakdown loss;
  ImageBuffer rendered;
  RenderStats stats;
};

/// The full pose objective: recon(render(apply_pose(p)), target) +
/// boundary(project_anchors(p)) + alpha(iter) * rotation_reg(p).
/// Disabled terms are reported as zero and skipped.
class PoseObjective final : public Objective {
 public:
  PoseObjective(const Scene& scene, int iter, LossTerms terms = {});

  double value(const ParamVector& p) const override;
  double value_and_gradient(const ParamVector& p, ParamVector& grad) const override;

  /// Single entry point behind both overrides; grad may be null.
  PoseEvaluation evaluate(const ParamVector& p, ParamVector* grad) const;

  void set_iteration(int iter) { iter_ = iter; }
  int iteration() const { return iter_; }
  const Scene& scene() const { return scene_; }

 private:
  const Scene& scene_;
  int iter_;
  LossTerms terms_;
};

}  // namespace posecast

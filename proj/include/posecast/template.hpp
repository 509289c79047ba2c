// Copyright Contributors to the posecast project
// SPDX-License-Identifier: Apache-2.0
//
// Articulated body template: K Gaussian parts linked by a kinematic tree.
// Each part carries its own absolute rotation and per-axis scale; after the
// affine map is applied the part is translated back onto its parent at the
// shared anchor, root first and then outward along the tree.
#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "posecast/camera.hpp"
#include "posecast/geometry.hpp"

namespace posecast {

struct PartSpec {
  std::string name;
  GaussianPartd gaussian;
  std::optional<std::size_t> parent;
  /// Rest-pose overlap point as seen from the parent.
  Vec3d anchor_parent = Vec3d::Zero();
  /// The same point, owned by this part; it is the rotation/scale pivot.
  Vec3d anchor_self = Vec3d::Zero();

  bool operator==(const PartSpec&) const = default;
};

struct Template {
  std::vector<PartSpec> parts;
  std::size_t root_index = 0;

  std::size_t size() const { return parts.size(); }
  std::optional<std::size_t> find(const std::string& name) const;

  bool operator==(const Template&) const = default;
};

/// Throws InvalidTemplate unless the parts form a single tree with valid
/// gaussians and matching anchor pairs.
void validate(const Template& tmpl);

/// Parents-before-children order (breadth first from the root, ties by index).
std::vector<std::size_t> processing_order(const Template& tmpl);

/// The frozen ten-part humanoid, standing upright along +y and facing +z.
Template default_human_template();

inline constexpr double kMinScale = 0.2;
inline constexpr double kMaxScale = 5.0;

template <typename T>
struct PoseParams {
  std::vector<Vec3<T>> rotations;  // axis-angle per part
  std::vector<Vec3<T>> scales;     // per-axis scale per part
  Vec3<T> translation = Vec3<T>::Zero();

  std::size_t size() const { return rotations.size(); }

  static PoseParams identity(std::size_t k) {
    PoseParams p;
    p.rotations.assign(k, Vec3<T>::Zero());
    p.scales.assign(k, Vec3<T>::Ones());
    return p;
  }
};

using Posed = PoseParams<double>;

/// Clamp into [kMinScale, kMaxScale]; clamped components become constants.
template <typename T>
T clamp_scale(const T& s) {
  if (value_of(s) < kMinScale) return T(kMinScale);
  if (value_of(s) > kMaxScale) return T(kMaxScale);
  return s;
}

template <typename T>
struct AnchorPair {
  std::size_t part = 0;  // the child part that owns the joint
  Vec3<T> parent_side = Vec3<T>::Zero();
  Vec3<T> child_side = Vec3<T>::Zero();
};

template <typename T>
struct TransformedTemplate {
  std::vector<GaussianPart<T>> parts;
  /// One entry per non-root part, in part-index order.
  std::vector<AnchorPair<T>> anchors;
};

/// Pose the template. `order` may override the processing order; any
/// parents-first order gives the same result.
template <typename T>
TransformedTemplate<T> apply_pose(const Template& tmpl, const PoseParams<T>& pose,
                                  std::span<const std::size_t> order = {}) {
  const std::size_t k = tmpl.size();
  if (pose.rotations.size() != k || pose.scales.size() != k) {
    raise(ErrorCode::DimensionMismatch,
          "pose has " + std::to_string(pose.rotations.size()) + " rotations and " +
              std::to_string(pose.scales.size()) + " scales for " +
              std::to_string(k) + " parts");
  }
  std::vector<std::size_t> default_order;
  if (order.empty()) {
    default_order = processing_order(tmpl);
    order = default_order;
  }

  std::vector<Mat3<T>> linear(k);
  std::vector<Vec3<T>> offset(k);
  std::vector<char> done(k, 0);
  TransformedTemplate<T> out;
  out.parts.resize(k);
  std::vector<std::optional<AnchorPair<T>>> anchors(k);

  for (const std::size_t idx : order) {
    const PartSpec& spec = tmpl.parts.at(idx);
    Vec3<T> s = pose.scales[idx];
    for (int c = 0; c < 3; ++c) s[c] = clamp_scale(s[c]);
    const Mat3<T> h = compose_affine(pose.rotations[idx], s);

    Vec3<T> b;
    if (!spec.parent) {
      const Vec3<T> pivot = spec.gaussian.mean.cast<T>();
      b = pivot - h * pivot;
    } else {
      const std::size_t parent = *spec.parent;
      if (!done[parent]) {
        raise(ErrorCode::InvalidArgument,
              "processing order visits '" + spec.name + "' before its parent");
      }
      const Vec3<T> pivot = spec.anchor_self.cast<T>();
      const Vec3<T> parent_side = linear[parent] * spec.anchor_parent.cast<T>() + offset[parent];
      // Pivot about the own anchor, then translate onto the parent.
      const Vec3<T> rest_offset = pivot - h * pivot;
      const Vec3<T> reconnect = parent_side - (h * pivot + rest_offset);
      b = rest_offset + reconnect;
      anchors[idx] = AnchorPair<T>{idx, parent_side, h * pivot + b};
    }
    linear[idx] = h;
    offset[idx] = b;
    done[idx] = 1;
  }
  if (std::count(done.begin(), done.end(), 1) != static_cast<std::ptrdiff_t>(k)) {
    raise(ErrorCode::InvalidArgument, "processing order does not cover every part");
  }

  for (std::size_t idx = 0; idx < k; ++idx) {
    GaussianPart<T> rest;
    rest.mean = tmpl.parts[idx].gaussian.mean.template cast<T>();
    rest.covariance = tmpl.parts[idx].gaussian.covariance.template cast<T>();
    rest.base_colour = tmpl.parts[idx].gaussian.base_colour;
    out.parts[idx] = transform_gaussian(rest, linear[idx], Vec3<T>(offset[idx] + pose.translation));
    if (anchors[idx]) {
      AnchorPair<T> a = *anchors[idx];
      a.parent_side += pose.translation;
      a.child_side += pose.translation;
      out.anchors.push_back(a);
    }
  }
  return out;
}

template <typename T>
struct ProjectedAnchor {
  std::size_t part = 0;
  Vec2<T> ndc = Vec2<T>::Zero();
  bool behind_camera = false;
};

/// Projects the child-side anchor of every joint. Anchors at depth <= near
/// are flagged and must be skipped by the boundary loss.
template <typename T>
std::vector<ProjectedAnchor<T>> project_anchors(const TransformedTemplate<T>& tt,
                                                const Camera& cam, double aspect = 1.0) {
  std::vector<ProjectedAnchor<T>> out;
  out.reserve(tt.anchors.size());
  for (const auto& a : tt.anchors) {
    ProjectedAnchor<T> p;
    p.part = a.part;
    const Projection<T> proj = project_point(cam, aspect, a.child_side);
    if (value_of(proj.depth) <= cam.near) {
      p.behind_camera = true;
    } else {
      p.ndc = proj.ndc;
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace posecast

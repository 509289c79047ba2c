// Copyright Contributors to the posecast project
// SPDX-License-Identifier: Apache-2.0
//
#include "posecast/template.hpp"

#include <deque>
#include <set>

namespace posecast {

std::optional<std::size_t> Template::find(const std::string& name) const {
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].name == name) return i;
  }
  return std::nullopt;
}

void validate(const Template& tmpl) {
  const std::size_t k = tmpl.size();
  if (k == 0) raise(ErrorCode::InvalidTemplate, "template has no parts");
  if (tmpl.root_index >= k) raise(ErrorCode::InvalidTemplate, "root index out of range");

  std::set<std::string> names;
  std::size_t roots = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const PartSpec& p = tmpl.parts[i];
    if (p.name.empty()) raise(ErrorCode::InvalidTemplate, "part " + std::to_string(i) + " has no name");
    if (!names.insert(p.name).second) raise(ErrorCode::InvalidTemplate, "duplicate part name '" + p.name + "'");
    try {
      validate(p.gaussian);
    } catch (const Error& e) {
      raise(ErrorCode::InvalidTemplate, "part '" + p.name + "': " + e.what());
    }
    if (!p.parent) {
      ++roots;
      if (i != tmpl.root_index) raise(ErrorCode::InvalidTemplate, "part '" + p.name + "' has no parent but is not the root");
      continue;
    }
    if (*p.parent >= k || *p.parent == i) {
      raise(ErrorCode::InvalidTemplate, "part '" + p.name + "' has an invalid parent index");
    }
    if (!p.anchor_parent.allFinite() || (p.anchor_parent - p.anchor_self).cwiseAbs().maxCoeff() > 1e-12) {
      raise(ErrorCode::InvalidTemplate, "part '" + p.name + "' anchors do not coincide at rest");
    }
  }
  if (roots != 1) raise(ErrorCode::InvalidTemplate, "template needs exactly one root, found " + std::to_string(roots));
  if (processing_order(tmpl).size() != k) raise(ErrorCode::InvalidTemplate, "part graph contains a cycle");
}

std::vector<std::size_t> processing_order(const Template& tmpl) {
  const std::size_t k = tmpl.size();
  std::vector<std::vector<std::size_t>> children(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (const auto& p = tmpl.parts[i].parent; p && *p < k) children[*p].push_back(i);
  }
  std::vector<std::size_t> order;
  if (tmpl.root_index >= k) return order;
  order.reserve(k);
  std::deque<std::size_t> queue{tmpl.root_index};
  std::vector<char> seen(k, 0);
  seen[tmpl.root_index] = 1;
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    order.push_back(i);
    for (const std::size_t c : children[i]) {
      if (!seen[c]) {
        seen[c] = 1;
        queue.push_back(c);
      }
    }
  }
  return order;
}

namespace {

PartSpec make_part(std::string name, std::optional<std::size_t> parent, Vec3d mean,
                   Vec3d sigma, Vec3d colour, Vec3d anchor = Vec3d::Zero()) {
  PartSpec p;
  p.name = std::move(name);
  p.parent = parent;
  p.gaussian.mean = mean;
  p.gaussian.covariance = sigma.cwiseProduct(sigma).asDiagonal();
  p.gaussian.base_colour = colour;
  if (parent) {
    p.anchor_parent = anchor;
    p.anchor_self = anchor;
  }
  return p;
}

}  // namespace

Template default_human_template() {
  // Keep in sync with data/default_template.json (checked by the tests).
  // Arms in a T-pose; three distinct axis lengths per part so every
  // rotation axis changes the silhouette.
  Template t;
  t.root_index = 0;
  t.parts = {
      make_part("core", std::nullopt, {0.0, 0.15, 0.0}, {0.17, 0.27, 0.09}, {0.85, 0.30, 0.25}),
      make_part("head", 0, {0.0, 0.66, 0.0}, {0.10, 0.12, 0.065}, {0.95, 0.80, 0.60}, {0.0, 0.50, 0.0}),
      make_part("left_upper_arm", 0, {0.34, 0.40, 0.0}, {0.12, 0.045, 0.085}, {0.20, 0.60, 0.90}, {0.20, 0.40, 0.0}),
      make_part("left_lower_arm", 2, {0.60, 0.40, 0.0}, {0.11, 0.04, 0.075}, {0.10, 0.30, 0.80}, {0.47, 0.40, 0.0}),
      make_part("right_upper_arm", 0, {-0.34, 0.40, 0.0}, {0.12, 0.045, 0.085}, {0.90, 0.75, 0.10}, {-0.20, 0.40, 0.0}),
      make_part("right_lower_arm", 4, {-0.60, 0.40, 0.0}, {0.11, 0.04, 0.075}, {0.80, 0.45, 0.05}, {-0.47, 0.40, 0.0}),
      make_part("left_upper_leg", 0, {0.10, -0.32, 0.0}, {0.085, 0.16, 0.05}, {0.20, 0.80, 0.30}, {0.10, -0.12, 0.0}),
      make_part("left_lower_leg", 6, {0.10, -0.72, 0.0}, {0.07, 0.15, 0.045}, {0.10, 0.50, 0.20}, {0.10, -0.52, 0.0}),
      make_part("right_upper_leg", 0, {-0.10, -0.32, 0.0}, {0.085, 0.16, 0.05}, {0.70, 0.30, 0.80}, {-0.10, -0.12, 0.0}),
      make_part("right_lower_leg", 8, {-0.10, -0.72, 0.0}, {0.07, 0.15, 0.045}, {0.50, 0.15, 0.60}, {-0.10, -0.52, 0.0}),
  };
  return t;
}

}  // namespace posecast

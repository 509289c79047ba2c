// Copyright Contributors to the posecast project
// SPDX-License-Identifier: Apache-2.0
//
// File formats: template / pose / camera JSON, binary PPM images, fit logs
// and reports.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "posecast/autodiff.hpp"
#include "posecast/fitter.hpp"
#include "posecast/renderer.hpp"
#include "posecast/template.hpp"

namespace posecast::io {

using nlohmann::json;

inline constexpr int kTemplateSchema = 1;

json template_to_json(const Template& tmpl);
/// Throws Parse on schema violations and InvalidTemplate on invalid content.
Template template_from_json(const json& j);

json pose_to_json(const Posed& pose);
Posed pose_from_json(const json& j);

json camera_to_json(const Camera& cam);
Camera camera_from_json(const json& j);

/// Reads a JSON document; Parse error (naming the path) if missing or malformed.
json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline; Io error on failure.
void write_json(const std::filesystem::path& path, const json& j);

Template load_template(const std::filesystem::path& path);
Posed load_pose(const std::filesystem::path& path);
Camera load_camera(const std::filesystem::path& path);

/// round(clamp(v, 0, 1) * 255).
std::uint8_t quantize(double v);

/// Binary P6, maxval 255, no comments.
std::vector<std::uint8_t> encode_ppm(const ImageBuffer& img);
/// Accepts P6 with maxval 255 (comments allowed); alpha is set to 1.
ImageBuffer decode_ppm(const std::vector<std::uint8_t>& bytes);

void write_ppm(const std::filesystem::path& path, const ImageBuffer& img);
ImageBuffer read_ppm(const std::filesystem::path& path);

/// Two images left to right.
ImageBuffer side_by_side(const ImageBuffer& left, const ImageBuffer& right);

json loss_to_json(const LossBreakdown& loss);
json gradient_report_to_json(const GradientReport& report);
json fit_result_to_json(const FitResult& result);
json synth_report_to_json(const SynthReport& report);

/// Header iter,recon,boundary,rot_reg,alpha,total,grad_norm then one row per entry.
void write_fit_log_csv(std::ostream& out, const std::vector<FitLogEntry>& log);

/// Composite occupancy sampled at the centres of an n^3 grid over [lo, hi].
struct OccupancyGrid {
  int resolution = 0;
  Vec3d lo = Vec3d::Zero();
  Vec3d hi = Vec3d::Zero();
  std::vector<double> values;  // x fastest, then y, then z
};

OccupancyGrid rasterize_occupancy(const TransformedTemplate<double>& tt, int resolution, const Vec3d& lo,
                                  const Vec3d& hi);
json grid_to_json(const OccupancyGrid& grid);

}  // namespace posecast::io

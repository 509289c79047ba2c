// Copyright Contributors to the posecast project
// SPDX-License-Identifier: Apache-2.0
//
#include "posecast/io.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>

#include "posecast/renderer.hpp"

namespace posecast::io {

namespace {

[[noreturn]] void parse_error(const std::string& what) { raise(ErrorCode::Parse, what); }

json vec_to_json(const Vec3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3d vec_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) parse_error("'" + field + "' must be an array of 3 numbers");
  Vec3d v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) parse_error("'" + field + "' must be an array of 3 numbers");
    v[i] = j[i].get<double>();
  }
  if (!v.allFinite()) parse_error("'" + field + "' must be finite");
  return v;
}

json mat_to_json(const Mat3d& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
  return rows;
}

Mat3d mat_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) parse_error("'" + field + "' must be a 3x3 array");
  Mat3d m;
  for (int r = 0; r < 3; ++r) m.row(r) = vec_from_json(j[r], field).transpose();
  return m;
}

const json& require(const json& j, const std::string& key) {
  if (!j.is_object() || !j.contains(key)) parse_error("missing field '" + key + "'");
  return j.at(key);
}

double number(const json& j, const std::string& key) {
  const json& v = require(j, key);
  if (!v.is_number()) parse_error("'" + key + "' must be a number");
  return v.get<double>();
}

std::vector<Vec3d> vec_list(const json& j, const std::string& key) {
  const json& arr = require(j, key);
  if (!arr.is_array()) parse_error("'" + key + "' must be an array");
  std::vector<Vec3d> out;
  for (const auto& e : arr) out.push_back(vec_from_json(e, key));
  return out;
}

}  // namespace

json template_to_json(const Template& tmpl) {
  json parts = json::array();
  for (const auto& p : tmpl.parts) {
    json e;
    e["name"] = p.name;
    e["parent"] = p.parent ? json(tmpl.parts.at(*p.parent).name) : json(nullptr);
    e["mean"] = vec_to_json(p.gaussian.mean);
    e["covariance"] = mat_to_json(p.gaussian.covariance);
    e["colour"] = vec_to_json(p.gaussian.base_colour);
    e["anchor"] = p.parent ? vec_to_json(p.anchor_self) : json(nullptr);
    parts.push_back(std::move(e));
  }
  return json{{"schema", kTemplateSchema}, {"parts", parts}};
}

Template template_from_json(const json& j) {
  const json& schema = require(j, "schema");
  if (!schema.is_number_integer() || schema.get<int>() != kTemplateSchema) {
    parse_error("unsupported template schema (expected " + std::to_string(kTemplateSchema) + ")");
  }
  const json& parts = require(j, "parts");
  if (!parts.is_array()) parse_error("'parts' must be an array");

  Template tmpl;
  std::vector<json> parents;
  std::optional<std::size_t> root;
  for (const auto& e : parts) {
    PartSpec p;
    const json& name = require(e, "name");
    if (!name.is_string()) parse_error("part 'name' must be a string");
    p.name = name.get<std::string>();
    p.gaussian.mean = vec_from_json(require(e, "mean"), "mean");
    p.gaussian.covariance = mat_from_json(require(e, "covariance"), "covariance");
    p.gaussian.base_colour = vec_from_json(require(e, "colour"), "colour");
    const json parent = e.contains("parent") ? e.at("parent") : json(nullptr);
    if (!parent.is_null()) {
      p.anchor_self = vec_from_json(require(e, "anchor"), "anchor");
      p.anchor_parent = p.anchor_self;
    } else {
      if (root) parse_error("more than one part without a parent");
      root = tmpl.parts.size();
    }
    parents.push_back(parent);
    tmpl.parts.push_back(std::move(p));
  }
  if (!root) parse_error("template has no root part");
  tmpl.root_index = *root;
  for (std::size_t i = 0; i < parents.size(); ++i) {
    const json& parent = parents[i];
    if (parent.is_null()) continue;
    if (parent.is_string()) {
      const auto idx = tmpl.find(parent.get<std::string>());
      if (!idx) parse_error("part '" + tmpl.parts[i].name + "' names unknown parent '" + parent.get<std::string>() + "'");
      tmpl.parts[i].parent = *idx;
    } else if (parent.is_number_integer() && parent.get<std::int64_t>() >= 0) {
      tmpl.parts[i].parent = parent.get<std::size_t>();
    } else {
      parse_error("'parent' must be a part name, an index or null");
    }
  }
  validate(tmpl);
  return tmpl;
}

json pose_to_json(const Posed& pose) {
  json rot = json::array();
  json sc = json::array();
  for (std::size_t i = 0; i < pose.size(); ++i) {
    rot.push_back(vec_to_json(pose.rotations[i]));
    sc.push_back(vec_to_json(pose.scales[i]));
  }
  return json{{"rotations", rot}, {"scales", sc}, {"translation", vec_to_json(pose.translation)}};
}

Posed pose_from_json(const json& j) {
  Posed pose;
  pose.rotations = vec_list(j, "rotations");
  pose.scales = vec_list(j, "scales");
  pose.translation = vec_from_json(require(j, "translation"), "translation");
  if (pose.rotations.size() != pose.scales.size()) parse_error("'rotations' and 'scales' differ in length");
  return pose;
}

json camera_to_json(const Camera& cam) {
  return json{{"position", vec_to_json(cam.position)},
              {"look_at", vec_to_json(cam.look_at)},
              {"up", vec_to_json(cam.up)},
              {"fov_deg", cam.vertical_fov * 180.0 / M_PI},
              {"near", cam.near},
              {"far", cam.far}};
}

Camera camera_from_json(const json& j) {
  Camera cam;
  cam.position = vec_from_json(require(j, "position"), "position");
  cam.look_at = vec_from_json(require(j, "look_at"), "look_at");
  cam.up = vec_from_json(require(j, "up"), "up");
  cam.vertical_fov = number(j, "fov_deg") * M_PI / 180.0;
  cam.near = number(j, "near");
  cam.far = number(j, "far");
  try {
    validate(cam);
  } catch (const Error& e) {
    parse_error(e.what());
  }
  return cam;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) parse_error("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    parse_error("'" + path.string() + "': " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) raise(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

namespace {

template <typename Fn>
auto with_path(const std::filesystem::path& path, Fn&& fn) {
  try {
    return fn(read_json(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Parse && std::string(e.what()).find(path.string()) == std::string::npos) {
      parse_error("'" + path.string() + "': " + e.what());
    }
    throw;
  }
}

}  // namespace

Template load_template(const std::filesystem::path& path) {
  return with_path(path, [](const json& j) { return template_from_json(j); });
}

Posed load_pose(const std::filesystem::path& path) {
  return with_path(path, [](const json& j) { return pose_from_json(j); });
}

Camera load_camera(const std::filesystem::path& path) {
  return with_path(path, [](const json& j) { return camera_from_json(j); });
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

std::vector<std::uint8_t> encode_ppm(const ImageBuffer& img) {
  const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + img.pixel_count() * 3);
  for (Eigen::Index i = 0; i < img.rgb.rows(); ++i) {
    for (int c = 0; c < 3; ++c) out.push_back(quantize(img.rgb(i, c)));
  }
  return out;
}

ImageBuffer decode_ppm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto token = [&] {
    skip_space();
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  if (token() != "P6") parse_error("not a binary PPM (P6) image");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    parse_error("malformed PPM header");
  }
  if (w < 1 || h < 1 || maxval != 255) parse_error("unsupported PPM dimensions or maxval");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) parse_error("malformed PPM header");
  ++pos;
  const std::size_t need = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() - pos < need) parse_error("truncated PPM pixel data");
  ImageBuffer img(w, h);
  for (Eigen::Index i = 0; i < img.rgb.rows(); ++i) {
    for (int c = 0; c < 3; ++c) img.rgb(i, c) = bytes[pos++] / 255.0;
  }
  img.alpha.setOnes();
  return img;
}

void write_ppm(const std::filesystem::path& path, const ImageBuffer& img) {
  const auto bytes = encode_ppm(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) raise(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

ImageBuffer read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) parse_error("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_ppm(bytes);
  } catch (const Error& e) {
    parse_error("'" + path.string() + "': " + e.what());
  }
}

ImageBuffer side_by_side(const ImageBuffer& left, const ImageBuffer& right) {
  const int h = std::max(left.height, right.height);
  ImageBuffer out(left.width + right.width, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const bool is_left = x < left.width;
      const ImageBuffer& src = is_left ? left : right;
      const int sx = is_left ? x : x - left.width;
      if (y >= src.height) continue;
      out.rgb.row(out.index(x, y)) = src.rgb.row(src.index(sx, y));
      out.alpha[out.index(x, y)] = src.alpha[src.index(sx, y)];
    }
  }
  return out;
}

json loss_to_json(const LossBreakdown& l) {
  return json{{"recon", l.recon}, {"boundary", l.boundary}, {"rot_reg", l.rot_reg}, {"alpha", l.alpha}, {"total", l.total}};
}

namespace {

json vector_to_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

}  // namespace

json gradient_report_to_json(const GradientReport& r) {
  return json{{"analytic", vector_to_json(r.analytic)},
              {"numeric", vector_to_json(r.numeric)},
              {"max_abs_err", r.max_abs_err},
              {"max_rel_err", r.max_rel_err}};
}

json fit_result_to_json(const FitResult& r) {
  json log = json::array();
  for (const auto& e : r.log) {
    json row = loss_to_json(e.loss);
    row["iter"] = e.iter;
    row["grad_norm"] = e.grad_norm;
    log.push_back(std::move(row));
  }
  json out{{"pose", pose_to_json(r.pose)},
           {"final_loss", loss_to_json(r.final_loss)},
           {"converged", r.converged},
           {"iterations", r.log.size()},
           {"seed", r.seed},
           {"wall_time", r.wall_time},
           {"log", log}};
  out["aborted"] = r.aborted ? json(*r.aborted) : json(nullptr);
  return out;
}

json synth_report_to_json(const SynthReport& r) {
  return json{{"seed", r.seed},
              {"initial_mse", r.initial_mse},
              {"final_mse", r.final_mse},
              {"mean_rotation_error", r.mean_rotation_error},
              {"max_scale_error", r.max_scale_error},
              {"rotation_errors", r.rotation_errors},
              {"scale_errors", r.scale_errors},
              {"iterations", r.iterations},
              {"converged", r.converged},
              {"truth", pose_to_json(r.truth)},
              {"init", pose_to_json(r.init)},
              {"fitted", pose_to_json(r.fitted)}};
}

void write_fit_log_csv(std::ostream& out, const std::vector<FitLogEntry>& log) {
  out << "iter,recon,boundary,rot_reg,alpha,total,grad_norm\n";
  std::ostringstream row;
  row.precision(17);
  for (const auto& e : log) {
    row.str("");
    row << e.iter << ',' << e.loss.recon << ',' << e.loss.boundary << ',' << e.loss.rot_reg << ',' << e.loss.alpha
        << ',' << e.loss.total << ',' << e.grad_norm << '\n';
    out << row.str();
  }
}

OccupancyGrid rasterize_occupancy(const TransformedTemplate<double>& tt, int resolution, const Vec3d& lo,
                                  const Vec3d& hi) {
  if (resolution < 1) raise(ErrorCode::InvalidArgument, "grid resolution must be positive");
  if (!((hi - lo).array() > 0.0).all()) raise(ErrorCode::InvalidArgument, "grid bounds are empty");
  OccupancyGrid grid;
  grid.resolution = resolution;
  grid.lo = lo;
  grid.hi = hi;
  grid.values.reserve(static_cast<std::size_t>(resolution) * resolution * resolution);
  const Vec3d cell = (hi - lo) / resolution;
  for (int z = 0; z < resolution; ++z) {
    for (int y = 0; y < resolution; ++y) {
      for (int x = 0; x < resolution; ++x) {
        const Vec3d p = lo + cell.cwiseProduct(Vec3d(x + 0.5, y + 0.5, z + 0.5));
        grid.values.push_back(composite_fields(tt, p).occupancy);
      }
    }
  }
  return grid;
}

json grid_to_json(const OccupancyGrid& g) {
  return json{{"resolution", g.resolution},
              {"lo", vec_to_json(g.lo)},
              {"hi", vec_to_json(g.hi)},
              {"layout", "x-fastest"},
              {"occupancy", g.values}};
}

}  // namespace posecast::io

// Copyright Contributors to the posecast project
// SPDX-License-Identifier: Apache-2.0
//
// Regenerates tests/data/golden_default.ppm from the reference renderer.
#include <iostream>

#include "posecast/io.hpp"
#include "support.hpp"

int main(int argc, char** argv) {
  using namespace posecast;
  const std::filesystem::path out = argc > 1 ? std::filesystem::path(argv[1]) : testing::golden_path();
  std::vector<GaussianPartd> parts;
  for (const auto& p : default_human_template().parts) parts.push_back(p.gaussian);
  const RenderSettings s;
  io::write_ppm(out, testing::reference_render(parts, Camera{}, s.width, s.height, s.samples_per_ray,
                                               s.background_colour));
  std::cout << "wrote " << out << '\n';
}

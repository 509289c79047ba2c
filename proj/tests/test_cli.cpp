// Copyright Contributors to the posecast project
// SPDX-License-Identifier: Apache-2.0
//
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "posecast/cli.hpp"
#include "posecast/io.hpp"
#include "support.hpp"

using namespace posecast;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "posecast");
  std::ostringstream out;
  std::ostringstream err;
  Run r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "posecast_cli_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::string bytes_of(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string data(const std::string& name) { return (posecast::testing::source_dir() / "data" / name).string(); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("every command answers --help without side effects") {
  const auto before = std::distance(std::filesystem::directory_iterator(std::filesystem::current_path()),
                                    std::filesystem::directory_iterator());
  CHECK(run({"--help"}).code == 0);
  for (const char* cmd : {"render", "gradcheck", "fit", "template-validate", "template-export-grid"}) {
    const Run r = run({cmd, "--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("--") != std::string::npos);
  }
  const auto after = std::distance(std::filesystem::directory_iterator(std::filesystem::current_path()),
                                   std::filesystem::directory_iterator());
  CHECK(before == after);
}

TEST_CASE("bad invocations exit with a parse error") {
  CHECK(run({}).code == cli::kParseError);
  CHECK(run({"bogus"}).code == cli::kParseError);
  CHECK(run({"render", "--width", "zero"}).code == cli::kParseError);
  CHECK(run({"render", "--samples", "1"}).code == cli::kParseError);
}

TEST_CASE("render matches the golden image") {
  const auto out = scratch("golden.ppm");
  const Run r = run({"render", "--template", data("default_template.json"), "--pose", data("identity_pose.json"),
                     "--camera", data("default_camera.json"), "--out", out.string()});
  REQUIRE(r.code == 0);
  CHECK(bytes_of(out) == bytes_of(posecast::testing::golden_path()));
  const auto stats = io::json::parse(r.out);
  CHECK(stats.at("mean_alpha").get<double>() > 0.0);
  CHECK(stats.at("mean_alpha").get<double>() < 1.0);
}

TEST_CASE("render is byte-identical across runs and worker counts") {
  const auto pose_path = scratch("pose.json");
  io::write_json(pose_path, io::pose_to_json(sample_pose(17, 10)));
  std::string reference;
  for (const char* threads : {"1", "4", "1", "3"}) {
    const auto out = scratch(std::string("threads_") + threads + ".ppm");
    REQUIRE(run({"render", "--pose", pose_path.string(), "--threads", threads, "--width", "40", "--height", "30",
                 "--out", out.string()})
                .code == 0);
    if (reference.empty()) reference = bytes_of(out);
    CHECK(bytes_of(out) == reference);
  }
}

TEST_CASE("render edge cases and error codes") {
  CHECK(run({"render", "--samples", "2", "--width", "8", "--height", "8", "--out", scratch("j2.ppm").string()}).code ==
        0);
  const auto missing = scratch("missing_pose.json");
  std::filesystem::remove(missing);
  const Run r = run({"render", "--pose", missing.string(), "--out", scratch("x.ppm").string()});
  CHECK(r.code == cli::kParseError);
  CHECK(r.err.find(missing.string()) != std::string::npos);
  CHECK(run({"render", "--out", "/nonexistent_dir/out.ppm"}).code == cli::kIoError);
  const auto short_pose = scratch("short_pose.json");
  io::write_json(short_pose, io::pose_to_json(Posed::identity(3)));
  CHECK(run({"render", "--pose", short_pose.string(), "--out", scratch("x.ppm").string()}).code == cli::kParseError);
}

TEST_CASE("gradcheck exit codes") {
  const Run ok = run({"gradcheck", "--width", "16", "--height", "16", "--samples", "16"});
  CHECK(ok.code == 0);
  const auto report = io::json::parse(ok.out);
  CHECK(report.at("max_rel_err").get<double>() < 1e-3);
  CHECK(report.at("analytic").size() == 63);
  CHECK(run({"gradcheck", "--width", "16", "--height", "16", "--samples", "16", "--sabotage"}).code ==
        cli::kCheckFailed);
  CHECK(run({"gradcheck", "--eps", "0.5"}).code == cli::kParseError);
  CHECK(run({"gradcheck", "--eps", "1e-9"}).code == cli::kParseError);
}

TEST_CASE("gradcheck on the frozen default scene") {
  CHECK(run({"gradcheck"}).code == 0);
}

TEST_CASE("fit: target rendered from the init pose converges at once") {
  const auto pose_path = scratch("init.json");
  io::write_json(pose_path, io::pose_to_json(sample_pose(3, 10)));
  const auto target = scratch("target.ppm");
  REQUIRE(run({"render", "--pose", pose_path.string(), "--width", "24", "--height", "24", "--out", target.string()})
              .code == 0);
  const auto log = scratch("fit_log.csv");
  const auto fitted = scratch("fitted.json");
  const auto sbs = scratch("sbs.ppm");
  const Run r = run({"fit", "--target", target.string(), "--init", pose_path.string(), "--out", fitted.string(),
                     "--log", log.string(), "--side-by-side", sbs.string()});
  REQUIRE(r.code == 0);
  std::ifstream in(log);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines >= 2);
  CHECK(lines <= 6);
  CHECK(io::load_pose(fitted).size() == 10);
  CHECK(io::read_ppm(sbs).width == 48);
}

TEST_CASE("fit validation and failures") {
  const auto target = scratch("fit_target.ppm");
  io::write_ppm(target, ImageBuffer(20, 10));
  CHECK(run({"fit", "--target", target.string(), "--width", "32", "--out", scratch("f.json").string()}).code ==
        cli::kParseError);
  CHECK(run({"fit", "--out", scratch("f.json").string()}).code == cli::kParseError);
  // Black target against an unmatched body: a few iterations do not converge.
  CHECK(run({"fit", "--target", target.string(), "--iters", "2", "--out", scratch("f.json").string()}).code ==
        cli::kCheckFailed);
}

TEST_CASE("fit logs are identical for identical seeds") {
  const auto target = scratch("seeded_target.ppm");
  const auto pose_path = scratch("seeded_truth.json");
  io::write_json(pose_path, io::pose_to_json(sample_pose(8, 10)));
  REQUIRE(run({"render", "--pose", pose_path.string(), "--width", "16", "--height", "16", "--samples", "12", "--out",
               target.string()})
              .code == 0);
  std::string first;
  for (const char* threads : {"1", "4"}) {
    const auto log = scratch(std::string("seeded_") + threads + ".csv");
    run({"fit", "--target", target.string(), "--samples", "12", "--iters", "15", "--seed", "5", "--threads", threads,
         "--no-early-stop", "--log", log.string(), "--out", scratch("seeded.json").string()});
    if (first.empty()) first = bytes_of(log);
    CHECK(bytes_of(log) == first);
  }
  CHECK(std::count(first.begin(), first.end(), '\n') == 16);
}

TEST_CASE("fit --experiment summary is frozen") {
  const Run r = run({"fit", "--experiment", "--seeds", "3", "--iters", "6", "--width", "16", "--height", "16",
                     "--samples", "8"});
  const auto summary = io::json::parse(r.out);
  const auto frozen = io::read_json(posecast::testing::source_dir() / "tests" / "data" / "experiment_quick.json");
  REQUIRE(summary.at("runs").size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    for (const char* key : {"initial_mse", "final_mse", "mean_rotation_error", "max_scale_error"}) {
      const double got = summary["runs"][i][key].get<double>();
      const double want = frozen["runs"][i][key].get<double>();
      CHECK(got == doctest::Approx(want).epsilon(1e-9));
    }
  }
}

TEST_CASE("template commands") {
  const auto written = scratch("canonical.json");
  CHECK(run({"template-validate", "--template", data("default_template.json"), "--write", written.string()}).code ==
        0);
  CHECK(bytes_of(written) == bytes_of(data("default_template.json")));
  const auto broken = scratch("broken.json");
  auto j = io::template_to_json(default_human_template());
  j["parts"][0]["parent"] = "head";
  io::write_json(broken, j);
  CHECK(run({"template-validate", "--template", broken.string()}).code == cli::kParseError);

  const auto grid = scratch("grid.json");
  REQUIRE(run({"template-export-grid", "--resolution", "6", "--out", grid.string()}).code == 0);
  const auto g = io::read_json(grid);
  CHECK(g.at("occupancy").size() == 216);
}

}  // TEST_SUITE

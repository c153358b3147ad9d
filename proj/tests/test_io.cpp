#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "echograd/io.hpp"

using namespace echograd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("echograd_test_io_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("scene round trip") {
  const RoomScene scene = sample_scene(12, 2.0);
  PhysicalConstants c{340.0};
  const auto j = io::scene_to_json(scene, c);
  PhysicalConstants back_c;
  const RoomScene back = io::scene_from_json(io::json::parse(j.dump()), &back_c);
  CHECK(back.dimensions == scene.dimensions);
  CHECK(back.wall_absorptions == scene.wall_absorptions);
  CHECK(back.source_position == scene.source_position);
  CHECK(back.array_center == scene.array_center);
  CHECK(back.array.positions() == scene.array.positions());
  CHECK(back.array.sample_rate_hz() == scene.array.sample_rate_hz());
  CHECK(back_c.speed_of_sound_mps == 340.0);
  CHECK_THROWS_AS(io::scene_from_json(io::json::object()), io::FormatError);
}

TEST_CASE("measure round trip") {
  SparseMeasure psi;
  psi.add(0.123456789012345678, Vec3(1.0 / 3.0, -2.0 / 7.0, 1e-17));
  psi.add(1.0, Vec3(5, 6, 7));
  const auto back = io::measure_from_json(io::json::parse(io::measure_to_json(psi).dump()));
  REQUIRE(back.size() == 2);
  CHECK(back[0].amplitude == psi[0].amplitude);
  CHECK(back[0].position == psi[0].position);
  CHECK_THROWS_AS(io::measure_from_json(io::json::parse(R"([{"a": -1, "r": [1, 2, 3]}])")), Error);
}

TEST_CASE("solver config") {
  SolverConfig c;
  c.lambda = 1e-4;
  c.schedule = {0.5, 1.0};
  c.sliding_search.max_iterations = 77;
  const auto back = io::solver_config_from_json(io::json::parse(io::solver_config_to_json(c).dump()));
  CHECK(back.lambda == 1e-4);
  CHECK(back.schedule == c.schedule);
  CHECK(back.sliding_search.max_iterations == 77);
  CHECK(io::solver_config_from_json(io::json::object()).alpha_min == 0.01);
  CHECK_THROWS_AS(io::solver_config_from_json(io::json::parse(R"({"lamda": 1})")), io::FormatError);
  CHECK_THROWS_AS(io::solver_config_from_json(io::json::parse(R"({"prune_threshold": -1})")), Error);
}

TEST_CASE("RIR binary round trip") {
  RowMatrix x(3, 5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = std::sin(1.0 + static_cast<double>(i)) / 3.0;
  const Observation obs(x, 16000.0);
  const auto path = scratch("a.bin");
  io::write_rir(path, obs);
  CHECK(fs::file_size(path) == 16 + 15 * 8);
  const auto back = io::read_rir(path, 16000.0);
  CHECK(back.samples() == x);

  std::ofstream(scratch("bad.bin"), std::ios::binary) << "XXXX";
  CHECK_THROWS_AS(io::read_rir(scratch("bad.bin"), 16000.0), io::FormatError);
  std::ofstream(scratch("short.bin"), std::ios::binary) << "RIRF";
  CHECK_THROWS_AS(io::read_rir(scratch("short.bin"), 16000.0), io::FormatError);
}

TEST_CASE("json files") {
  const auto path = scratch("x.json");
  io::write_json(path, {{"k", 1}});
  CHECK(io::read_json(path)["k"] == 1);
  CHECK_FALSE(fs::exists(path.string() + ".tmp"));
  std::ofstream(scratch("broken.json")) << "{";
  CHECK_THROWS_AS(io::read_json(scratch("broken.json")), io::FormatError);
  CHECK_THROWS_AS(io::read_json(scratch("missing.json")), Error);
}

TEST_CASE("trace and report") {
  SolveTrace t;
  t.schedule = {10, 20};
  t.iterations.push_back({});
  t.sliding.performed = true;
  t.sliding.status = "converged";
  const auto j = io::trace_to_json(t, SolverConfig{});
  CHECK(j["config"]["sliding_search"]["gradient_tolerance"] == 1e-9);
  CHECK(j["config"]["sliding_search"]["max_iterations"] == 1000);
  CHECK(j["iterations"].size() == 1);

  MatchReport r;
  r.mean_radial_error_m = std::nan("");
  r.assignment = {std::nullopt, 3};
  const auto rj = io::report_to_json(r);
  CHECK(rj["mean_radial_error_m"].is_null());
  CHECK(rj["assignment"][1] == 3);
}

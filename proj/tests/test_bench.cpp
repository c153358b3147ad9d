#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>

#include <unistd.h>

#include "echograd/bench.hpp"
#include "echograd/io.hpp"

using namespace echograd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("echograd_test_bench_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

bench::ExperimentConfig tiny(const fs::path& out, std::size_t rooms) {
  bench::ExperimentConfig c;
  c.num_rooms = rooms;
  c.tmax_s = 0.008;
  c.master_seed = 5;
  c.output_dir = out;
  return c;
}

int run_cli(const std::string& args) {
  const char* cli = std::getenv("ECHOGRAD_CLI");
  REQUIRE(cli != nullptr);
  const int status = std::system((std::string(cli) + " " + args + " >/dev/null 2>&1").c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("experiment config") {
  bench::ExperimentConfig c;
  CHECK(c.num_samples() == 801);
  c.tmax_s = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.num_rooms = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("simulate is deterministic and consistent") {
  const auto a = scratch("sim_a");
  const auto b = scratch("sim_b");
  const auto da = bench::simulate(tiny(a, 3));
  bench::simulate(tiny(b, 3));
  REQUIRE(da.rooms.size() == 3);
  for (const auto& r : da.rooms) {
    CHECK(fs::exists(a / r.id / "scene.json"));
    CHECK(fs::exists(a / r.id / "truth.json"));
    CHECK(slurp(a / r.id / "rir.bin") == slurp(b / r.id / "rir.bin"));
    CHECK(r.audible_sources == io::read_json(a / r.id / "truth.json").size());
  }
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
  CHECK(io::read_json(a / "manifest.json")["rooms"].size() == 3);
}

TEST_CASE("source-count filter and explicit seeds") {
  auto c = tiny(scratch("filter"), 4);
  c.tmax_s = 0.03;
  c.max_sources = 40;
  const auto d = bench::select_rooms(c);
  REQUIRE(d.rooms.size() == 4);
  for (const auto& r : d.rooms) CHECK(r.audible_sources < 40);

  std::vector<std::uint64_t> seeds;
  for (const auto& r : d.rooms) seeds.push_back(r.seed);
  const auto again = bench::simulate(c, seeds);
  for (std::size_t i = 0; i < 4; ++i) CHECK(again.rooms[i].audible_sources == d.rooms[i].audible_sources);
}

TEST_CASE("audible counts span a wide range") {
  bench::ExperimentConfig c;
  c.num_rooms = 60;
  const auto d = bench::select_rooms(c);
  std::size_t lo = SIZE_MAX;
  std::size_t hi = 0;
  for (const auto& r : d.rooms) {
    lo = std::min(lo, r.audible_sources);
    hi = std::max(hi, r.audible_sources);
  }
  CHECK(lo < 100);
  CHECK(hi > 500);
}

TEST_CASE("solve, resume and evaluate") {
  const auto data = scratch("data");
  bench::simulate(tiny(data, 2));
  const auto r1 = scratch("res1");
  const auto r2 = scratch("res2");
  const auto s1 = bench::solve(data, r1, SolverConfig{}, 1);
  CHECK(s1.solved == 2);
  CHECK(s1.failures.empty());
  const auto s2 = bench::solve(data, r2, SolverConfig{}, 4);
  CHECK(s2.solved == 2);
  for (const char* id : {"room_0000", "room_0001"}) {
    CHECK(slurp(r1 / id / "estimate.json") == slurp(r2 / id / "estimate.json"));
  }

  // Interrupted run: drop one room's results and resume.
  const std::string before = slurp(r1 / "room_0001" / "estimate.json");
  fs::remove_all(r1 / "room_0001");
  const auto s3 = bench::solve(data, r1, SolverConfig{}, 1);
  CHECK(s3.skipped == 1);
  CHECK(s3.solved == 1);
  CHECK(slurp(r1 / "room_0001" / "estimate.json") == before);

  const auto ev = bench::evaluate(data, r1, scratch("eval"));
  CHECK(ev.missing.empty());
  CHECK(ev.rooms.size() == 2);

  const auto evdir = scratch("eval2");
  fs::remove_all(r2 / "room_0000");
  const auto partial = bench::evaluate(data, r2, evdir);
  CHECK(partial.missing == std::vector<std::string>{"room_0000"});
  CHECK(fs::exists(evdir / "table.csv"));
  CHECK(fs::exists(evdir / "rooms.json"));
}

TEST_CASE("solver errors are recorded per room") {
  const auto data = scratch("zero");
  bench::simulate(tiny(data, 1));
  // Overwrite the RIR with silence.
  io::write_rir(data / "room_0000" / "rir.bin", Observation::zeros(32, 129, 16000.0));
  const auto res = scratch("zero_res");
  const auto s = bench::solve(data, res, SolverConfig{}, 1);
  REQUIRE(s.failures.size() == 1);
  CHECK(io::read_json(res / "manifest.json")["rooms"][0]["status"] == "failed");
}

TEST_CASE("sweep shape") {
  auto c = tiny(scratch("sweep"), 2);
  const auto cells = bench::sweep(c, bench::SweepAxis::Scale, {1.0, 2.0, 5.0}, SolverConfig{});
  CHECK(cells.size() == 3);
  const auto csv = slurp(c.output_dir / "sweep.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 3);
  CHECK(io::read_json(c.output_dir / "sweep.json")["series"]["0-150"].size() == 3);
  CHECK_THROWS_AS(bench::parse_axis("speed"), Error);
}

TEST_CASE("command line") {
  const auto dir = scratch("cli");
  const std::string d = (dir / "d").string();
  CHECK(run_cli("simulate --rooms 1 --seed 3 --tmax 0.008 --out " + d) == 0);
  CHECK(run_cli("simulate --rooms 1 --seed 3 --tmax 0.008 --out " + (dir / "d2").string()) == 0);
  CHECK(slurp(dir / "d" / "room_0000" / "rir.bin") == slurp(dir / "d2" / "room_0000" / "rir.bin"));
  CHECK(run_cli("solve " + d + " --out " + (dir / "r").string()) == 0);
  CHECK(run_cli("evaluate " + d + " " + (dir / "r").string() + " --out " + (dir / "e").string()) == 0);
  CHECK(fs::exists(dir / "e" / "table.csv"));
  CHECK(run_cli("solve " + d + " --out " + (dir / "r3").string() + " --config " + (dir / "nope.json").string()) == 1);
  CHECK(run_cli("frobnicate") == 1);
  CHECK(run_cli("simulate --rooms 0 --out " + d) == 1);
  fs::remove_all(dir / "r" / "room_0000");
  CHECK(run_cli("evaluate " + d + " " + (dir / "r").string() + " --out " + (dir / "e").string()) == 2);
}

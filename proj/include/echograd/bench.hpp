#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "echograd/metrics.hpp"
#include "echograd/sfw.hpp"

namespace echograd::bench {

namespace fs = std::filesystem;

class MissingResult : public Error {
 public:
  using Error::Error;
};

struct ExperimentConfig {
  std::size_t num_rooms = 10;
  double array_scale = 2.0;
  double fs_hz = 16000.0;
  double tmax_s = 0.05;
  std::optional<double> psnr_db;
  std::uint64_t master_seed = 0;
  std::optional<fs::path> solver_config;
  fs::path output_dir = "out";
  std::size_t jobs = 1;
  /// Keep only rooms with fewer audible sources than this.
  std::optional<std::size_t> max_sources;

  void validate() const;
  /// round(tmax_s * fs_hz) + 1.
  [[nodiscard]] std::size_t num_samples() const;
};

struct RoomEntry {
  std::string id;
  std::uint64_t seed = 0;
  std::size_t audible_sources = 0;
  double volume_m3 = 0.0;
};

struct Dataset {
  std::vector<RoomEntry> rooms;
  /// Rejected candidate seeds and the reason, in draw order.
  std::vector<std::string> events;
};

std::string room_id(std::size_t index);

/// Candidate seed j is derive_seed(master_seed, j). Rooms take candidates in
/// order; a candidate whose placement fails or whose audible count exceeds
/// max_sources is skipped and logged.
Dataset select_rooms(const ExperimentConfig& config);

/// Writes <out>/room_XXXX/{scene.json,truth.json,rir.bin} and <out>/manifest.json.
/// When `seeds` is given those scenes are used as-is instead of drawing new ones.
Dataset simulate(const ExperimentConfig& config, const std::optional<std::vector<std::uint64_t>>& seeds = {});

struct SolveSummary {
  std::size_t solved = 0;
  std::size_t skipped = 0;
  std::vector<std::pair<std::string, std::string>> failures;
};

/// Solves every room of `dataset_dir` into <results_dir>/room_XXXX/{estimate.json,trace.json}.
/// Rooms that already have an estimate are skipped. <results_dir>/manifest.json
/// records the status of every room.
SolveSummary solve(const fs::path& dataset_dir, const fs::path& results_dir, const SolverConfig& config,
                   std::size_t jobs);

struct RoomEvaluation {
  std::string id;
  RoomSummary summary;
};

struct Evaluation {
  std::vector<RoomEvaluation> rooms;
  std::vector<TableRow> table;
  std::vector<std::string> missing;
};

/// Matches every room and writes <out>/table.csv and <out>/rooms.json.
Evaluation evaluate(const fs::path& dataset_dir, const fs::path& results_dir, const fs::path& out_dir,
                    const MatchTolerance& tolerance = {});

enum class SweepAxis { Psnr, Fs, Scale };
SweepAxis parse_axis(const std::string& name);
std::string to_string(SweepAxis axis);

struct SweepCell {
  double value = 0.0;
  Evaluation evaluation;
  SolveSummary solve;
};

/// Re-runs simulate/solve/evaluate for each axis value on the rooms selected
/// with the base config. Writes <out>/sweep.csv and <out>/sweep.json.
std::vector<SweepCell> sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<double>& values,
                             const SolverConfig& solver);

SolverConfig load_solver_config(const std::optional<fs::path>& path);

}  // namespace echograd::bench

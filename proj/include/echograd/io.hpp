#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "echograd/core_model.hpp"
#include "echograd/metrics.hpp"
#include "echograd/room_sim.hpp"
#include "echograd/sfw.hpp"

namespace echograd::io {

class FormatError : public Error {
 public:
  using Error::Error;
};

using nlohmann::json;

// Scene: {dimensions, absorptions, source, mic_positions, fs_hz, c_mps,
// array_center, filter_cutoff_hz}.
json scene_to_json(const RoomScene& scene, const PhysicalConstants& constants);
RoomScene scene_from_json(const json& j, PhysicalConstants* constants = nullptr);

// Measure: [{"a": amplitude, "r": [x, y, z]}, ...].
json measure_to_json(const SparseMeasure& measure);
SparseMeasure measure_from_json(const json& j);

/// Solver configuration; every key is optional and defaults to SolverConfig{}.
json solver_config_to_json(const SolverConfig& config);
SolverConfig solver_config_from_json(const json& j);

json trace_to_json(const SolveTrace& trace, const SolverConfig& config);
json report_to_json(const MatchReport& report);

/// RIR binary: "RIRF", u32 M, u32 N, u32 reserved (0), then M*N
/// little-endian float64 samples, row-major.
void write_rir(const std::filesystem::path& path, const Observation& obs);
Observation read_rir(const std::filesystem::path& path, double sample_rate_hz);

json read_json(const std::filesystem::path& path);
/// Writes `j` with two-space indentation and a trailing newline via a
/// temporary file renamed into place.
void write_json(const std::filesystem::path& path, const json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace echograd::io

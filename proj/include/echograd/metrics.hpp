#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "echograd/core_model.hpp"

namespace echograd {

class DegenerateDirection : public Error {
 public:
  using Error::Error;
};

struct MatchTolerance {
  double angular_deg = 2.0;
  double radial_m = 0.01;
};

struct MatchReport {
  double recall = 0.0;
  double precision = 0.0;
  double mean_radial_error_m = 0.0;
  double mean_angular_error_deg = 0.0;
  double mean_euclidean_error_m = 0.0;
  double mean_amplitude_error = 0.0;
  std::size_t num_true = 0;
  std::size_t num_estimated = 0;
  std::size_t num_recovered = 0;
  std::size_t num_assigned = 0;
  /// For each estimate, the index of its assigned truth source, if any.
  std::vector<std::optional<std::size_t>> assignment;
  /// For each truth source, whether some estimate lies within tolerance.
  std::vector<bool> recovered;
};

/// Angle in degrees between r_a - center and r_b - center.
double angular_distance_deg(const Vec3& a, const Vec3& b, const Vec3& center);
/// | ||r_a - center|| - ||r_b - center|| |.
double radial_distance(const Vec3& a, const Vec3& b, const Vec3& center);

MatchReport match_sources(const SparseMeasure& estimated, const SparseMeasure& truth, const Vec3& center,
                          const MatchTolerance& tolerance = {});

struct RoomSummary {
  MatchReport report;
  std::size_t num_true_sources = 0;
  double room_volume = 0.0;
};

struct SourceCountBin {
  std::size_t lower = 0;
  std::size_t upper = std::numeric_limits<std::size_t>::max();  // exclusive

  [[nodiscard]] bool contains(std::size_t n) const { return n >= lower && n < upper; }
  [[nodiscard]] std::string label() const;
};

std::vector<SourceCountBin> default_bins();

struct TableRow {
  SourceCountBin bin;
  std::size_t num_rooms = 0;
  double mean_volume_m3 = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double mean_radial_error_m = 0.0;
  double mean_angular_error_deg = 0.0;
  double mean_euclidean_error_m = 0.0;
  double mean_amplitude_error = 0.0;
};

/// Per-bin means over rooms, each room weighted equally. Empty bins are omitted.
std::vector<TableRow> aggregate(const std::vector<RoomSummary>& rooms,
                                const std::vector<SourceCountBin>& bins = default_bins());

void write_table_csv(std::ostream& out, const std::vector<TableRow>& rows);

}  // namespace echograd

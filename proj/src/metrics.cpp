#include "echograd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>

#include <Eigen/Geometry>

namespace echograd {

namespace {

constexpr double kDegenerate = 1e-12;

Vec3 direction_from(const Vec3& p, const Vec3& center, const char* what) {
  const Vec3 v = p - center;
  const double n = v.norm();
  if (!(n > kDegenerate)) throw DegenerateDirection(std::string(what) + " coincides with the array center");
  return v / n;
}

struct Candidate {
  std::size_t est;
  std::size_t truth;
  double angle;
  double radial;
};

class RunningMean {
 public:
  void add(double v) {
    if (std::isnan(v)) return;
    sum_ += v;
    ++count_;
  }
  [[nodiscard]] double value() const {
    return count_ == 0 ? std::numeric_limits<double>::quiet_NaN() : sum_ / static_cast<double>(count_);
  }

 private:
  double sum_ = 0.0;
  std::size_t count_ = 0;
};

}  // namespace

double angular_distance_deg(const Vec3& a, const Vec3& b, const Vec3& center) {
  const Vec3 ua = direction_from(a, center, "source");
  const Vec3 ub = direction_from(b, center, "source");
  // atan2 form stays accurate for small angles.
  return std::atan2(ua.cross(ub).norm(), ua.dot(ub)) * 180.0 / std::numbers::pi;
}

double radial_distance(const Vec3& a, const Vec3& b, const Vec3& center) {
  return std::abs((a - center).norm() - (b - center).norm());
}

MatchReport match_sources(const SparseMeasure& estimated, const SparseMeasure& truth, const Vec3& center,
                          const MatchTolerance& tolerance) {
  if (!(tolerance.angular_deg > 0.0) || !(tolerance.radial_m > 0.0)) throw Error("tolerances must be positive");
  for (const auto& s : estimated.spikes()) (void)direction_from(s.position, center, "estimated source");
  for (const auto& s : truth.spikes()) (void)direction_from(s.position, center, "true source");

  MatchReport report;
  report.num_true = truth.size();
  report.num_estimated = estimated.size();
  report.assignment.assign(estimated.size(), std::nullopt);
  report.recovered.assign(truth.size(), false);

  std::vector<Candidate> candidates;
  for (std::size_t e = 0; e < estimated.size(); ++e) {
    for (std::size_t t = 0; t < truth.size(); ++t) {
      const double angle = angular_distance_deg(estimated[e].position, truth[t].position, center);
      const double radial = radial_distance(estimated[e].position, truth[t].position, center);
      if (angle < tolerance.angular_deg && radial < tolerance.radial_m) {
        candidates.push_back({e, t, angle, radial});
        report.recovered[t] = true;
      }
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.angle != b.angle) return a.angle < b.angle;
    if (a.radial != b.radial) return a.radial < b.radial;
    if (a.truth != b.truth) return a.truth < b.truth;
    return a.est < b.est;
  });

  std::vector<bool> truth_used(truth.size(), false);
  RunningMean radial;
  RunningMean angular;
  RunningMean euclidean;
  RunningMean amplitude;
  for (const auto& c : candidates) {
    if (report.assignment[c.est] || truth_used[c.truth]) continue;
    report.assignment[c.est] = c.truth;
    truth_used[c.truth] = true;
    ++report.num_assigned;
    radial.add(c.radial);
    angular.add(c.angle);
    euclidean.add((estimated[c.est].position - truth[c.truth].position).norm());
    amplitude.add(std::abs(estimated[c.est].amplitude - truth[c.truth].amplitude));
  }
  report.num_recovered = static_cast<std::size_t>(std::count(report.recovered.begin(), report.recovered.end(), true));
  report.recall = report.num_true == 0 ? 1.0 : static_cast<double>(report.num_recovered) / static_cast<double>(report.num_true);
  if (report.num_estimated == 0) {
    report.precision = report.num_true == 0 ? 1.0 : 0.0;
  } else {
    report.precision = static_cast<double>(report.num_assigned) / static_cast<double>(report.num_estimated);
  }
  report.mean_radial_error_m = radial.value();
  report.mean_angular_error_deg = angular.value();
  report.mean_euclidean_error_m = euclidean.value();
  report.mean_amplitude_error = amplitude.value();
  return report;
}

std::string SourceCountBin::label() const {
  if (upper == std::numeric_limits<std::size_t>::max()) return std::to_string(lower) + "+";
  return std::to_string(lower) + "-" + std::to_string(upper);
}

std::vector<SourceCountBin> default_bins() {
  return {{0, 150}, {150, 300}, {300, 500}, {500, std::numeric_limits<std::size_t>::max()}};
}

std::vector<TableRow> aggregate(const std::vector<RoomSummary>& rooms, const std::vector<SourceCountBin>& bins) {
  std::vector<TableRow> rows;
  for (const auto& bin : bins) {
    RunningMean volume;
    RunningMean recall;
    RunningMean precision;
    RunningMean radial;
    RunningMean angular;
    RunningMean euclidean;
    RunningMean amplitude;
    std::size_t count = 0;
    for (const auto& room : rooms) {
      if (!bin.contains(room.num_true_sources)) continue;
      ++count;
      volume.add(room.room_volume);
      recall.add(room.report.recall);
      precision.add(room.report.precision);
      radial.add(room.report.mean_radial_error_m);
      angular.add(room.report.mean_angular_error_deg);
      euclidean.add(room.report.mean_euclidean_error_m);
      amplitude.add(room.report.mean_amplitude_error);
    }
    if (count == 0) continue;
    rows.push_back({bin, count, volume.value(), recall.value(), precision.value(), radial.value(), angular.value(),
                    euclidean.value(), amplitude.value()});
  }
  return rows;
}

void write_table_csv(std::ostream& out, const std::vector<TableRow>& rows) {
  out << "bin,mean_volume_m3,recall_pct,precision_pct,mean_radial_err_mm,mean_angular_err_deg,"
         "mean_euclidean_err_mm,mean_amplitude_err\n";
  const auto flags = out.flags();
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.bin.label() << ',' << r.mean_volume_m3 << ',' << 100.0 * r.recall << ',' << 100.0 * r.precision << ','
        << 1000.0 * r.mean_radial_error_m << ',' << r.mean_angular_error_deg << ','
        << 1000.0 * r.mean_euclidean_error_m << ',' << r.mean_amplitude_error << '\n';
  }
  out.flags(flags);
}

}  // namespace echograd

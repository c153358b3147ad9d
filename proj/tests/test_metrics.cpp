#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "echograd/metrics.hpp"

using namespace echograd;

namespace {

// Largest matching within tolerance, by exhaustive search.
std::size_t max_matching(const std::vector<std::vector<bool>>& ok) {
  const std::size_t ne = ok.size();
  const std::size_t nt = ne == 0 ? 0 : ok[0].size();
  std::vector<bool> used(nt, false);
  std::function<std::size_t(std::size_t)> go = [&](std::size_t e) -> std::size_t {
    if (e == ne) return 0;
    std::size_t best = go(e + 1);
    for (std::size_t t = 0; t < nt; ++t) {
      if (!ok[e][t] || used[t]) continue;
      used[t] = true;
      best = std::max(best, 1 + go(e + 1));
      used[t] = false;
    }
    return best;
  };
  return go(0);
}

}  // namespace

TEST_CASE("identical measures") {
  SparseMeasure psi;
  psi.add(1.0, Vec3(2, 0, 0));
  psi.add(0.5, Vec3(0, 3, 1));
  const auto r = match_sources(psi, psi, Vec3::Zero());
  CHECK(r.recall == 1.0);
  CHECK(r.precision == 1.0);
  CHECK(r.mean_radial_error_m == 0.0);
  CHECK(r.mean_angular_error_deg == 0.0);
  CHECK(r.mean_euclidean_error_m == 0.0);
  CHECK(r.mean_amplitude_error == 0.0);
}

TEST_CASE("doubles are discarded") {
  SparseMeasure truth;
  truth.add(1.0, Vec3(2, 1, 0));
  SparseMeasure est;
  est.add(1.0, Vec3(2, 1, 0));
  est.add(0.9, Vec3(2, 1, 0));
  const auto r = match_sources(est, truth, Vec3::Zero());
  CHECK(r.recall == 1.0);
  CHECK(r.precision == 0.5);
  CHECK(r.num_assigned == 1);
  CHECK(r.mean_amplitude_error == 0.0);
}

TEST_CASE("distances") {
  const Vec3 c(1, 1, 1);
  CHECK(angular_distance_deg(c + Vec3(1, 0, 0), c + Vec3(0, 2, 0), c) == doctest::Approx(90.0));
  CHECK(angular_distance_deg(c + Vec3(1, 0, 0), c + Vec3(1, 1e-9, 0), c) == doctest::Approx(1e-9 * 180 / M_PI).epsilon(1e-6));
  CHECK(radial_distance(c + Vec3(1, 0, 0), c + Vec3(0, 2, 0), c) == doctest::Approx(1.0));
  CHECK_THROWS_AS(angular_distance_deg(c, Vec3(0, 0, 0), c), DegenerateDirection);
}

TEST_CASE("out-of-tolerance pairs never match") {
  SparseMeasure truth;
  truth.add(1.0, Vec3(3, 0, 0));
  SparseMeasure est;
  est.add(1.0, Vec3(3.02, 0, 0));  // 2 cm radial
  est.add(1.0, Vec3(3, 0.11, 0));  // 2.1 degrees
  const auto r = match_sources(est, truth, Vec3::Zero());
  CHECK(r.recall == 0.0);
  CHECK(r.precision == 0.0);
  CHECK(std::isnan(r.mean_radial_error_m));
  CHECK(match_sources(SparseMeasure(), truth, Vec3::Zero()).precision == 0.0);
  CHECK_THROWS_AS(match_sources(est, truth, Vec3::Zero(), {0.0, 0.01}), Error);
  SparseMeasure bad;
  bad.add(1.0, Vec3::Zero());
  CHECK_THROWS_AS(match_sources(bad, truth, Vec3::Zero()), DegenerateDirection);
}

TEST_CASE("greedy recall agrees with the exhaustive oracle") {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> jitter(0.0, 0.006);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Vec3 c(0.5, 0.5, 0.5);
  const MatchTolerance tol;
  for (int trial = 0; trial < 30; ++trial) {
    SparseMeasure truth;
    SparseMeasure est;
    // Clustered truths so several estimates compete for the same sources.
    const Vec3 base = c + 3.0 * Vec3(u(gen), u(gen), u(gen)).normalized();
    for (int i = 0; i < 10; ++i) truth.add(0.5, base + Vec3(jitter(gen), jitter(gen), jitter(gen)) * 3);
    for (int i = 0; i < 10; ++i) est.add(0.5, truth[static_cast<std::size_t>(i)].position + Vec3(jitter(gen), jitter(gen), jitter(gen)));

    std::vector<std::vector<bool>> ok(10, std::vector<bool>(10));
    std::size_t recovered = 0;
    for (std::size_t t = 0; t < 10; ++t) {
      bool any = false;
      for (std::size_t e = 0; e < 10; ++e) {
        ok[e][t] = angular_distance_deg(est[e].position, truth[t].position, c) < tol.angular_deg &&
                   radial_distance(est[e].position, truth[t].position, c) < tol.radial_m;
        any = any || ok[e][t];
      }
      recovered += any;
    }
    const auto r = match_sources(est, truth, c, tol);
    CHECK(r.recall == doctest::Approx(static_cast<double>(recovered) / 10.0));
    CHECK(r.num_assigned <= max_matching(ok));

    // Permutation invariance.
    std::vector<Spike> shuffled = est.spikes();
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    CHECK(match_sources(SparseMeasure(shuffled), truth, c, tol).recall == r.recall);
    // Tighter tolerances never help.
    const auto tight = match_sources(est, truth, c, {1.0, 0.005});
    CHECK(tight.recall <= r.recall);
    CHECK(tight.precision <= r.precision);
  }
}

TEST_CASE("aggregation") {
  RoomSummary a;
  a.report.recall = 0.8;
  a.report.precision = 0.5;
  a.num_true_sources = 40;
  a.room_volume = 100.0;
  RoomSummary b = a;
  b.report.recall = 1.0;
  b.room_volume = 50.0;
  b.report.mean_radial_error_m = std::nan("");
  RoomSummary c = a;
  c.num_true_sources = 600;
  const auto rows = aggregate({a, b, c});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].bin.label() == "0-150");
  CHECK(rows[0].num_rooms == 2);
  CHECK(rows[0].recall == doctest::Approx(0.9));
  CHECK(rows[0].mean_volume_m3 == doctest::Approx(75.0));
  CHECK(rows[0].mean_radial_error_m == 0.0);
  CHECK(rows[1].bin.label() == "500+");

  const auto one = aggregate({a});
  REQUIRE(one.size() == 1);
  CHECK(one[0].recall == 0.8);

  std::ostringstream csv;
  write_table_csv(csv, one);
  CHECK(csv.str().rfind("bin,mean_volume_m3,recall_pct,precision_pct,mean_radial_err_mm,mean_angular_err_deg,"
                        "mean_euclidean_err_mm,mean_amplitude_err\n0-150,100,80,50,",
                        0) == 0);
}

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "echograd/core_model.hpp"

using namespace echograd;

namespace {

constexpr double kPi = std::numbers::pi;

// Direct evaluation, no tables.
double naive_gamma(const Vec3& mic, const Vec3& r, std::size_t n, double fs, double c) {
  const double d = (mic - r).norm();
  const double u = static_cast<double>(n) - fs * d / c;
  const double k = u == 0.0 ? 1.0 : std::sin(kPi * u) / (kPi * u);
  return k / (4.0 * kPi * d);
}

MicArray random_array(std::mt19937_64& gen, std::size_t m) {
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  std::vector<Vec3> mics;
  for (std::size_t i = 0; i < m; ++i) mics.emplace_back(u(gen), u(gen), u(gen));
  return MicArray(mics, 16000.0);
}

Vec3 random_far_point(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (;;) {
    Vec3 p(u(gen), u(gen), u(gen));
    if (p.norm() > 0.5) return p;
  }
}

Observation random_obs(std::mt19937_64& gen, std::size_t m, std::size_t n) {
  std::normal_distribution<double> g;
  RowMatrix x(m, n);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(gen);
  return {x, 16000.0};
}

}  // namespace

TEST_CASE("gamma at an exact arrival sample") {
  MicArray array({Vec3::Zero()}, 16000.0);
  const Vec3 r(0.686, 0, 0);
  CHECK(gamma_eval(array, 0, 32, r) == doctest::Approx(0.1160021451107109).epsilon(1e-13));
  CHECK(std::abs(gamma_eval(array, 0, 33, r)) < 1e-15);
  CHECK(std::abs(gamma_eval(array, 0, 100, r)) < 1e-15);
}

TEST_CASE("gamma half a sample off the grid") {
  MicArray array({Vec3::Zero()}, 16000.0);
  // 343 * 32.5 / 16000 m: kappa = 2/pi.
  CHECK(gamma_eval(array, 0, 32, Vec3(0.69671875, 0, 0)) == doctest::Approx(0.07271311676507757).epsilon(1e-13));
  CHECK(gamma_eval(array, 0, 32, Vec3(0.6968375, 0, 0)) == doctest::Approx(0.07189323252581673).epsilon(1e-13));
}

TEST_CASE("gamma matches direct evaluation") {
  std::mt19937_64 gen(11);
  const auto array = random_array(gen, 6);
  const std::size_t n = 300;
  ForwardOperator op(array, n);
  std::vector<double> atom(op.atom_size());
  for (int trial = 0; trial < 20; ++trial) {
    const Vec3 r = random_far_point(gen);
    op.atom(r, atom);
    double worst = 0.0;
    for (std::size_t m = 0; m < array.size(); ++m) {
      for (std::size_t k = 0; k < n; ++k) {
        const double ref = naive_gamma(array.position(m), r, k, 16000.0, 343.0);
        worst = std::max(worst, std::abs(atom[m * n + k] - ref));
      }
    }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("filter with a lower cutoff") {
  FilterSpec f{FilterKind::IdealLowpass, 4000.0};
  CHECK(f.evaluate(0.0) == 1.0);
  CHECK(std::abs(f.evaluate(1.0 / 8000.0)) < 1e-16);
  CHECK(f.evaluate(1.0 / 16000.0) == doctest::Approx(2.0 / kPi).epsilon(1e-14));
}

TEST_CASE("positions too close to a microphone are rejected") {
  MicArray array({Vec3::Zero()}, 16000.0);
  CHECK_THROWS_AS((void)gamma_eval(array, 0, 0, Vec3(0.1, 0, 0)), DistanceBelowEpsilon);
  ForwardOperator op(array, 10);
  CHECK_FALSE(op.admissible(Vec3(0.0, 0.19, 0)));
  CHECK(op.admissible(Vec3(0.0, 0.21, 0)));
}

TEST_CASE("invalid inputs") {
  CHECK_THROWS_AS(SparseMeasure().add(-1.0, Vec3(1, 1, 1)), Error);
  CHECK_THROWS_AS(SparseMeasure().add(1.0, Vec3(NAN, 1, 1)), Error);
  CHECK_THROWS_AS(MicArray({Vec3::Zero(), Vec3::Zero()}, 16000.0), Error);
  CHECK_THROWS_AS(PhysicalConstants{250.0}.validate(), Error);
  CHECK_THROWS_AS(MicArray({Vec3::Zero()}, -1.0), Error);
}

TEST_CASE("forward_apply of empty and single spikes") {
  MicArray array({Vec3::Zero(), Vec3(0.0, 0.0, 0.0686)}, 16000.0);
  const auto empty = forward_apply(SparseMeasure(), array, 64);
  CHECK(empty.samples().isZero(0.0));
  CHECK(empty.num_mics() == 2);
  CHECK(empty.num_samples() == 64);

  // Exact arrivals at samples 32 (mic 0) and 36 (mic 1, 0.7546 m).
  SparseMeasure one;
  one.add(1.0, Vec3(0.686, 0, 0));
  MicArray single({Vec3::Zero()}, 16000.0);
  const auto x = forward_apply(one, single, 64);
  for (std::size_t k = 0; k < 64; ++k) {
    if (k == 32) {
      CHECK(x.samples()(0, k) == doctest::Approx(1.0 / (4 * kPi * 0.686)).epsilon(1e-13));
    } else {
      CHECK(std::abs(x.samples()(0, k)) < 1e-15);
    }
  }
}

TEST_CASE("forward_apply superposition") {
  std::mt19937_64 gen(3);
  const auto array = random_array(gen, 4);
  const Vec3 r1 = random_far_point(gen);
  const Vec3 r2 = random_far_point(gen);
  SparseMeasure both;
  both.add(1.0, r1);
  both.add(0.5, r2);
  SparseMeasure a;
  a.add(1.0, r1);
  SparseMeasure b;
  b.add(0.5, r2);
  const RowMatrix sum = forward_apply(a, array, 200).samples() + forward_apply(b, array, 200).samples();
  CHECK((forward_apply(both, array, 200).samples() - sum).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("eta of zero residual and of a self atom") {
  std::mt19937_64 gen(5);
  const auto array = random_array(gen, 5);
  const Vec3 r0 = random_far_point(gen);
  CHECK(eta_eval(Observation::zeros(5, 128, 16000.0), array, r0) == 0.0);
  CHECK(eta_gradient(Observation::zeros(5, 128, 16000.0), array, r0).isZero(0.0));

  SparseMeasure unit;
  unit.add(1.0, r0);
  const auto y = forward_apply(unit, array, 128);
  double direct = 0.0;
  for (std::size_t m = 0; m < 5; ++m) {
    for (std::size_t k = 0; k < 128; ++k) direct += std::pow(naive_gamma(array.position(m), r0, k, 16000.0, 343.0), 2);
  }
  CHECK(eta_eval(y, array, r0) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("adjoint identity") {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto array = random_array(gen, 1 + trial % 8);
    const std::size_t n = 16 + 12 * trial;
    const auto y = random_obs(gen, array.size(), n);
    SparseMeasure psi;
    std::uniform_real_distribution<double> amp(0.0, 1.0);
    for (int k = 0; k < 1 + trial % 10; ++k) psi.add(amp(gen), random_far_point(gen));
    const auto x = forward_apply(psi, array, n);
    const double lhs = (x.samples().array() * y.samples().array()).sum();
    double rhs = 0.0;
    for (const auto& s : psi.spikes()) rhs += s.amplitude * eta_eval(y, array, s.position);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(std::abs(lhs), 1e-300) + 1e-300);
  }
}

TEST_CASE("eta gradient matches central differences") {
  std::mt19937_64 gen(23);
  const auto array = random_array(gen, 8);
  const auto y = random_obs(gen, 8, 256);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec3 r = random_far_point(gen);
    const Vec3 g = eta_gradient(y, array, r);
    Vec3 fd;
    for (int i = 0; i < 3; ++i) {
      Vec3 p = r;
      Vec3 q = r;
      p[i] += 1e-6;
      q[i] -= 1e-6;
      fd[i] = (eta_eval(y, array, p) - eta_eval(y, array, q)) / 2e-6;
    }
    CHECK((g - fd).norm() <= 1e-5 * std::max(g.norm(), 1e-8));
  }
}

TEST_CASE("gradient symmetry about a mirror plane") {
  MicArray array({Vec3(-0.05, 0.0, 0.0), Vec3(0.05, 0.0, 0.0)}, 16000.0);
  std::mt19937_64 gen(29);
  std::normal_distribution<double> g;
  RowMatrix x(2, 100);
  for (Eigen::Index k = 0; k < 100; ++k) x(0, k) = x(1, k) = g(gen);
  const Observation y(x, 16000.0);
  const Vec3 grad = eta_gradient(y, array, Vec3(0.0, 0.7, 0.4));
  CHECK(std::abs(grad.x()) < 1e-12 * grad.norm());
}

TEST_CASE("eta with gradient agrees with eta alone") {
  std::mt19937_64 gen(31);
  const auto array = random_array(gen, 3);
  const auto y = random_obs(gen, 3, 90);
  ForwardOperator op(array, 90);
  const Eigen::VectorXd flat = flatten(y, 90);
  const std::span<const double> view(flat.data(), static_cast<std::size_t>(flat.size()));
  const Vec3 r = random_far_point(gen);
  Vec3 grad;
  CHECK(op.eta(view, r, grad) == doctest::Approx(op.eta(view, r)).epsilon(1e-14));
}

TEST_CASE("observation helpers") {
  RowMatrix x(2, 5);
  x << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10;
  Observation obs(x, 1000.0);
  CHECK(obs.duration() == doctest::Approx(0.004));
  const auto t = obs.truncated(3);
  CHECK(t.num_samples() == 3);
  CHECK(t.samples()(1, 2) == 8);
  const auto flat = flatten(obs, 2);
  CHECK(flat.size() == 4);
  CHECK(flat[2] == 6);
  const auto back = unflatten(std::span<const double>(flat.data(), 4), 2, 1000.0);
  CHECK(back.samples()(1, 1) == 7);
  CHECK_THROWS_AS((void)obs.truncated(6), Error);
}

TEST_CASE("sinc helpers") {
  CHECK(sinc(0.0) == 1.0);
  CHECK(sinc(kPi) == doctest::Approx(0.0));
  CHECK(sinc_derivative(0.0) == 0.0);
  const double x = 0.7;
  CHECK(sinc_derivative(x) == doctest::Approx((sinc(x + 1e-6) - sinc(x - 1e-6)) / 2e-6).epsilon(1e-8));
}

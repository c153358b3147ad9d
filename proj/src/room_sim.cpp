#include "echograd/room_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace echograd {

namespace {

struct Em32Direction {
  double colatitude_deg;
  double azimuth_deg;
};

constexpr Em32Direction kEm32[] = {
#include "em32_angles.inc"
};
static_assert(std::size(kEm32) == 32);

constexpr double kEm32Diameter = 0.084;

// Reflection counts on the low and high wall of one axis for lattice
// indices (n, p).
struct AxisReflections {
  int low;
  int high;
};

AxisReflections reflections(int n, int p) { return {std::abs(n - p), std::abs(n)}; }

double image_coordinate(double source, double length, int n, int p) {
  return (p == 0 ? source : -source) + 2.0 * n * length;
}

double image_amplitude(const std::array<double, 6>& beta, const int n[3], const int p[3]) {
  double a = 1.0;
  for (int axis = 0; axis < 3; ++axis) {
    const auto r = reflections(n[axis], p[axis]);
    a *= std::pow(beta[2 * axis], r.low) * std::pow(beta[2 * axis + 1], r.high);
  }
  return a;
}

std::array<double, 6> betas(const RoomScene& scene) {
  std::array<double, 6> beta{};
  for (int w = 0; w < 6; ++w) beta[w] = reflection_coefficient(scene.wall_absorptions[w]);
  return beta;
}

bool strictly_inside(const Vec3& p, const Vec3& dims) {
  return (p.array() > 0.0).all() && (p.array() < dims.array()).all();
}

double wall_distance(const Vec3& p, const Vec3& dims) {
  return std::min(p.minCoeff(), (dims - p).minCoeff());
}

}  // namespace

double Rng::uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  double u1 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) { return splitmix64(master ^ splitmix64(index)); }

void RoomScene::validate() const {
  if (!(dimensions.array() > 0.0).all() || !dimensions.allFinite()) throw Error("room dimensions must be positive");
  for (double a : wall_absorptions) {
    if (!(a >= 0.0 && a <= 1.0)) throw Error("wall absorption must lie in [0, 1]");
  }
  if (!strictly_inside(source_position, dimensions)) throw Error("source must be strictly inside the room");
  for (const auto& mic : array.positions()) {
    if (!strictly_inside(mic, dimensions)) throw Error("microphones must be strictly inside the room");
  }
}

double reflection_coefficient(double absorption) { return std::sqrt(1.0 - absorption); }

SparseMeasure image_sources(const RoomScene& scene, double max_distance_m, const Vec3& reference) {
  if (!(max_distance_m > 0.0)) throw Error("max_distance_m must be positive");
  scene.validate();
  const auto& mics = scene.array.positions();
  double direct = 0.0;
  for (const auto& mic : mics) direct = std::max(direct, (scene.source_position - mic).norm());
  if (max_distance_m < direct) {
    std::ostringstream msg;
    msg << "max distance " << max_distance_m << " m is below the direct-path distance " << direct << " m";
    throw EmptyRoom(msg.str());
  }

  double spread = 0.0;
  for (const auto& mic : mics) spread = std::max(spread, (mic - reference).norm());
  const double reach = max_distance_m + spread;
  const auto beta = betas(scene);
  const Vec3& L = scene.dimensions;
  const Vec3& s = scene.source_position;

  SparseMeasure out;
  int p[3];
  int n[3];
  // Lattice bounds per axis and parity: |coord - ref| <= reach.
  auto n_range = [&](int axis, int parity) {
    const double offset = parity == 0 ? s[axis] : -s[axis];
    const double lo = (reference[axis] - reach - offset) / (2.0 * L[axis]);
    const double hi = (reference[axis] + reach - offset) / (2.0 * L[axis]);
    return std::pair<int, int>{static_cast<int>(std::ceil(lo)), static_cast<int>(std::floor(hi))};
  };
  for (p[0] = 0; p[0] < 2; ++p[0]) {
    for (p[1] = 0; p[1] < 2; ++p[1]) {
      for (p[2] = 0; p[2] < 2; ++p[2]) {
        const auto rx = n_range(0, p[0]);
        const auto ry = n_range(1, p[1]);
        const auto rz = n_range(2, p[2]);
        for (n[0] = rx.first; n[0] <= rx.second; ++n[0]) {
          for (n[1] = ry.first; n[1] <= ry.second; ++n[1]) {
            for (n[2] = rz.first; n[2] <= rz.second; ++n[2]) {
              const Vec3 image(image_coordinate(s.x(), L.x(), n[0], p[0]), image_coordinate(s.y(), L.y(), n[1], p[1]),
                               image_coordinate(s.z(), L.z(), n[2], p[2]));
              bool audible = true;
              for (const auto& mic : mics) {
                if ((image - mic).norm() > max_distance_m) {
                  audible = false;
                  break;
                }
              }
              if (audible) out.add(image_amplitude(beta, n, p), image);
            }
          }
        }
      }
    }
  }
  return out;
}

SparseMeasure image_lattice(const RoomScene& scene, int order) {
  const auto beta = betas(scene);
  const Vec3& L = scene.dimensions;
  const Vec3& s = scene.source_position;
  SparseMeasure out;
  int n[3];
  int p[3];
  for (n[0] = -order; n[0] <= order; ++n[0]) {
    for (n[1] = -order; n[1] <= order; ++n[1]) {
      for (n[2] = -order; n[2] <= order; ++n[2]) {
        for (p[0] = 0; p[0] < 2; ++p[0]) {
          for (p[1] = 0; p[1] < 2; ++p[1]) {
            for (p[2] = 0; p[2] < 2; ++p[2]) {
              Vec3 image;
              for (int axis = 0; axis < 3; ++axis) {
                image[axis] = image_coordinate(s[axis], L[axis], n[axis], p[axis]);
              }
              out.add(image_amplitude(beta, n, p), image);
            }
          }
        }
      }
    }
  }
  return out;
}

std::vector<Vec3> em32_geometry(double scale) {
  if (!(scale > 0.0)) throw Error("array scale must be positive");
  const double radius = 0.5 * kEm32Diameter * scale;
  constexpr double deg = std::numbers::pi / 180.0;
  std::vector<Vec3> points;
  points.reserve(std::size(kEm32));
  for (const auto& dir : kEm32) {
    const double theta = dir.colatitude_deg * deg;
    const double phi = dir.azimuth_deg * deg;
    points.emplace_back(radius * std::sin(theta) * std::cos(phi), radius * std::sin(theta) * std::sin(phi),
                        radius * std::cos(theta));
  }
  return points;
}

RoomScene sample_scene(std::uint64_t seed, double array_scale, const SceneConstraints& constraints) {
  if (!(array_scale > 0.0)) throw Error("array scale must be positive");
  Rng rng(seed);
  Vec3 dims;
  dims.x() = rng.uniform(constraints.length_range.first, constraints.length_range.second);
  dims.y() = rng.uniform(constraints.width_range.first, constraints.width_range.second);
  dims.z() = rng.uniform(constraints.height_range.first, constraints.height_range.second);
  if (constraints.fixed_dimensions) dims = *constraints.fixed_dimensions;

  std::array<double, 6> absorptions{};
  for (double& a : absorptions) a = rng.uniform(constraints.absorption_range.first, constraints.absorption_range.second);

  const auto geometry = em32_geometry(array_scale);
  const double sep = constraints.separation_m;
  for (int attempt = 0; attempt < constraints.max_attempts; ++attempt) {
    Vec3 source;
    Vec3 center;
    // Uniform over the wall-feasible box; only the source-array distance is rejected.
    for (int i = 0; i < 3; ++i) source[i] = rng.uniform(sep, dims[i] - sep);
    for (int i = 0; i < 3; ++i) center[i] = rng.uniform(sep, dims[i] - sep);
    if (wall_distance(source, dims) < sep || wall_distance(center, dims) < sep || (source - center).norm() < sep) {
      continue;
    }
    std::vector<Vec3> mics;
    mics.reserve(geometry.size());
    for (const auto& g : geometry) mics.push_back(center + g);
    if (!std::all_of(mics.begin(), mics.end(), [&](const Vec3& m) { return strictly_inside(m, dims); })) continue;
    RoomScene scene{dims, absorptions, source, MicArray(std::move(mics), constraints.sample_rate_hz), center};
    scene.validate();
    return scene;
  }
  std::ostringstream msg;
  msg << "no feasible placement after " << constraints.max_attempts << " attempts in a " << dims.x() << " x "
      << dims.y() << " x " << dims.z() << " room";
  throw PlacementFailed(msg.str());
}

SynthesizedRir synthesize_rir(const RoomScene& scene, std::size_t num_samples, const PhysicalConstants& constants) {
  if (num_samples == 0) throw Error("number of samples must be at least 1");
  const double horizon = constants.speed_of_sound_mps * static_cast<double>(num_samples - 1) /
                         scene.array.sample_rate_hz();
  SparseMeasure truth = image_sources(scene, horizon, scene.array_center);
  Observation obs = forward_apply(truth, scene.array, num_samples, constants);
  return {std::move(obs), std::move(truth)};
}

std::size_t audible_source_count(const RoomScene& scene, std::size_t num_samples, const PhysicalConstants& constants) {
  const double horizon = constants.speed_of_sound_mps * static_cast<double>(num_samples - 1) /
                         scene.array.sample_rate_hz();
  return image_sources(scene, horizon, scene.array_center).size();
}

Observation add_noise(const Observation& obs, const NoiseSpec& spec) {
  if (!spec.psnr_db) return obs;
  if (!std::isfinite(*spec.psnr_db)) throw Error("PSNR must be finite");
  const double peak = obs.samples().cwiseAbs().maxCoeff();
  const double sigma = peak * std::pow(10.0, -*spec.psnr_db / 20.0);
  Rng rng(spec.seed);
  Observation noisy = obs;
  auto& x = noisy.samples();
  for (Eigen::Index m = 0; m < x.rows(); ++m) {
    for (Eigen::Index n = 0; n < x.cols(); ++n) x(m, n) += sigma * rng.normal();
  }
  return noisy;
}

}  // namespace echograd

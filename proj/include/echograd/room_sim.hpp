#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "echograd/core_model.hpp"

namespace echograd {

class EmptyRoom : public Error {
 public:
  using Error::Error;
};

class PlacementFailed : public Error {
 public:
  using Error::Error;
};

/// Reproducible random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Conversions to real numbers are done here rather than through
/// the <random> distributions, whose algorithms are implementation-defined:
///   uniform01  = (x >> 11) * 2^-53
///   normal     = Box-Muller on two uniform01 draws (cosine branch)
/// Child streams are seeded with derive_seed(parent_seed, index).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  double normal();

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);
/// Seed of the `index`-th child stream: splitmix64(master ^ splitmix64(index)).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Wall order for absorptions: x=0, x=Lx, y=0, y=Ly, z=0, z=Lz.
struct RoomScene {
  Vec3 dimensions;
  std::array<double, 6> wall_absorptions{};
  Vec3 source_position;
  MicArray array;
  Vec3 array_center;

  [[nodiscard]] double volume() const { return dimensions.prod(); }
  /// Checks that dimensions are positive, absorptions lie in [0, 1] and
  /// that the source and every microphone are strictly inside the room.
  void validate() const;
};

struct NoiseSpec {
  std::optional<double> psnr_db;
  std::uint64_t seed = 0;
};

struct SceneConstraints {
  std::pair<double, double> length_range{2.0, 10.0};
  std::pair<double, double> width_range{2.0, 10.0};
  std::pair<double, double> height_range{2.0, 5.0};
  std::pair<double, double> absorption_range{0.01, 0.3};
  /// Minimum source-wall, array-wall and source-array distance (m).
  double separation_m = 1.0;
  /// Overrides the sampled dimensions when set.
  std::optional<Vec3> fixed_dimensions;
  double sample_rate_hz = 16000.0;
  int max_attempts = 10000;
};

/// Amplitude reflection coefficient of a wall with energy absorption alpha.
double reflection_coefficient(double absorption);

/// Image sources audible by every microphone within `max_distance_m`.
SparseMeasure image_sources(const RoomScene& scene, double max_distance_m, const Vec3& reference);

/// Brute-force lattice enumeration with n in [-order, order]^3, unfiltered.
/// Used as a cross-check and as the reference enumeration in tests.
SparseMeasure image_lattice(const RoomScene& scene, int order);

RoomScene sample_scene(std::uint64_t seed, double array_scale, const SceneConstraints& constraints = {});

/// The em32 capsule layout scaled by `scale`, centered at the origin.
std::vector<Vec3> em32_geometry(double scale);

struct SynthesizedRir {
  Observation observation;
  SparseMeasure truth;
};

/// Noiseless RIR over `num_samples` samples and the image sources used to build it.
SynthesizedRir synthesize_rir(const RoomScene& scene, std::size_t num_samples, const PhysicalConstants& constants = {});

/// Number of image sources audible within a window of `num_samples` samples.
std::size_t audible_source_count(const RoomScene& scene, std::size_t num_samples,
                                 const PhysicalConstants& constants = {});

Observation add_noise(const Observation& obs, const NoiseSpec& spec);

}  // namespace echograd

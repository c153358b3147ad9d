#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace echograd {

using Vec3 = Eigen::Vector3d;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A source position was queried closer than `kMinMicDistance` to a microphone.
class DistanceBelowEpsilon : public Error {
 public:
  using Error::Error;
};

// Minimum source-microphone distance (m). Below it the Green function is
// treated as undefined.
inline constexpr double kMinMicDistance = 0.2;

struct Spike {
  double amplitude = 0.0;
  Vec3 position = Vec3::Zero();
};

/// Finite positive combination of Dirac masses in R^3.
class SparseMeasure {
 public:
  SparseMeasure() = default;
  explicit SparseMeasure(std::vector<Spike> spikes);

  void add(double amplitude, const Vec3& position);

  [[nodiscard]] const std::vector<Spike>& spikes() const { return spikes_; }
  [[nodiscard]] std::size_t size() const { return spikes_.size(); }
  [[nodiscard]] bool empty() const { return spikes_.empty(); }
  [[nodiscard]] const Spike& operator[](std::size_t i) const { return spikes_[i]; }

  /// Total variation norm, i.e. the sum of amplitudes.
  [[nodiscard]] double total_variation() const;

 private:
  static void validate(const Spike& s);
  std::vector<Spike> spikes_;
};

enum class FilterKind { IdealLowpass };

struct FilterSpec {
  FilterKind kind = FilterKind::IdealLowpass;
  double cutoff_hz = 8000.0;

  /// kappa(t) = sinc(pi * 2 * cutoff * t), with sinc(0) = 1.
  [[nodiscard]] double evaluate(double t) const;
};

class MicArray {
 public:
  /// Builds an array whose filter is the ideal low-pass at fs/2.
  MicArray(std::vector<Vec3> positions, double sample_rate_hz);
  MicArray(std::vector<Vec3> positions, double sample_rate_hz, FilterSpec filter);

  [[nodiscard]] const std::vector<Vec3>& positions() const { return positions_; }
  [[nodiscard]] const Vec3& position(std::size_t m) const { return positions_[m]; }
  [[nodiscard]] std::size_t size() const { return positions_.size(); }
  [[nodiscard]] double sample_rate_hz() const { return sample_rate_hz_; }
  [[nodiscard]] const FilterSpec& filter() const { return filter_; }
  [[nodiscard]] Vec3 center() const;
  /// Largest microphone distance from `center()`.
  [[nodiscard]] double radius() const;

 private:
  std::vector<Vec3> positions_;
  double sample_rate_hz_;
  FilterSpec filter_;
};

/// M x N block of samples; row m is microphone m.
class Observation {
 public:
  Observation(RowMatrix samples, double sample_rate_hz);
  static Observation zeros(std::size_t num_mics, std::size_t num_samples, double sample_rate_hz);

  [[nodiscard]] const RowMatrix& samples() const { return samples_; }
  RowMatrix& samples() { return samples_; }
  [[nodiscard]] std::size_t num_mics() const { return static_cast<std::size_t>(samples_.rows()); }
  [[nodiscard]] std::size_t num_samples() const { return static_cast<std::size_t>(samples_.cols()); }
  [[nodiscard]] double sample_rate_hz() const { return sample_rate_hz_; }
  [[nodiscard]] double duration() const;

  /// The first `length` samples of every channel.
  [[nodiscard]] Observation truncated(std::size_t length) const;

 private:
  RowMatrix samples_;
  double sample_rate_hz_;
};

struct PhysicalConstants {
  double speed_of_sound_mps = 343.0;

  void validate() const;
};

/// Discretized acoustic forward operator for a fixed array and number of samples.
///
/// Atoms are the vectors gamma(r) in R^{M*N}, stored channel-major (sample n
/// of microphone m at index m*N + n). The sinc kernel is evaluated through
/// the angle-difference identity so each atom costs one sin/cos pair per
/// microphone instead of one per sample.
class ForwardOperator {
 public:
  ForwardOperator(const MicArray& array, std::size_t num_samples, PhysicalConstants constants = {});

  [[nodiscard]] std::size_t num_mics() const { return mics_.size(); }
  [[nodiscard]] std::size_t num_samples() const { return num_samples_; }
  [[nodiscard]] std::size_t atom_size() const { return mics_.size() * num_samples_; }
  [[nodiscard]] const std::vector<Vec3>& mics() const { return mics_; }
  [[nodiscard]] double sample_rate_hz() const { return sample_rate_; }
  [[nodiscard]] const PhysicalConstants& constants() const { return constants_; }

  /// Throws DistanceBelowEpsilon unless `r` is at least kMinMicDistance from every microphone.
  void check_position(const Vec3& r) const;
  [[nodiscard]] bool admissible(const Vec3& r) const;

  [[nodiscard]] double gamma(std::size_t mic, std::size_t sample, const Vec3& r) const;

  /// Writes gamma(r) into `out` (size atom_size()).
  void atom(const Vec3& r, std::span<double> out) const;
  /// Writes gamma(r) and its three spatial partial derivatives.
  void atom_with_gradient(const Vec3& r, std::span<double> out, std::span<double> dx, std::span<double> dy,
                          std::span<double> dz) const;

  /// <y, gamma(r)> with y flattened channel-major.
  [[nodiscard]] double eta(std::span<const double> residual, const Vec3& r) const;
  [[nodiscard]] double eta(std::span<const double> residual, const Vec3& r, Vec3& gradient) const;

  /// Sum_k a_k gamma(r_k), flattened channel-major.
  [[nodiscard]] Eigen::VectorXd apply(const SparseMeasure& measure) const;

 private:
  // Arrival time of a wavefront travelling `distance` metres, in units of
  // the kernel's zero-crossing period.
  [[nodiscard]] double arrival_phase(double distance) const;

  std::vector<Vec3> mics_;
  std::size_t num_samples_;
  double sample_rate_;
  double bandwidth_;  // 2 * cutoff
  PhysicalConstants constants_;
  double ratio_;  // bandwidth / fs
  std::vector<double> sin_table_;
  std::vector<double> cos_table_;
};

/// Flattens the first `length` samples of each channel channel-major.
Eigen::VectorXd flatten(const Observation& obs, std::size_t length);
Observation unflatten(std::span<const double> flat, std::size_t num_mics, double sample_rate_hz);

double gamma_eval(const MicArray& array, std::size_t mic_index, std::size_t sample_index, const Vec3& position,
                  const PhysicalConstants& constants = {});

Observation forward_apply(const SparseMeasure& measure, const MicArray& array, std::size_t num_samples,
                          const PhysicalConstants& constants = {});

double eta_eval(const Observation& residual, const MicArray& array, const Vec3& position,
                const PhysicalConstants& constants = {});

Vec3 eta_gradient(const Observation& residual, const MicArray& array, const Vec3& position,
                  const PhysicalConstants& constants = {});

/// sinc(x) = sin(x)/x with sinc(0) = 1.
double sinc(double x);
/// Derivative of sinc, 0 at the origin.
double sinc_derivative(double x);

}  // namespace echograd

#include "echograd/core_model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace echograd {

namespace {

constexpr double kPi = std::numbers::pi;

// Below this |u| the kernel switches from the table identity to direct
// evaluation, and below kTaylor to the series expansion.
constexpr double kDirect = 0.5;
constexpr double kTaylor = 1e-4;

struct SincPair {
  double value;
  double derivative;
};

SincPair sinc_from_parts(double s, double c, double u) {
  if (std::abs(u) < kTaylor) {
    const double u2 = u * u;
    return {1.0 - u2 / 6.0 + u2 * u2 / 120.0, -u / 3.0 + u * u2 / 30.0};
  }
  const double inv = 1.0 / u;
  const double value = s * inv;
  return {value, (c - value) * inv};
}

// sin(pi * x) and cos(pi * x) after exact reduction of x modulo 2.
void sincos_pi(double x, double& s, double& c) {
  const double reduced = x - 2.0 * std::floor(x / 2.0);
  s = std::sin(kPi * reduced);
  c = std::cos(kPi * reduced);
}

void require_finite(const Vec3& r, const char* what) {
  if (!r.allFinite()) {
    throw Error(std::string(what) + " must be finite");
  }
}

}  // namespace

double sinc(double x) {
  if (std::abs(x) < kTaylor) {
    const double x2 = x * x;
    return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sin(x) / x;
}

double sinc_derivative(double x) {
  if (std::abs(x) < kTaylor) {
    const double x2 = x * x;
    return -x / 3.0 + x * x2 / 30.0;
  }
  return (x * std::cos(x) - std::sin(x)) / (x * x);
}

// ---------------------------------------------------------------------------

SparseMeasure::SparseMeasure(std::vector<Spike> spikes) : spikes_(std::move(spikes)) {
  for (const auto& s : spikes_) validate(s);
}

void SparseMeasure::add(double amplitude, const Vec3& position) {
  Spike s{amplitude, position};
  validate(s);
  spikes_.push_back(s);
}

double SparseMeasure::total_variation() const {
  double sum = 0.0;
  for (const auto& s : spikes_) sum += s.amplitude;
  return sum;
}

void SparseMeasure::validate(const Spike& s) {
  if (!(s.amplitude >= 0.0) || !std::isfinite(s.amplitude)) {
    throw Error("spike amplitude must be finite and nonnegative");
  }
  require_finite(s.position, "spike position");
}

double FilterSpec::evaluate(double t) const { return sinc(kPi * 2.0 * cutoff_hz * t); }

MicArray::MicArray(std::vector<Vec3> positions, double sample_rate_hz)
    : MicArray(std::move(positions), sample_rate_hz, FilterSpec{FilterKind::IdealLowpass, sample_rate_hz / 2.0}) {}

MicArray::MicArray(std::vector<Vec3> positions, double sample_rate_hz, FilterSpec filter)
    : positions_(std::move(positions)), sample_rate_hz_(sample_rate_hz), filter_(filter) {
  if (positions_.empty()) throw Error("microphone array must contain at least one microphone");
  if (!(sample_rate_hz_ > 0.0) || !std::isfinite(sample_rate_hz_)) throw Error("sample rate must be positive");
  if (!(filter_.cutoff_hz > 0.0) || !std::isfinite(filter_.cutoff_hz)) throw Error("filter cutoff must be positive");
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    require_finite(positions_[i], "microphone position");
    for (std::size_t j = 0; j < i; ++j) {
      if (positions_[i] == positions_[j]) throw Error("microphone positions must be distinct");
    }
  }
}

Vec3 MicArray::center() const {
  Vec3 c = Vec3::Zero();
  for (const auto& p : positions_) c += p;
  return c / static_cast<double>(positions_.size());
}

double MicArray::radius() const {
  const Vec3 c = center();
  double r = 0.0;
  for (const auto& p : positions_) r = std::max(r, (p - c).norm());
  return r;
}

Observation::Observation(RowMatrix samples, double sample_rate_hz)
    : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz) {
  if (!(sample_rate_hz_ > 0.0)) throw Error("sample rate must be positive");
}

Observation Observation::zeros(std::size_t num_mics, std::size_t num_samples, double sample_rate_hz) {
  return {RowMatrix::Zero(static_cast<Eigen::Index>(num_mics), static_cast<Eigen::Index>(num_samples)),
          sample_rate_hz};
}

double Observation::duration() const {
  return num_samples() == 0 ? 0.0 : static_cast<double>(num_samples() - 1) / sample_rate_hz_;
}

Observation Observation::truncated(std::size_t length) const {
  if (length > num_samples()) throw Error("truncation length exceeds observation length");
  return {samples_.leftCols(static_cast<Eigen::Index>(length)), sample_rate_hz_};
}

void PhysicalConstants::validate() const {
  if (!(speed_of_sound_mps >= 300.0 && speed_of_sound_mps <= 400.0)) {
    throw Error("speed of sound must lie in [300, 400] m/s");
  }
}

// ---------------------------------------------------------------------------

ForwardOperator::ForwardOperator(const MicArray& array, std::size_t num_samples, PhysicalConstants constants)
    : mics_(array.positions()),
      num_samples_(num_samples),
      sample_rate_(array.sample_rate_hz()),
      bandwidth_(2.0 * array.filter().cutoff_hz),
      constants_(constants),
      ratio_(bandwidth_ / sample_rate_),
      sin_table_(num_samples),
      cos_table_(num_samples) {
  constants_.validate();
  if (num_samples_ == 0) throw Error("number of samples must be at least 1");
  for (std::size_t n = 0; n < num_samples_; ++n) {
    sincos_pi(ratio_ * static_cast<double>(n), sin_table_[n], cos_table_[n]);
  }
}

double ForwardOperator::arrival_phase(double distance) const {
  return bandwidth_ * distance / constants_.speed_of_sound_mps;
}

bool ForwardOperator::admissible(const Vec3& r) const {
  if (!r.allFinite()) return false;
  for (const auto& mic : mics_) {
    if ((r - mic).norm() < kMinMicDistance) return false;
  }
  return true;
}

void ForwardOperator::check_position(const Vec3& r) const {
  require_finite(r, "source position");
  for (std::size_t m = 0; m < mics_.size(); ++m) {
    const double d = (r - mics_[m]).norm();
    if (d < kMinMicDistance) {
      std::ostringstream msg;
      msg << "source at distance " << d << " m from microphone " << m << " (minimum " << kMinMicDistance << " m)";
      throw DistanceBelowEpsilon(msg.str());
    }
  }
}

double ForwardOperator::gamma(std::size_t mic, std::size_t sample, const Vec3& r) const {
  if (mic >= mics_.size()) throw Error("microphone index out of range");
  check_position(r);
  const double d = (r - mics_[mic]).norm();
  const double u = kPi * (ratio_ * static_cast<double>(sample) - arrival_phase(d));
  return sinc(u) / (4.0 * kPi * d);
}

void ForwardOperator::atom(const Vec3& r, std::span<double> out) const {
  check_position(r);
  const std::size_t n_samples = num_samples_;
  for (std::size_t m = 0; m < mics_.size(); ++m) {
    const double d = (r - mics_[m]).norm();
    const double tau = arrival_phase(d);
    double sb = 0.0;
    double cb = 0.0;
    sincos_pi(tau, sb, cb);
    const double scale = 1.0 / (4.0 * kPi * d);
    double* row = out.data() + m * n_samples;
    for (std::size_t n = 0; n < n_samples; ++n) {
      const double u = kPi * (ratio_ * static_cast<double>(n) - tau);
      double value;
      if (std::abs(u) < kDirect) {
        value = sinc(u);
      } else {
        value = (sin_table_[n] * cb - cos_table_[n] * sb) / u;
      }
      row[n] = value * scale;
    }
  }
}

void ForwardOperator::atom_with_gradient(const Vec3& r, std::span<double> out, std::span<double> dx,
                                         std::span<double> dy, std::span<double> dz) const {
  check_position(r);
  const std::size_t n_samples = num_samples_;
  const double du_dd = -kPi * bandwidth_ / constants_.speed_of_sound_mps;
  for (std::size_t m = 0; m < mics_.size(); ++m) {
    const Vec3 diff = r - mics_[m];
    const double d = diff.norm();
    const Vec3 unit = diff / d;
    const double tau = arrival_phase(d);
    double sb = 0.0;
    double cb = 0.0;
    sincos_pi(tau, sb, cb);
    const double scale = 1.0 / (4.0 * kPi * d);
    const std::size_t base = m * n_samples;
    for (std::size_t n = 0; n < n_samples; ++n) {
      const double u = kPi * (ratio_ * static_cast<double>(n) - tau);
      double s;
      double c;
      if (std::abs(u) < kDirect) {
        s = std::sin(u);
        c = std::cos(u);
      } else {
        s = sin_table_[n] * cb - cos_table_[n] * sb;
        c = cos_table_[n] * cb + sin_table_[n] * sb;
      }
      const SincPair k = sinc_from_parts(s, c, u);
      const double g = k.value * scale;
      const double dg_dd = (k.derivative * du_dd - k.value / d) * scale;
      out[base + n] = g;
      dx[base + n] = dg_dd * unit.x();
      dy[base + n] = dg_dd * unit.y();
      dz[base + n] = dg_dd * unit.z();
    }
  }
}

double ForwardOperator::eta(std::span<const double> residual, const Vec3& r) const {
  check_position(r);
  const std::size_t n_samples = num_samples_;
  double total = 0.0;
  for (std::size_t m = 0; m < mics_.size(); ++m) {
    const double d = (r - mics_[m]).norm();
    const double tau = arrival_phase(d);
    double sb = 0.0;
    double cb = 0.0;
    sincos_pi(tau, sb, cb);
    const double* y = residual.data() + m * n_samples;
    double acc = 0.0;
    for (std::size_t n = 0; n < n_samples; ++n) {
      const double u = kPi * (ratio_ * static_cast<double>(n) - tau);
      const double value = std::abs(u) < kDirect ? sinc(u) : (sin_table_[n] * cb - cos_table_[n] * sb) / u;
      acc += y[n] * value;
    }
    total += acc / (4.0 * kPi * d);
  }
  return total;
}

double ForwardOperator::eta(std::span<const double> residual, const Vec3& r, Vec3& gradient) const {
  check_position(r);
  const std::size_t n_samples = num_samples_;
  const double du_dd = -kPi * bandwidth_ / constants_.speed_of_sound_mps;
  double total = 0.0;
  gradient.setZero();
  for (std::size_t m = 0; m < mics_.size(); ++m) {
    const Vec3 diff = r - mics_[m];
    const double d = diff.norm();
    const double tau = arrival_phase(d);
    double sb = 0.0;
    double cb = 0.0;
    sincos_pi(tau, sb, cb);
    const double* y = residual.data() + m * n_samples;
    double s0 = 0.0;
    double s1 = 0.0;
    for (std::size_t n = 0; n < n_samples; ++n) {
      const double u = kPi * (ratio_ * static_cast<double>(n) - tau);
      double s;
      double c;
      if (std::abs(u) < kDirect) {
        s = std::sin(u);
        c = std::cos(u);
      } else {
        s = sin_table_[n] * cb - cos_table_[n] * sb;
        c = cos_table_[n] * cb + sin_table_[n] * sb;
      }
      const SincPair k = sinc_from_parts(s, c, u);
      s0 += y[n] * k.value;
      s1 += y[n] * k.derivative;
    }
    const double scale = 1.0 / (4.0 * kPi * d);
    total += s0 * scale;
    const double de_dd = (s1 * du_dd - s0 / d) * scale;
    gradient += de_dd * (diff / d);
  }
  return total;
}

Eigen::VectorXd ForwardOperator::apply(const SparseMeasure& measure) const {
  Eigen::VectorXd result = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(atom_size()));
  Eigen::VectorXd column(static_cast<Eigen::Index>(atom_size()));
  for (const auto& spike : measure.spikes()) {
    atom(spike.position, {column.data(), atom_size()});
    result += spike.amplitude * column;
  }
  return result;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd flatten(const Observation& obs, std::size_t length) {
  if (length > obs.num_samples()) throw Error("flatten length exceeds observation length");
  const auto rows = static_cast<Eigen::Index>(obs.num_mics());
  const auto cols = static_cast<Eigen::Index>(length);
  Eigen::VectorXd flat(rows * cols);
  for (Eigen::Index m = 0; m < rows; ++m) {
    flat.segment(m * cols, cols) = obs.samples().row(m).head(cols).transpose();
  }
  return flat;
}

Observation unflatten(std::span<const double> flat, std::size_t num_mics, double sample_rate_hz) {
  if (num_mics == 0 || flat.size() % num_mics != 0) throw Error("flat observation size is not a multiple of M");
  const auto rows = static_cast<Eigen::Index>(num_mics);
  const auto cols = static_cast<Eigen::Index>(flat.size() / num_mics);
  RowMatrix samples = Eigen::Map<const RowMatrix>(flat.data(), rows, cols);
  return {std::move(samples), sample_rate_hz};
}

double gamma_eval(const MicArray& array, std::size_t mic_index, std::size_t sample_index, const Vec3& position,
                  const PhysicalConstants& constants) {
  const ForwardOperator op(array, 1, constants);
  return op.gamma(mic_index, sample_index, position);
}

Observation forward_apply(const SparseMeasure& measure, const MicArray& array, std::size_t num_samples,
                          const PhysicalConstants& constants) {
  const ForwardOperator op(array, num_samples, constants);
  const Eigen::VectorXd flat = op.apply(measure);
  return unflatten({flat.data(), static_cast<std::size_t>(flat.size())}, array.size(), array.sample_rate_hz());
}

double eta_eval(const Observation& residual, const MicArray& array, const Vec3& position,
                const PhysicalConstants& constants) {
  if (residual.num_mics() != array.size()) throw Error("residual channel count does not match the array");
  const ForwardOperator op(array, residual.num_samples(), constants);
  const Eigen::VectorXd flat = flatten(residual, residual.num_samples());
  return op.eta({flat.data(), static_cast<std::size_t>(flat.size())}, position);
}

Vec3 eta_gradient(const Observation& residual, const MicArray& array, const Vec3& position,
                  const PhysicalConstants& constants) {
  if (residual.num_mics() != array.size()) throw Error("residual channel count does not match the array");
  const ForwardOperator op(array, residual.num_samples(), constants);
  const Eigen::VectorXd flat = flatten(residual, residual.num_samples());
  Vec3 gradient;
  (void)op.eta({flat.data(), static_cast<std::size_t>(flat.size())}, position, gradient);
  return gradient;
}

}  // namespace echograd

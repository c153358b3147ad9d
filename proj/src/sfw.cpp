#include "echograd/sfw.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace echograd {

namespace {

constexpr double kPi = std::numbers::pi;

using Clock = std::chrono::steady_clock;

void sincos_pi(double x, double& s, double& c) {
  const double reduced = x - 2.0 * std::floor(x / 2.0);
  s = std::sin(kPi * reduced);
  c = std::cos(kPi * reduced);
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::span<const double> as_span(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

// Windowed sinc interpolation of each residual channel on a fine lattice,
// used to score grid points in O(M) each.
class CertificateTable {
 public:
  CertificateTable(const ForwardOperator& op, const MicArray& array, std::span<const double> residual, int upsampling,
                   int halfwidth)
      : mics_(op.mics()),
        upsampling_(upsampling),
        samples_(op.num_samples()),
        phase_per_metre_(2.0 * array.filter().cutoff_hz / op.constants().speed_of_sound_mps),
        ratio_(2.0 * array.filter().cutoff_hz / array.sample_rate_hz()) {
    // Lattice in units of kernel phase; sample n sits at phase ratio * n.
    const double last_phase = ratio_ * static_cast<double>(samples_ - 1) + halfwidth;
    entries_ = static_cast<std::size_t>(std::ceil(last_phase * upsampling)) + 2;
    table_.assign(mics_.size() * entries_, 0.0);
    // sin(pi (rho n - tau)) through the angle-difference identity.
    std::vector<double> sin_n(samples_);
    std::vector<double> cos_n(samples_);
    for (std::size_t n = 0; n < samples_; ++n) sincos_pi(ratio_ * static_cast<double>(n), sin_n[n], cos_n[n]);
    std::vector<double> sin_j(entries_);
    std::vector<double> cos_j(entries_);
    for (std::size_t j = 0; j < entries_; ++j) sincos_pi(static_cast<double>(j) / upsampling, sin_j[j], cos_j[j]);
    for (std::size_t m = 0; m < mics_.size(); ++m) {
      const double* y = residual.data() + m * samples_;
      double* row = table_.data() + m * entries_;
      for (std::size_t j = 0; j < entries_; ++j) {
        const double tau = static_cast<double>(j) / upsampling;
        const double centre = tau / ratio_;
        const auto lo = static_cast<std::ptrdiff_t>(std::ceil(centre - halfwidth / ratio_));
        const auto hi = static_cast<std::ptrdiff_t>(std::floor(centre + halfwidth / ratio_));
        const std::size_t first = static_cast<std::size_t>(std::max<std::ptrdiff_t>(lo, 0));
        const std::size_t last =
            static_cast<std::size_t>(std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(samples_) - 1));
        double acc = 0.0;
        for (std::size_t n = first; n <= last && first <= last; ++n) {
          const double u = kPi * (ratio_ * static_cast<double>(n) - tau);
          const double k = std::abs(u) < 0.5 ? sinc(u) : (sin_n[n] * cos_j[j] - cos_n[n] * sin_j[j]) / u;
          acc += y[n] * k;
        }
        row[j] = acc;
      }
    }
  }

  [[nodiscard]] double eta(const Vec3& r) const {
    double total = 0.0;
    for (std::size_t m = 0; m < mics_.size(); ++m) {
      const double d = (r - mics_[m]).norm();
      const double pos = phase_per_metre_ * d * upsampling_;
      const auto j = static_cast<std::size_t>(pos);
      if (j + 1 >= entries_) continue;
      const double frac = pos - static_cast<double>(j);
      const double* row = table_.data() + m * entries_;
      total += ((1.0 - frac) * row[j] + frac * row[j + 1]) / (4.0 * kPi * d);
    }
    return total;
  }

 private:
  const std::vector<Vec3>& mics_;
  int upsampling_;
  std::size_t samples_;
  double phase_per_metre_;
  double ratio_;
  std::size_t entries_ = 0;
  std::vector<double> table_;
};

CandidateGrid build_grid(const RowMatrix& residual, const ForwardOperator& op, const SolverConfig& config) {
  const std::size_t num_mics = static_cast<std::size_t>(residual.rows());
  const std::size_t length = static_cast<std::size_t>(residual.cols());
  const int window = config.moving_average_len;
  const int before = (window - 1) / 2;
  const int after = window / 2;

  CandidateGrid grid;
  grid.peak_samples.resize(num_mics);
  std::vector<double> peak_values(num_mics, 0.0);
  for (std::size_t m = 0; m < num_mics; ++m) {
    double best = -1.0;
    std::size_t best_n = 0;
    for (std::size_t n = 0; n < length; ++n) {
      double acc = 0.0;
      const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(n) - before);
      const auto hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(length) - 1,
                                               static_cast<std::ptrdiff_t>(n) + after);
      for (auto k = lo; k <= hi; ++k) acc += residual(static_cast<Eigen::Index>(m), k) * residual(static_cast<Eigen::Index>(m), k);
      acc /= window;
      if (acc > best) {
        best = acc;
        best_n = n;
      }
    }
    grid.peak_samples[m] = best_n;
    peak_values[m] = best;
  }

  std::vector<std::size_t> order(num_mics);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return peak_values[a] > peak_values[b]; });
  const std::size_t selected = std::min<std::size_t>(num_mics, static_cast<std::size_t>(config.num_peak_mics));

  const std::size_t per_sphere = sphere_point_count(config.grid_angular_spacing_deg);
  const double c = op.constants().speed_of_sound_mps;
  for (std::size_t i = 0; i < selected; ++i) {
    const std::size_t m = order[i];
    const double base = c * static_cast<double>(grid.peak_samples[m]) / op.sample_rate_hz();
    for (double offset : config.grid_radial_offsets_m) {
      const double radius = base + offset;
      if (radius < 0.0) continue;
      grid.spheres.push_back({m, op.mics()[m], radius});
      for (const auto& p : fibonacci_sphere(per_sphere, op.mics()[m], radius)) {
        if (op.admissible(p)) grid.points.push_back(p);
      }
    }
  }
  if (grid.points.empty()) throw EmptyGrid("no admissible candidate point");
  return grid;
}

SpikeSearchResult find_spike(const ForwardOperator& op, const MicArray& array, const RowMatrix& residual_matrix,
                             std::span<const double> residual, const SolverConfig& config) {
  CandidateGrid grid = build_grid(residual_matrix, op, config);

  const CertificateTable table(op, array, residual, config.grid_upsampling, config.grid_kernel_halfwidth);
  std::vector<double> scores(grid.points.size());
  for (std::size_t i = 0; i < grid.points.size(); ++i) scores[i] = table.eta(grid.points[i]);

  // Exact rescoring of the best tabulated candidates; ties go to the lowest index.
  const std::size_t keep = std::min<std::size_t>(grid.points.size(), static_cast<std::size_t>(config.grid_rescore));
  std::vector<std::size_t> order(grid.points.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
  std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
  std::size_t best = order[0];
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < keep; ++i) {
    const double v = op.eta(residual, grid.points[order[i]]);
    if (v > best_value) {
      best_value = v;
      best = order[i];
    }
  }

  const Vec3 start = grid.points[best];
  const auto objective = [&](const Vec3& r, Vec3& g) {
    if (!op.admissible(r)) return -std::numeric_limits<double>::infinity();
    return op.eta(residual, r, g);
  };
  const AscentResult ascent = qn_maximize(objective, start, config.spike_search);
  return {ascent.point, start, ascent.value, grid.points.size(), ascent.iterations, ascent.status};
}

// Amplitude-step state for one cut length: atoms, their Gram matrix and
// correlations with the target.
class AtomSet {
 public:
  AtomSet(const ForwardOperator& op, const Eigen::VectorXd& target) : op_(op), target_(target) {}

  [[nodiscard]] std::size_t size() const { return positions_.size(); }
  [[nodiscard]] const std::vector<Vec3>& positions() const { return positions_; }
  [[nodiscard]] const Eigen::VectorXd& amplitudes() const { return amplitudes_; }

  void add(const Vec3& r, double amplitude) {
    Eigen::VectorXd column(static_cast<Eigen::Index>(op_.atom_size()));
    op_.atom(r, {column.data(), op_.atom_size()});
    const auto q = static_cast<Eigen::Index>(size());
    gram_.conservativeResize(q + 1, q + 1);
    for (Eigen::Index i = 0; i < q; ++i) {
      const double g = columns_[static_cast<std::size_t>(i)].dot(column);
      gram_(i, q) = g;
      gram_(q, i) = g;
    }
    gram_(q, q) = column.squaredNorm();
    correlation_.conservativeResize(q + 1);
    correlation_[q] = column.dot(target_);
    amplitudes_.conservativeResize(q + 1);
    amplitudes_[q] = amplitude;
    columns_.push_back(std::move(column));
    positions_.push_back(r);
  }

  int fit(double lambda, const LassoConfig& config) {
    const LassoResult r = nn_lasso_gram(gram_, correlation_, target_.squaredNorm(), lambda, amplitudes_, config);
    amplitudes_ = r.amplitudes;
    return r.sweeps;
  }

  /// Removes spikes with amplitude below `threshold`; returns how many.
  std::size_t prune(double threshold) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < amplitudes_.size(); ++i) {
      if (amplitudes_[i] >= threshold) keep.push_back(i);
    }
    const std::size_t removed = size() - keep.size();
    if (removed == 0) return 0;
    const auto k = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd gram(k, k);
    Eigen::VectorXd corr(k);
    Eigen::VectorXd amps(k);
    std::vector<Eigen::VectorXd> columns;
    std::vector<Vec3> positions;
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) gram(i, j) = gram_(keep[static_cast<std::size_t>(i)], keep[static_cast<std::size_t>(j)]);
      corr[i] = correlation_[keep[static_cast<std::size_t>(i)]];
      amps[i] = amplitudes_[keep[static_cast<std::size_t>(i)]];
      columns.push_back(std::move(columns_[static_cast<std::size_t>(keep[static_cast<std::size_t>(i)])]));
      positions.push_back(positions_[static_cast<std::size_t>(keep[static_cast<std::size_t>(i)])]);
    }
    gram_ = std::move(gram);
    correlation_ = std::move(corr);
    amplitudes_ = std::move(amps);
    columns_ = std::move(columns);
    positions_ = std::move(positions);
    return removed;
  }

  [[nodiscard]] Eigen::VectorXd residual() const {
    Eigen::VectorXd r = target_;
    for (std::size_t k = 0; k < columns_.size(); ++k) {
      const double a = amplitudes_[static_cast<Eigen::Index>(k)];
      if (a != 0.0) r.noalias() -= a * columns_[k];
    }
    return r;
  }

  [[nodiscard]] double objective(double lambda) const {
    return 0.5 * residual().squaredNorm() + lambda * amplitudes_.sum();
  }

  [[nodiscard]] SparseMeasure measure() const {
    SparseMeasure out;
    for (std::size_t k = 0; k < positions_.size(); ++k) out.add(amplitudes_[static_cast<Eigen::Index>(k)], positions_[k]);
    return out;
  }

 private:
  const ForwardOperator& op_;
  const Eigen::VectorXd& target_;
  std::vector<Eigen::VectorXd> columns_;
  std::vector<Vec3> positions_;
  Eigen::MatrixXd gram_;
  Eigen::VectorXd correlation_;
  Eigen::VectorXd amplitudes_;
};

SparseMeasure prune_measure(const SparseMeasure& measure, double threshold) {
  SparseMeasure out;
  for (const auto& s : measure.spikes()) {
    if (s.amplitude >= threshold) out.add(s.amplitude, s.position);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

QuasiNewtonConfig SolverConfig::default_spike_search() {
  QuasiNewtonConfig c;
  c.gradient_tolerance = 1e-9;
  c.max_iterations = 1000;
  c.max_step_length = 0.5;
  return c;
}

QuasiNewtonConfig SolverConfig::default_sliding_search() {
  QuasiNewtonConfig c;
  c.gradient_tolerance = 1e-9;
  c.max_iterations = 1000;
  c.memory = 10;
  return c;
}

void SolverConfig::validate() const {
  if (!(lambda > 0.0)) throw Error("lambda must be positive");
  if (!(alpha_min > 0.0 && alpha_min < prune_threshold)) {
    throw Error("thresholds must satisfy 0 < alpha_min < prune_threshold");
  }
  if (!(grid_angular_spacing_deg > 0.0 && grid_angular_spacing_deg < 90.0)) {
    throw Error("grid angular spacing must lie in (0, 90) degrees");
  }
  if (grid_radial_offsets_m.empty()) throw Error("at least one radial offset is required");
  if (num_peak_mics < 1) throw Error("num_peak_mics must be at least 1");
  if (moving_average_len < 1) throw Error("moving_average_len must be at least 1");
  if (schedule.empty() || schedule.back() != 1.0) throw Error("schedule must end at 1");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (!(schedule[i] > 0.0) || (i > 0 && !(schedule[i] > schedule[i - 1]))) {
      throw Error("schedule fractions must be positive and increasing");
    }
  }
  if (max_spikes < 1) throw Error("max_spikes must be at least 1");
  if (max_iterations_per_stage < 1) throw Error("max_iterations_per_stage must be at least 1");
  if (grid_upsampling < 1 || grid_kernel_halfwidth < 1 || grid_rescore < 1) {
    throw Error("grid table parameters must be positive");
  }
  spike_search.validate();
  sliding_search.validate();
}

std::vector<std::size_t> schedule_lengths(const SolverConfig& config, std::size_t num_samples) {
  std::vector<std::size_t> lengths;
  for (double f : config.schedule) {
    const auto len = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(f * static_cast<double>(num_samples) - 1e-9)), 1, num_samples);
    if (lengths.empty() || len > lengths.back()) lengths.push_back(len);
  }
  if (lengths.empty() || lengths.back() != num_samples) lengths.push_back(num_samples);
  return lengths;
}

std::size_t sphere_point_count(double angular_spacing_deg) {
  const double spacing = angular_spacing_deg * kPi / 180.0;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(4.0 * kPi / (spacing * spacing))));
}

std::vector<Vec3> fibonacci_sphere(std::size_t count, const Vec3& center, double radius) {
  const double golden_angle = kPi * (3.0 - std::sqrt(5.0));
  std::vector<Vec3> points;
  points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(count);
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden_angle * static_cast<double>(i);
    points.emplace_back(center + radius * Vec3(rho * std::cos(phi), rho * std::sin(phi), z));
  }
  return points;
}

CandidateGrid init_candidate_grid(const Observation& residual, const MicArray& array, const SolverConfig& config,
                                  const PhysicalConstants& constants) {
  config.validate();
  if (residual.num_mics() != array.size()) throw Error("residual channel count does not match the array");
  if (residual.samples().isZero(0.0)) throw Error("residual must be nonzero");
  const ForwardOperator op(array, residual.num_samples(), constants);
  return build_grid(residual.samples(), op, config);
}

Vec3 spike_finding_step(const Observation& residual, const MicArray& array, const SolverConfig& config,
                        const PhysicalConstants& constants) {
  config.validate();
  if (residual.num_mics() != array.size()) throw Error("residual channel count does not match the array");
  if (residual.samples().isZero(0.0)) throw Error("residual must be nonzero");
  const ForwardOperator op(array, residual.num_samples(), constants);
  const Eigen::VectorXd flat = flatten(residual, residual.num_samples());
  return find_spike(op, array, residual.samples(), as_span(flat), config).position;
}

// ---------------------------------------------------------------------------

SlidingObjective::SlidingObjective(const ForwardOperator& op, const Eigen::VectorXd& target, double lambda)
    : op_(op), target_(target), lambda_(lambda) {}

Eigen::VectorXd SlidingObjective::pack(const SparseMeasure& measure) {
  Eigen::VectorXd z(4 * static_cast<Eigen::Index>(measure.size()));
  for (std::size_t k = 0; k < measure.size(); ++k) {
    const auto i = 4 * static_cast<Eigen::Index>(k);
    z[i] = measure[k].amplitude;
    z.segment<3>(i + 1) = measure[k].position;
  }
  return z;
}

SparseMeasure SlidingObjective::unpack(const Eigen::VectorXd& z) {
  SparseMeasure out;
  for (Eigen::Index i = 0; i + 3 < z.size(); i += 4) out.add(std::max(0.0, z[i]), Vec3(z.segment<3>(i + 1)));
  return out;
}

double SlidingObjective::operator()(const Eigen::VectorXd& z, Eigen::VectorXd& gradient) const {
  const Eigen::Index q = z.size() / 4;
  for (Eigen::Index k = 0; k < q; ++k) {
    if (!op_.admissible(Vec3(z.segment<3>(4 * k + 1)))) return std::numeric_limits<double>::infinity();
  }
  Eigen::VectorXd residual = target_;
  Eigen::VectorXd column(static_cast<Eigen::Index>(op_.atom_size()));
  double amplitude_sum = 0.0;
  for (Eigen::Index k = 0; k < q; ++k) {
    const double a = z[4 * k];
    amplitude_sum += a;
    if (a == 0.0) continue;
    op_.atom(Vec3(z.segment<3>(4 * k + 1)), {column.data(), op_.atom_size()});
    residual.noalias() -= a * column;
  }
  gradient.resize(z.size());
  for (Eigen::Index k = 0; k < q; ++k) {
    Vec3 g;
    const double eta = op_.eta(as_span(residual), Vec3(z.segment<3>(4 * k + 1)), g);
    gradient[4 * k] = lambda_ - eta;
    gradient.segment<3>(4 * k + 1) = -z[4 * k] * g;
  }
  return 0.5 * residual.squaredNorm() + lambda_ * amplitude_sum;
}

Eigen::VectorXd SlidingObjective::diagonal_scaling(const Eigen::VectorXd& z, double amplitude_floor) const {
  // Gauss-Newton curvature: ||gamma||^2 for an amplitude and, for each
  // coordinate, a^2 ||d gamma / d distance||^2, using the sum over samples
  // of sinc'^2 ~ 1/3 of the sum of sinc^2.
  const Eigen::Index q = z.size() / 4;
  const double wavenumber = kPi * op_.sample_rate_hz() / op_.constants().speed_of_sound_mps;
  Eigen::VectorXd scaling(z.size());
  Eigen::VectorXd column(static_cast<Eigen::Index>(op_.atom_size()));
  for (Eigen::Index k = 0; k < q; ++k) {
    op_.atom(Vec3(z.segment<3>(4 * k + 1)), {column.data(), op_.atom_size()});
    const double norm2 = std::max(column.squaredNorm(), 1e-300);
    const double a = std::max(z[4 * k], amplitude_floor);
    scaling[4 * k] = 1.0 / norm2;
    scaling.segment<3>(4 * k + 1).setConstant(3.0 / (a * a * norm2 * wavenumber * wavenumber));
  }
  return scaling;
}

double blasso_objective(const SparseMeasure& measure, const Observation& obs, double lambda, const MicArray& array,
                        const PhysicalConstants& constants) {
  if (obs.num_mics() != array.size()) throw Error("observation channel count does not match the array");
  const ForwardOperator op(array, obs.num_samples(), constants);
  const Eigen::VectorXd residual = flatten(obs, obs.num_samples()) - op.apply(measure);
  return 0.5 * residual.squaredNorm() + lambda * measure.total_variation();
}

std::vector<std::string> monotonicity_violations(const SolveTrace& trace, double slack) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
    const auto& r = trace.iterations[i];
    if (r.objective_after > r.objective_before + slack) {
      std::ostringstream msg;
      msg << "iteration " << i << " (stage " << r.stage << "): amplitude step raised the objective from "
          << r.objective_before << " to " << r.objective_after;
      out.push_back(msg.str());
    }
  }
  if (trace.sliding.performed && trace.sliding.objective_after > trace.sliding.objective_before + slack) {
    std::ostringstream msg;
    msg << "sliding raised the objective from " << trace.sliding.objective_before << " to "
        << trace.sliding.objective_after;
    out.push_back(msg.str());
  }
  return out;
}

SolveResult sfw_solve(const Observation& obs, const MicArray& array, const SolverConfig& config,
                      const PhysicalConstants& constants) {
  config.validate();
  if (obs.num_mics() != array.size()) throw Error("observation channel count does not match the array");
  if (obs.num_samples() == 0) throw Error("observation is empty");
  if (obs.samples().isZero(0.0)) throw NoSpikesFound("observation is identically zero");

  const auto solve_start = Clock::now();
  SolveResult result;
  SolveTrace& trace = result.trace;
  trace.schedule = schedule_lengths(config, obs.num_samples());

  SparseMeasure carried;
  bool found_any = false;
  for (std::size_t stage = 0; stage < trace.schedule.size(); ++stage) {
    const std::size_t length = trace.schedule[stage];
    const ForwardOperator op(array, length, constants);
    const Eigen::VectorXd target = flatten(obs, length);
    AtomSet atoms(op, target);

    if (!carried.empty()) {
      const auto t0 = Clock::now();
      IterationRecord rec;
      rec.stage = stage;
      rec.cut_length = length;
      rec.added = false;
      for (const auto& s : carried.spikes()) atoms.add(s.position, s.amplitude);
      rec.objective_before = atoms.objective(config.lambda);
      rec.lasso_sweeps = atoms.fit(config.lambda, config.lasso);
      rec.objective_after = atoms.objective(config.lambda);
      rec.pruned = atoms.prune(config.alpha_min);
      rec.objective_after_prune = atoms.objective(config.lambda);
      rec.num_spikes = atoms.size();
      rec.residual_norm = atoms.residual().norm();
      rec.seconds = seconds_since(t0);
      trace.iterations.push_back(rec);
    }

    for (int iter = 0; iter < config.max_iterations_per_stage; ++iter) {
      if (atoms.size() >= static_cast<std::size_t>(config.max_spikes)) break;
      const auto t0 = Clock::now();
      const Eigen::VectorXd residual = atoms.residual();
      if (residual.isZero(0.0)) break;
      const RowMatrix residual_matrix =
          Eigen::Map<const RowMatrix>(residual.data(), static_cast<Eigen::Index>(array.size()),
                                      static_cast<Eigen::Index>(length));

      IterationRecord rec;
      rec.stage = stage;
      rec.cut_length = length;
      rec.objective_before = 0.5 * residual.squaredNorm() + config.lambda * atoms.amplitudes().sum();

      const SpikeSearchResult spike = find_spike(op, array, residual_matrix, as_span(residual), config);
      rec.position = spike.position;
      rec.grid_start = spike.grid_start;
      rec.grid_size = spike.grid_size;
      rec.ascent_iterations = spike.iterations;
      rec.ascent_status = to_string(spike.status);

      atoms.add(spike.position, 0.0);
      rec.lasso_sweeps = atoms.fit(config.lambda, config.lasso);
      rec.amplitude = atoms.amplitudes()[static_cast<Eigen::Index>(atoms.size() - 1)];
      rec.objective_after = atoms.objective(config.lambda);
      rec.pruned = atoms.prune(config.alpha_min);
      rec.objective_after_prune = atoms.objective(config.lambda);
      rec.num_spikes = atoms.size();
      rec.residual_norm = atoms.residual().norm();
      rec.seconds = seconds_since(t0);
      trace.iterations.push_back(rec);

      if (rec.amplitude < config.alpha_min) break;
      found_any = true;
    }
    carried = atoms.measure();
  }

  if (!found_any && carried.empty()) {
    throw NoSpikesFound("no spike reached the minimum amplitude " + std::to_string(config.alpha_min));
  }

  SparseMeasure measure = prune_measure(carried, config.prune_threshold);
  if (config.sliding && !measure.empty()) {
    const auto t0 = Clock::now();
    const ForwardOperator op(array, obs.num_samples(), constants);
    const Eigen::VectorXd target = flatten(obs, obs.num_samples());
    const SlidingObjective objective(op, target, config.lambda);
    const Eigen::VectorXd start = SlidingObjective::pack(measure);
    Eigen::VectorXd lower = Eigen::VectorXd::Constant(start.size(), -std::numeric_limits<double>::infinity());
    for (Eigen::Index i = 0; i < lower.size(); i += 4) lower[i] = 0.0;
    const ObjectiveFn fn = [&](const Eigen::VectorXd& z, Eigen::VectorXd& g) { return objective(z, g); };

    SlidingRecord& rec = trace.sliding;
    rec.performed = true;
    rec.spikes_before = measure.size();
    Eigen::VectorXd g0;
    rec.objective_before = objective(start, g0);
    const QnResult r = qn_minimize_bounded(fn, start, lower, config.sliding_search,
                                           objective.diagonal_scaling(start, config.prune_threshold));
    rec.objective_after = r.value;
    rec.iterations = r.iterations;
    rec.evaluations = r.evaluations;
    rec.status = to_string(r.status);
    measure = prune_measure(SlidingObjective::unpack(r.point), config.prune_threshold);
    rec.spikes_after = measure.size();
    rec.seconds = seconds_since(t0);
  }
  result.measure = std::move(measure);
  trace.seconds = seconds_since(solve_start);
  return result;
}

}  // namespace echograd

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "echograd/core_model.hpp"
#include "echograd/optim.hpp"

namespace echograd {

class EmptyGrid : public Error {
 public:
  using Error::Error;
};

class NoSpikesFound : public Error {
 public:
  using Error::Error;
};

struct SolverConfig {
  double lambda = 3e-5;
  /// Frank-Wolfe stops once the newest spike's fitted amplitude falls below this.
  double alpha_min = 0.01;
  /// Spikes below this amplitude are deleted before and after sliding.
  double prune_threshold = 0.1;
  double grid_angular_spacing_deg = 5.0;
  std::vector<double> grid_radial_offsets_m{-0.05, 0.0, 0.05};
  int num_peak_mics = 8;
  int moving_average_len = 3;
  /// Cut lengths as fractions of N; each stage uses ceil(fraction * N) samples.
  /// Must be increasing and end at 1.
  std::vector<double> schedule{0.25, 0.5, 1.0};
  int max_spikes = 700;
  /// Safety cap on Frank-Wolfe iterations per stage.
  int max_iterations_per_stage = 2000;
  bool sliding = true;

  /// Grid scoring uses a tabulated, windowed version of the certificate:
  /// the residual is interpolated on a 1/grid_upsampling sample lattice with
  /// a sinc kernel truncated to +-grid_kernel_halfwidth samples. The
  /// grid_rescore best candidates are then scored exactly.
  int grid_upsampling = 8;
  int grid_kernel_halfwidth = 24;
  int grid_rescore = 16;

  QuasiNewtonConfig spike_search = default_spike_search();
  QuasiNewtonConfig sliding_search = default_sliding_search();
  LassoConfig lasso;

  void validate() const;

  static QuasiNewtonConfig default_spike_search();
  static QuasiNewtonConfig default_sliding_search();
};

/// Cut lengths used for a signal of `num_samples` samples.
std::vector<std::size_t> schedule_lengths(const SolverConfig& config, std::size_t num_samples);

struct Sphere {
  std::size_t mic = 0;
  Vec3 center;
  double radius = 0.0;
};

struct CandidateGrid {
  std::vector<Vec3> points;
  std::vector<Sphere> spheres;
  /// Smoothed-energy peak sample per microphone.
  std::vector<std::size_t> peak_samples;
};

/// Points on n near-uniform spheres (golden-angle spiral).
std::vector<Vec3> fibonacci_sphere(std::size_t count, const Vec3& center, double radius);

/// Number of spiral points giving the requested mean angular spacing.
std::size_t sphere_point_count(double angular_spacing_deg);

CandidateGrid init_candidate_grid(const Observation& residual, const MicArray& array, const SolverConfig& config,
                                  const PhysicalConstants& constants = {});

struct SpikeSearchResult {
  Vec3 position;
  Vec3 grid_start;
  double eta = 0.0;
  std::size_t grid_size = 0;
  int iterations = 0;
  QnStatus status = QnStatus::MaxIterations;
};

Vec3 spike_finding_step(const Observation& residual, const MicArray& array, const SolverConfig& config,
                        const PhysicalConstants& constants = {});

/// One Frank-Wolfe iteration, as recorded in the trace.
struct IterationRecord {
  std::size_t stage = 0;
  std::size_t cut_length = 0;
  /// False for the re-fit performed when a stage starts from carried spikes.
  bool added = true;
  Vec3 position = Vec3::Zero();
  Vec3 grid_start = Vec3::Zero();
  double amplitude = 0.0;
  /// BLASSO objective entering the amplitude step (new spike at zero).
  double objective_before = 0.0;
  /// BLASSO objective right after the amplitude step.
  double objective_after = 0.0;
  /// After removing spikes below alpha_min.
  double objective_after_prune = 0.0;
  double residual_norm = 0.0;
  std::size_t grid_size = 0;
  std::size_t num_spikes = 0;
  std::size_t pruned = 0;
  int lasso_sweeps = 0;
  int ascent_iterations = 0;
  std::string ascent_status;
  double seconds = 0.0;
};

struct SlidingRecord {
  bool performed = false;
  std::size_t spikes_before = 0;
  std::size_t spikes_after = 0;
  double objective_before = 0.0;
  double objective_after = 0.0;
  int iterations = 0;
  int evaluations = 0;
  std::string status;
  double seconds = 0.0;
};

struct SolveTrace {
  std::vector<IterationRecord> iterations;
  SlidingRecord sliding;
  std::vector<std::size_t> schedule;
  double seconds = 0.0;
};

/// Checks that no amplitude step and no sliding step increased the objective
/// by more than `slack`. Returns a description of each violation.
std::vector<std::string> monotonicity_violations(const SolveTrace& trace, double slack);

struct SolveResult {
  SparseMeasure measure;
  SolveTrace trace;
};

SolveResult sfw_solve(const Observation& obs, const MicArray& array, const SolverConfig& config = {},
                      const PhysicalConstants& constants = {});

/// 1/2 ||x - Gamma psi||^2 + lambda * sum(a).
double blasso_objective(const SparseMeasure& measure, const Observation& obs, double lambda, const MicArray& array,
                        const PhysicalConstants& constants = {});

/// Smooth part plus lambda * sum(a) over interleaved (a, x, y, z) variables,
/// with its analytic gradient. Returns +inf when a spike is too close to a
/// microphone.
class SlidingObjective {
 public:
  SlidingObjective(const ForwardOperator& op, const Eigen::VectorXd& target, double lambda);

  double operator()(const Eigen::VectorXd& z, Eigen::VectorXd& gradient) const;

  static Eigen::VectorXd pack(const SparseMeasure& measure);
  static SparseMeasure unpack(const Eigen::VectorXd& z);
  /// Diagonal inverse-curvature estimate used to precondition the descent.
  Eigen::VectorXd diagonal_scaling(const Eigen::VectorXd& z, double amplitude_floor) const;

 private:
  const ForwardOperator& op_;
  const Eigen::VectorXd& target_;
  double lambda_;
};

}  // namespace echograd

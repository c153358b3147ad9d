#pragma once

#include <functional>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "echograd/core_model.hpp"

namespace echograd {

class ZeroAtom : public Error {
 public:
  using Error::Error;
};

struct QuasiNewtonConfig {
  double gradient_tolerance = 1e-9;
  /// Stop when an accepted step decreases the objective by less than this
  /// fraction of its magnitude.
  double function_tolerance = 1e-14;
  int max_iterations = 1000;
  /// Sufficient-decrease constant of the Wolfe conditions.
  double armijo = 1e-4;
  /// Curvature constant of the Wolfe conditions.
  double curvature = 0.9;
  /// Trial steps are capped to this Euclidean length; <= 0 disables the cap.
  double max_step_length = 0.0;
  int max_line_search_evaluations = 40;
  /// Number of correction pairs kept by the limited-memory solver.
  int memory = 10;

  void validate() const;
};

enum class QnStatus { Converged, FunctionTolerance, MaxIterations, LineSearchFailed };

std::string to_string(QnStatus status);

struct QnResult {
  Eigen::VectorXd point;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  QnStatus status = QnStatus::MaxIterations;
};

/// Returns f(x) and writes grad f(x). May return +inf for points outside the
/// objective's domain; line searches then backtrack.
using ObjectiveFn = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& gradient)>;

/// Dense BFGS descent with a Wolfe line search. The returned value is never
/// above f(start).
QnResult bfgs_minimize(const ObjectiveFn& objective, const Eigen::VectorXd& start, const QuasiNewtonConfig& config);

struct AscentResult {
  Vec3 point;
  double value = 0.0;
  int iterations = 0;
  QnStatus status = QnStatus::MaxIterations;
};

/// Local maximization of a function of a 3D position. The returned value is
/// never below objective(start).
AscentResult qn_maximize(const std::function<double(const Vec3&)>& objective,
                         const std::function<Vec3(const Vec3&)>& gradient, const Vec3& start,
                         const QuasiNewtonConfig& config);

/// Same, with a fused value-and-gradient callback.
AscentResult qn_maximize(const std::function<double(const Vec3&, Vec3&)>& objective, const Vec3& start,
                         const QuasiNewtonConfig& config);

/// Limited-memory quasi-Newton descent with gradient projection onto
/// {x : x >= lower}. Use -inf entries for unbounded coordinates.
/// `scaling`, when given, is a positive diagonal estimate of the inverse
/// Hessian used as the initial metric of the two-loop recursion.
QnResult qn_minimize_bounded(const ObjectiveFn& objective, const Eigen::VectorXd& start,
                             const Eigen::VectorXd& lower, const QuasiNewtonConfig& config,
                             const std::optional<Eigen::VectorXd>& scaling = std::nullopt);

/// Infinity norm of the gradient projected onto the feasible directions at x.
double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& gradient,
                               const Eigen::VectorXd& lower);

struct LassoConfig {
  double step_tolerance = 1e-12;
  /// Relative to ||target||^2.
  double gap_tolerance = 1e-10;
  int max_sweeps = 200000;
};

struct LassoResult {
  Eigen::VectorXd amplitudes;
  int sweeps = 0;
  double duality_gap = 0.0;
  double objective = 0.0;
};

/// argmin_{a >= 0} 1/2 ||target - atoms a||^2 + lambda sum(a) by cyclic
/// coordinate descent.
Eigen::VectorXd nn_lasso(const Eigen::MatrixXd& atoms, const Eigen::VectorXd& target, double lambda,
                         const LassoConfig& config = {});

/// The same problem given through its normal equations: gram = A^T A,
/// correlation = A^T target, target_sq_norm = ||target||^2. `warm_start`
/// may be shorter than the problem; missing entries start at zero.
LassoResult nn_lasso_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& correlation, double target_sq_norm,
                          double lambda, const Eigen::VectorXd& warm_start, const LassoConfig& config = {});

/// Duality gap of the nonnegative LASSO at `amplitudes`.
double lasso_duality_gap(const Eigen::MatrixXd& gram, const Eigen::VectorXd& correlation, double target_sq_norm,
                         double lambda, const Eigen::VectorXd& amplitudes);

/// Central finite-difference gradient with step h.
Eigen::VectorXd central_difference_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                            const Eigen::VectorXd& x, double h);

}  // namespace echograd

#include "echograd/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace echograd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double finite_or_inf(double v) { return std::isfinite(v) ? v : kInf; }

struct LineSearchResult {
  bool ok = false;
  double step = 0.0;
  double value = kInf;
  Eigen::VectorXd point;
  Eigen::VectorXd gradient;
};

// Strong-Wolfe line search along `direction` (bracketing followed by zoom
// with safeguarded quadratic interpolation). Falls back to the best
// sufficient-decrease step when the curvature condition cannot be met
// within the evaluation budget.
class WolfeSearch {
 public:
  WolfeSearch(const ObjectiveFn& objective, const QuasiNewtonConfig& config, int& evaluations)
      : objective_(objective), config_(config), evaluations_(evaluations) {}

  LineSearchResult run(const Eigen::VectorXd& x, double f0, const Eigen::VectorXd& g0,
                       const Eigen::VectorXd& direction) {
    x_ = &x;
    direction_ = &direction;
    f0_ = f0;
    slope0_ = g0.dot(direction);
    best_ = {};
    budget_ = config_.max_line_search_evaluations;

    double max_step = kInf;
    if (config_.max_step_length > 0.0) max_step = config_.max_step_length / direction.norm();
    double prev_step = 0.0;
    double prev_value = f0;
    double prev_slope = slope0_;
    double step = std::min(1.0, max_step);
    for (int i = 0; budget_ > 0; ++i) {
      Trial t = evaluate(step);
      if (t.value > f0_ + config_.armijo * step * slope0_ || (i > 0 && t.value >= prev_value)) {
        return zoom(prev_step, prev_value, prev_slope, step, t.value, t.slope);
      }
      if (std::abs(t.slope) <= -config_.curvature * slope0_) return accept(t);
      if (t.slope >= 0.0) return zoom(step, t.value, t.slope, prev_step, prev_value, prev_slope);
      if (step >= max_step) return accept(t);
      prev_step = step;
      prev_value = t.value;
      prev_slope = t.slope;
      step = std::min(2.0 * step, max_step);
    }
    return best_;
  }

 private:
  struct Trial {
    double step;
    double value;
    double slope;
    Eigen::VectorXd point;
    Eigen::VectorXd gradient;
  };

  Trial evaluate(double step) {
    --budget_;
    ++evaluations_;
    Trial t{step, kInf, 0.0, *x_ + step * *direction_, Eigen::VectorXd::Zero(x_->size())};
    t.value = finite_or_inf(objective_(t.point, t.gradient));
    t.slope = std::isfinite(t.value) ? t.gradient.dot(*direction_) : 0.0;
    if (std::isfinite(t.value) && t.value <= f0_ + config_.armijo * step * slope0_ && t.value < best_.value) {
      best_ = {true, step, t.value, t.point, t.gradient};
    }
    return t;
  }

  LineSearchResult accept(const Trial& t) { return {true, t.step, t.value, t.point, t.gradient}; }

  LineSearchResult zoom(double lo, double f_lo, double slope_lo, double hi, double f_hi, double /*slope_hi*/) {
    while (budget_ > 0) {
      const double width = hi - lo;
      double step = 0.5 * (lo + hi);
      if (std::isfinite(f_hi)) {
        // Minimizer of the quadratic through (lo, f_lo, slope_lo) and (hi, f_hi).
        const double denom = 2.0 * (f_hi - f_lo - slope_lo * width);
        if (denom > 0.0) {
          const double candidate = lo - slope_lo * width * width / denom;
          const double a = std::min(lo, hi) + 0.1 * std::abs(width);
          const double b = std::max(lo, hi) - 0.1 * std::abs(width);
          if (candidate >= a && candidate <= b) step = candidate;
        }
      }
      Trial t = evaluate(step);
      if (t.value > f0_ + config_.armijo * step * slope0_ || t.value >= f_lo) {
        hi = step;
        f_hi = t.value;
      } else {
        if (std::abs(t.slope) <= -config_.curvature * slope0_) return accept(t);
        if (t.slope * (hi - lo) >= 0.0) {
          hi = lo;
          f_hi = f_lo;
        }
        lo = step;
        f_lo = t.value;
        slope_lo = t.slope;
      }
      if (std::abs(hi - lo) <= 1e-16 * std::max(1.0, std::abs(lo))) break;
    }
    return best_;
  }

  const ObjectiveFn& objective_;
  const QuasiNewtonConfig& config_;
  int& evaluations_;
  const Eigen::VectorXd* x_ = nullptr;
  const Eigen::VectorXd* direction_ = nullptr;
  double f0_ = 0.0;
  double slope0_ = 0.0;
  int budget_ = 0;
  LineSearchResult best_;
};

bool made_progress(double before, double after, double tolerance) {
  return before - after > tolerance * std::max(std::abs(before), std::abs(after));
}

}  // namespace

void QuasiNewtonConfig::validate() const {
  if (!(gradient_tolerance > 0.0)) throw Error("gradient tolerance must be positive");
  if (!(armijo > 0.0 && armijo < curvature && curvature < 1.0)) {
    throw Error("line search constants must satisfy 0 < armijo < curvature < 1");
  }
  if (max_iterations < 0) throw Error("max_iterations must be nonnegative");
  if (memory < 1) throw Error("memory must be at least 1");
  if (max_line_search_evaluations < 1) throw Error("line search budget must be positive");
}

std::string to_string(QnStatus status) {
  switch (status) {
    case QnStatus::Converged:
      return "converged";
    case QnStatus::FunctionTolerance:
      return "function_tolerance";
    case QnStatus::MaxIterations:
      return "max_iterations";
    case QnStatus::LineSearchFailed:
      return "line_search_failed";
  }
  return "unknown";
}

QnResult bfgs_minimize(const ObjectiveFn& objective, const Eigen::VectorXd& start, const QuasiNewtonConfig& config) {
  config.validate();
  const auto n = start.size();
  QnResult result;
  result.point = start;
  Eigen::VectorXd g(n);
  double f = objective(result.point, g);
  result.evaluations = 1;
  if (!std::isfinite(f)) throw Error("objective is not finite at the starting point");
  result.value = f;

  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;
  WolfeSearch search(objective, config, result.evaluations);
  for (result.iterations = 0; result.iterations < config.max_iterations; ++result.iterations) {
    if (g.lpNorm<Eigen::Infinity>() <= config.gradient_tolerance) {
      result.status = QnStatus::Converged;
      return result;
    }
    Eigen::VectorXd p = -h * g;
    if (g.dot(p) >= 0.0) {
      h.setIdentity();
      p = -g;
    }
    LineSearchResult ls = search.run(result.point, f, g, p);
    if (!ls.ok && !h.isIdentity()) {
      h.setIdentity();
      p = -g;
      ls = search.run(result.point, f, g, p);
    }
    if (!ls.ok) {
      result.status = QnStatus::LineSearchFailed;
      return result;
    }
    const Eigen::VectorXd s = ls.point - result.point;
    const Eigen::VectorXd y = ls.gradient - g;
    const double sy = s.dot(y);
    const bool progressed = made_progress(f, ls.value, config.function_tolerance);
    result.point = ls.point;
    f = ls.value;
    g = ls.gradient;
    result.value = f;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        h *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n) - rho * y * s.transpose();
      h = v.transpose() * h * v + rho * s * s.transpose();
    }
    if (!progressed) {
      ++result.iterations;
      result.status = g.lpNorm<Eigen::Infinity>() <= config.gradient_tolerance ? QnStatus::Converged
                                                                               : QnStatus::FunctionTolerance;
      return result;
    }
  }
  result.status = g.lpNorm<Eigen::Infinity>() <= config.gradient_tolerance ? QnStatus::Converged
                                                                           : QnStatus::MaxIterations;
  return result;
}

AscentResult qn_maximize(const std::function<double(const Vec3&, Vec3&)>& objective, const Vec3& start,
                         const QuasiNewtonConfig& config) {
  const ObjectiveFn negated = [&](const Eigen::VectorXd& x, Eigen::VectorXd& gradient) {
    Vec3 g;
    const double v = objective(Vec3(x), g);
    gradient = -g;
    return -v;
  };
  const QnResult r = bfgs_minimize(negated, Eigen::VectorXd(start), config);
  return {Vec3(r.point), -r.value, r.iterations, r.status};
}

AscentResult qn_maximize(const std::function<double(const Vec3&)>& objective,
                         const std::function<Vec3(const Vec3&)>& gradient, const Vec3& start,
                         const QuasiNewtonConfig& config) {
  return qn_maximize(
      [&](const Vec3& r, Vec3& g) {
        const double v = objective(r);
        if (std::isfinite(v)) g = gradient(r);
        return v;
      },
      start, config);
}

double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& gradient,
                               const Eigen::VectorXd& lower) {
  double norm = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double g = x[i] <= lower[i] ? std::min(gradient[i], 0.0) : gradient[i];
    norm = std::max(norm, std::abs(g));
  }
  return norm;
}

QnResult qn_minimize_bounded(const ObjectiveFn& objective, const Eigen::VectorXd& start,
                             const Eigen::VectorXd& lower, const QuasiNewtonConfig& config,
                             const std::optional<Eigen::VectorXd>& scaling) {
  config.validate();
  const auto n = start.size();
  if (lower.size() != n) throw Error("bound vector size does not match the start point");
  if (scaling && (scaling->size() != n || !(scaling->array() > 0.0).all())) {
    throw Error("scaling must be a positive vector of the problem size");
  }
  if ((start.array() < lower.array()).any()) throw Error("start point violates the lower bounds");

  const Eigen::VectorXd diag = scaling ? *scaling : Eigen::VectorXd::Ones(n);
  QnResult result;
  result.point = start;
  Eigen::VectorXd g(n);
  double f = objective(result.point, g);
  result.evaluations = 1;
  if (!std::isfinite(f)) throw Error("objective is not finite at the starting point");
  result.value = f;

  std::deque<Eigen::VectorXd> s_hist;
  std::deque<Eigen::VectorXd> y_hist;
  std::deque<double> rho_hist;
  Eigen::ArrayXd free_mask(n);
  std::vector<double> alpha(static_cast<std::size_t>(config.memory));

  auto direction = [&](bool use_memory) {
    Eigen::VectorXd q = (g.array() * free_mask).matrix();
    const auto k = use_memory ? s_hist.size() : 0;
    for (std::size_t j = k; j-- > 0;) {
      alpha[j] = rho_hist[j] * s_hist[j].dot(q);
      q -= alpha[j] * y_hist[j];
    }
    double gamma = 1.0;
    if (k > 0) {
      const auto& y = y_hist.back();
      gamma = s_hist.back().dot(y) / (y.array().square() * diag.array()).sum();
    }
    Eigen::VectorXd r = gamma * (diag.array() * q.array()).matrix();
    for (std::size_t j = 0; j < k; ++j) {
      const double beta = rho_hist[j] * y_hist[j].dot(r);
      r += (alpha[j] - beta) * s_hist[j];
    }
    return Eigen::VectorXd((-r.array() * free_mask).matrix());
  };

  for (result.iterations = 0; result.iterations < config.max_iterations; ++result.iterations) {
    if (projected_gradient_norm(result.point, g, lower) <= config.gradient_tolerance) {
      result.status = QnStatus::Converged;
      return result;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      free_mask[i] = (result.point[i] <= lower[i] && g[i] > 0.0) ? 0.0 : 1.0;
    }

    bool accepted = false;
    Eigen::VectorXd trial;
    Eigen::VectorXd trial_g(n);
    double trial_f = kInf;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      const bool use_memory = attempt == 0 && !s_hist.empty();
      if (attempt == 1 && s_hist.empty() && result.iterations > 0) break;
      Eigen::VectorXd d = direction(use_memory);
      if (g.dot(d) >= 0.0) d = direction(false);
      if (g.dot(d) >= 0.0) break;
      double step = 1.0;
      if (config.max_step_length > 0.0) step = std::min(1.0, config.max_step_length / d.norm());
      for (int e = 0; e < config.max_line_search_evaluations; ++e) {
        trial = (result.point + step * d).cwiseMax(lower);
        trial_f = finite_or_inf(objective(trial, trial_g));
        ++result.evaluations;
        if (trial_f <= f + config.armijo * g.dot(trial - result.point) && trial_f <= f) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) {
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
      }
    }
    if (!accepted) {
      result.status = QnStatus::LineSearchFailed;
      return result;
    }

    const Eigen::VectorXd s = trial - result.point;
    const Eigen::VectorXd y = trial_g - g;
    const double sy = s.dot(y);
    const bool progressed = made_progress(f, trial_f, config.function_tolerance);
    result.point = trial;
    f = trial_f;
    g = trial_g;
    result.value = f;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (static_cast<int>(s_hist.size()) == config.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
    }
    if (!progressed) {
      ++result.iterations;
      result.status = projected_gradient_norm(result.point, g, lower) <= config.gradient_tolerance
                          ? QnStatus::Converged
                          : QnStatus::FunctionTolerance;
      return result;
    }
  }
  result.status = projected_gradient_norm(result.point, g, lower) <= config.gradient_tolerance
                      ? QnStatus::Converged
                      : QnStatus::MaxIterations;
  return result;
}

// ---------------------------------------------------------------------------

double lasso_duality_gap(const Eigen::MatrixXd& gram, const Eigen::VectorXd& correlation, double target_sq_norm,
                         double lambda, const Eigen::VectorXd& amplitudes) {
  const Eigen::VectorXd ga = gram * amplitudes;
  const double ac = amplitudes.dot(correlation);
  const double residual_sq = std::max(0.0, target_sq_norm - 2.0 * ac + amplitudes.dot(ga));
  const double primal = 0.5 * residual_sq + lambda * amplitudes.sum();
  double worst = 0.0;
  if (amplitudes.size() > 0) worst = (correlation - ga).maxCoeff();
  const double scale = worst > lambda ? lambda / worst : 1.0;
  const double dual = scale * (target_sq_norm - ac) - 0.5 * scale * scale * residual_sq;
  return primal - dual;
}

LassoResult nn_lasso_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& correlation, double target_sq_norm,
                          double lambda, const Eigen::VectorXd& warm_start, const LassoConfig& config) {
  const auto q = correlation.size();
  if (gram.rows() != q || gram.cols() != q) throw Error("gram matrix size does not match the correlation vector");
  if (!(lambda >= 0.0)) throw Error("lambda must be nonnegative");
  if (warm_start.size() > q) throw Error("warm start is longer than the problem");
  for (Eigen::Index i = 0; i < q; ++i) {
    if (!(gram(i, i) > 0.0)) throw ZeroAtom("atom " + std::to_string(i) + " has zero norm");
  }

  LassoResult result;
  result.amplitudes = Eigen::VectorXd::Zero(q);
  result.amplitudes.head(warm_start.size()) = warm_start.cwiseMax(0.0);
  Eigen::VectorXd& a = result.amplitudes;
  Eigen::VectorXd ga = gram * a;
  const double gap_limit = config.gap_tolerance * target_sq_norm;

  for (result.sweeps = 0; result.sweeps < config.max_sweeps;) {
    double max_change = 0.0;
    for (Eigen::Index i = 0; i < q; ++i) {
      const double updated = std::max(0.0, a[i] + (correlation[i] - ga[i] - lambda) / gram(i, i));
      const double delta = updated - a[i];
      if (delta != 0.0) {
        ga.noalias() += delta * gram.col(i);
        a[i] = updated;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    ++result.sweeps;
    if (max_change <= config.step_tolerance) {
      ga.noalias() = gram * a;
      result.duality_gap = lasso_duality_gap(gram, correlation, target_sq_norm, lambda, a);
      if (result.duality_gap <= gap_limit) break;
    }
  }
  result.duality_gap = lasso_duality_gap(gram, correlation, target_sq_norm, lambda, a);
  result.objective =
      0.5 * std::max(0.0, target_sq_norm - 2.0 * a.dot(correlation) + a.dot(gram * a)) + lambda * a.sum();
  return result;
}

Eigen::VectorXd nn_lasso(const Eigen::MatrixXd& atoms, const Eigen::VectorXd& target, double lambda,
                         const LassoConfig& config) {
  if (atoms.rows() != target.size()) throw Error("atom length does not match the target");
  if (atoms.cols() < 1) throw Error("at least one atom is required");
  for (Eigen::Index i = 0; i < atoms.cols(); ++i) {
    if (atoms.col(i).squaredNorm() == 0.0) throw ZeroAtom("atom " + std::to_string(i) + " has zero norm");
  }
  const Eigen::MatrixXd gram = atoms.transpose() * atoms;
  const Eigen::VectorXd correlation = atoms.transpose() * target;
  return nn_lasso_gram(gram, correlation, target.squaredNorm(), lambda, Eigen::VectorXd(), config).amplitudes;
}

Eigen::VectorXd central_difference_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                            const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace echograd

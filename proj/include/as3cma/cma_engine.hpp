#pragma once

// (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation and
// rank-one + rank-mu covariance update, written as free functions over a
// plain SearchDistribution value.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "as3cma/box.hpp"
#include "as3cma/rng.hpp"

namespace as3cma {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// floor(4 + 3 ln n).
inline int default_lambda(int n) {
  if (n < 1) throw std::invalid_argument("default_lambda: n must be >= 1");
  return static_cast<int>(std::floor(4.0 + 3.0 * std::log(static_cast<double>(n))));
}

/// Learning rates and recombination weights; a pure function of (n, lambda).
template <typename Scalar>
struct StrategyParameters {
  int mu = 0;
  Vector<Scalar> weights;  // length lambda; first mu positive, rest zero
  Scalar mu_eff{};
  Scalar c_sigma{};
  Scalar d_sigma{};
  Scalar c_c{};
  Scalar c_1{};
  Scalar c_mu{};
  Scalar chi_n{};  // E||N(0, I)||

  static StrategyParameters make(int n, int lambda) {
    using std::log;
    using std::max;
    using std::min;
    using std::sqrt;
    if (n < 1 || lambda < 2) throw std::invalid_argument("StrategyParameters: need n >= 1, lambda >= 2");
    StrategyParameters p;
    const Scalar dn = static_cast<Scalar>(n);
    p.mu = lambda / 2;
    p.weights = Vector<Scalar>::Zero(lambda);
    for (int i = 0; i < p.mu; ++i)
      p.weights[i] = log(static_cast<Scalar>(lambda + 1) / 2) - log(static_cast<Scalar>(i + 1));
    p.weights /= p.weights.sum();
    p.mu_eff = 1 / p.weights.head(p.mu).squaredNorm();

    p.c_sigma = (p.mu_eff + 2) / (dn + p.mu_eff + 5);
    p.d_sigma = 1 + 2 * max(Scalar(0), sqrt((p.mu_eff - 1) / (dn + 1)) - 1) + p.c_sigma;
    p.c_c = (4 + p.mu_eff / dn) / (dn + 4 + 2 * p.mu_eff / dn);
    p.c_1 = 2 / ((dn + Scalar(1.3)) * (dn + Scalar(1.3)) + p.mu_eff);
    p.c_mu = min(1 - p.c_1, 2 * (p.mu_eff - 2 + 1 / p.mu_eff) / ((dn + 2) * (dn + 2) + p.mu_eff));
    p.chi_n = sqrt(dn) * (1 - 1 / (4 * dn) + 1 / (21 * dn * dn));
    return p;
  }
};

/// Gaussian search distribution N(mean, step_size^2 * shape) plus the
/// evolution state CMA-ES carries between iterations.
template <typename Scalar>
struct SearchDistribution {
  Vector<Scalar> mean;
  Scalar step_size{};
  Matrix<Scalar> shape;
  Vector<Scalar> path_sigma;
  Vector<Scalar> path_cov;
  int lambda_x = 0;
  long iteration = 0;
  StrategyParameters<Scalar> strategy;

  // Initial values restored by restart().
  Scalar initial_step_size{};
  Matrix<Scalar> initial_shape;
  int initial_lambda_x = 0;

  int dimension() const { return static_cast<int>(mean.size()); }
  const Vector<Scalar>& recombination_weights() const { return strategy.weights; }
  Matrix<Scalar> covariance() const { return step_size * step_size * shape; }
};

using SearchDistributiond = SearchDistribution<double>;

enum class Outcome { Running, Success, FailSigma, FailCondition, FailBudget };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Running: return "running";
    case Outcome::Success: return "success";
    case Outcome::FailSigma: return "fail_sigma";
    case Outcome::FailCondition: return "fail_condition";
    case Outcome::FailBudget: return "fail_budget";
  }
  return "unknown";
}

inline Outcome outcome_from_string(const std::string& s) {
  for (Outcome o : {Outcome::Running, Outcome::Success, Outcome::FailSigma, Outcome::FailCondition,
                    Outcome::FailBudget})
    if (s == to_string(o)) return o;
  throw std::invalid_argument("unknown outcome '" + s + "'");
}

struct TerminationStatus {
  Outcome outcome = Outcome::Running;
  std::string detail;

  bool terminal() const { return outcome != Outcome::Running; }
};

struct TerminationThresholds {
  double gap = 1e-12;
  double sigma_min = 1e-12;
  double cond_max = 1e14;
};

enum class RestartPolicy { None, Simple, DoubleLambda };

namespace detail {

template <typename Scalar>
bool is_spd(const Matrix<Scalar>& m) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  Eigen::LLT<Matrix<Scalar>> llt(m);
  return llt.info() == Eigen::Success;
}

}  // namespace detail

template <typename Scalar>
SearchDistribution<Scalar> init(int n, const Vector<Scalar>& mean0, Scalar sigma0, const Matrix<Scalar>& shape0,
                                std::optional<int> lambda_x = std::nullopt) {
  if (n < 1) throw std::invalid_argument("init: n must be >= 1");
  if (mean0.size() != n) throw std::invalid_argument("init: mean0 has wrong length");
  if (shape0.rows() != n || shape0.cols() != n) throw std::invalid_argument("init: shape0 has wrong size");
  if (!(sigma0 > 0)) throw std::invalid_argument("init: sigma0 must be positive");
  if (!shape0.isApprox(shape0.transpose()) || !detail::is_spd(shape0))
    throw std::invalid_argument("init: shape0 is not symmetric positive definite");
  const int lambda = lambda_x.value_or(default_lambda(n));
  if (lambda < 2) throw std::invalid_argument("init: lambda_x must be >= 2");

  SearchDistribution<Scalar> d;
  d.mean = mean0;
  d.step_size = sigma0;
  d.shape = shape0;
  d.path_sigma = Vector<Scalar>::Zero(n);
  d.path_cov = Vector<Scalar>::Zero(n);
  d.lambda_x = lambda;
  d.iteration = 0;
  d.strategy = StrategyParameters<Scalar>::make(n, lambda);
  d.initial_step_size = sigma0;
  d.initial_shape = shape0;
  d.initial_lambda_x = lambda;
  return d;
}

/// Draws lambda_x candidates, one per column: mean + sigma * L * z.
template <typename Scalar>
Matrix<Scalar> ask(const SearchDistribution<Scalar>& state, RandomStream& rng) {
  const int n = state.dimension();
  Eigen::LLT<Matrix<Scalar>> llt(state.shape);
  if (llt.info() != Eigen::Success) throw std::runtime_error("ask: shape matrix lost positive definiteness");
  const Matrix<Scalar> lower = llt.matrixL();

  Matrix<Scalar> z(n, state.lambda_x);
  for (int k = 0; k < state.lambda_x; ++k)
    for (int i = 0; i < n; ++i) z(i, k) = static_cast<Scalar>(rng.normal());
  Matrix<Scalar> x = (state.step_size * (lower * z)).colwise() + state.mean;
  return x;
}

/// Ranks the candidates by fitness (ascending, stable) and updates mean,
/// paths, shape and step size in place.
template <typename Scalar>
void tell(SearchDistribution<Scalar>& state, const Matrix<Scalar>& candidates, const Vector<Scalar>& fitness) {
  using std::exp;
  using std::pow;
  using std::sqrt;
  const int n = state.dimension();
  const int lambda = state.lambda_x;
  if (candidates.cols() != lambda || fitness.size() != lambda)
    throw std::invalid_argument("tell: expected " + std::to_string(lambda) + " candidates, got " +
                                std::to_string(candidates.cols()));
  if (candidates.rows() != n) throw std::invalid_argument("tell: candidate dimension mismatch");
  if (!fitness.allFinite()) throw std::invalid_argument("tell: non-finite fitness");

  std::vector<int> order(lambda);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fitness[a] < fitness[b]; });

  const auto& sp = state.strategy;
  Matrix<Scalar> y(n, sp.mu);
  for (int i = 0; i < sp.mu; ++i) y.col(i) = (candidates.col(order[i]) - state.mean) / state.step_size;
  const Vector<Scalar> y_w = y * sp.weights.head(sp.mu);

  state.mean += state.step_size * y_w;

  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(state.shape);
  const Vector<Scalar> inv_sqrt_eval = eig.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt().cwiseInverse();
  const Matrix<Scalar> inv_sqrt_shape =
      eig.eigenvectors() * inv_sqrt_eval.asDiagonal() * eig.eigenvectors().transpose();

  state.path_sigma = (1 - sp.c_sigma) * state.path_sigma +
                     sqrt(sp.c_sigma * (2 - sp.c_sigma) * sp.mu_eff) * (inv_sqrt_shape * y_w);

  const Scalar ps_norm = state.path_sigma.norm();
  const Scalar t = static_cast<Scalar>(state.iteration + 1);
  const bool h_sigma = ps_norm / sqrt(1 - pow(1 - sp.c_sigma, 2 * t)) <
                       (Scalar(1.4) + 2 / static_cast<Scalar>(n + 1)) * sp.chi_n;

  state.path_cov = (1 - sp.c_c) * state.path_cov;
  if (h_sigma) state.path_cov += sqrt(sp.c_c * (2 - sp.c_c) * sp.mu_eff) * y_w;
  const Scalar delta_h = h_sigma ? Scalar(0) : sp.c_c * (2 - sp.c_c);

  const Matrix<Scalar> rank_mu = y * sp.weights.head(sp.mu).asDiagonal() * y.transpose();
  state.shape = (1 - sp.c_1 - sp.c_mu) * state.shape +
                sp.c_1 * (state.path_cov * state.path_cov.transpose() + delta_h * state.shape) +
                sp.c_mu * rank_mu;
  state.shape = (state.shape + state.shape.transpose()).eval() / 2;

  state.step_size *= exp((sp.c_sigma / sp.d_sigma) * (ps_norm / sp.chi_n - 1));
  ++state.iteration;
}

/// cond(C); the sigma^2 factor of Sigma cancels.
template <typename Scalar>
Scalar condition_number(const SearchDistribution<Scalar>& state) {
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(state.shape, Eigen::EigenvaluesOnly);
  const Scalar lo = eig.eigenvalues().minCoeff();
  const Scalar hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0)) return std::numeric_limits<Scalar>::infinity();
  return hi / lo;
}

/// Order: Success, then budget, then sigma, then condition number.
template <typename Scalar>
TerminationStatus check_termination(const SearchDistribution<Scalar>& state, double best_gap, long long fcalls_used,
                                    long long budget, const TerminationThresholds& thresholds = {}) {
  if (best_gap < thresholds.gap) return {Outcome::Success, "gap " + std::to_string(best_gap)};
  if (fcalls_used >= budget)
    return {Outcome::FailBudget, "f-calls " + std::to_string(fcalls_used) + " >= " + std::to_string(budget)};
  if (static_cast<double>(state.step_size) < thresholds.sigma_min)
    return {Outcome::FailSigma, "sigma " + std::to_string(static_cast<double>(state.step_size))};
  const double cond = static_cast<double>(condition_number(state));
  if (cond > thresholds.cond_max) return {Outcome::FailCondition, "cond " + std::to_string(cond)};
  return {};
}

/// max_i Sigma_ii < threshold.
template <typename Scalar>
bool coordinate_std_termination(const SearchDistribution<Scalar>& state, double threshold = 1e-8) {
  const Scalar max_var = state.step_size * state.step_size * state.shape.diagonal().maxCoeff();
  return static_cast<double>(max_var) < threshold;
}

/// Re-initializes at a uniform point of `init_box`. Evolution paths are
/// zeroed, step size and shape return to their initial values.
template <typename Scalar>
void restart(SearchDistribution<Scalar>& state, RestartPolicy policy, const Box& init_box, RandomStream& rng) {
  if (init_box.dimension() != state.dimension()) throw std::invalid_argument("restart: box dimension mismatch");
  const int n = state.dimension();
  if (policy == RestartPolicy::DoubleLambda) state.lambda_x *= 2;
  state.mean = init_box.sample(rng).template cast<Scalar>();
  state.step_size = state.initial_step_size;
  state.shape = state.initial_shape;
  state.path_sigma.setZero();
  state.path_cov.setZero();
  state.iteration = 0;
  state.strategy = StrategyParameters<Scalar>::make(n, state.lambda_x);
}

}  // namespace as3cma

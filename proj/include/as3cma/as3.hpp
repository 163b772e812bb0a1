#pragma once

// Adaptive scenario subset selection: per-scenario inclusion probabilities,
// subset sampling, the Mahalanobis confidence region and the probability
// update rule.
//
// Scenario indices are 0-based throughout the C++ API.

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <vector>

#include "as3cma/cma_engine.hpp"
#include "as3cma/rng.hpp"

namespace as3cma {

using FlagTable = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using FlagArray = Eigen::Array<bool, Eigen::Dynamic, 1>;

struct ScenarioProbabilities {
  Eigen::VectorXd p;
  double epsilon = 0.0;

  /// All entries set to p0; requires epsilon <= p0 <= 1.
  static ScenarioProbabilities constant(int m, double p0, double epsilon);

  int size() const { return static_cast<int>(p.size()); }
  double sum() const { return p.sum(); }
  /// Throws std::logic_error unless epsilon <= p_s <= 1 for every s.
  void check_invariants() const;
};

/// Strictly increasing, nonempty list of scenario indices.
struct ScenarioSubset {
  std::vector<int> indices;

  static ScenarioSubset full(int m);
  static ScenarioSubset from_indices(std::vector<int> indices, int m);

  int size() const { return static_cast<int>(indices.size()); }
  bool contains(int s) const;
  bool operator==(const ScenarioSubset&) const = default;
};

enum class SubsetVariant { Adaptive, Fixed };

struct As3Config {
  double c_p = 0.3;
  double eta = 0.3;
  double gamma = 0.99;
  std::optional<double> epsilon;  // default 1/m
  std::optional<double> p0;       // default 0.1 (adaptive) or lambda_s/m (fixed)
  std::optional<int> lambda_s;    // fixed variant only
};

/// As3Config with every optional filled in for a concrete m.
struct ResolvedAs3Config {
  double c_p;
  double eta;
  double gamma;
  double epsilon;
  double p0;
  int lambda_s;
};

ResolvedAs3Config resolve(const As3Config& cfg, int m, SubsetVariant variant);

/// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);

/// gamma-quantile of the chi-squared distribution with n degrees of freedom.
double chi2_quantile(int n, double gamma);

/// H = { x : (x - m)^T Sigma^{-1} (x - m) <= chi2_quantile(n, gamma) } for the
/// distribution the candidates of one iteration were drawn from.
template <typename Scalar>
class ConfidenceRegion {
 public:
  ConfidenceRegion(const SearchDistribution<Scalar>& state, double gamma)
      : mean_(state.mean),
        step_size_(state.step_size),
        llt_(state.shape),
        threshold_(chi2_quantile(state.dimension(), gamma)) {
    if (llt_.info() != Eigen::Success) throw std::runtime_error("ConfidenceRegion: shape is not positive definite");
  }

  Scalar squared_distance(const Vector<Scalar>& x) const {
    if (x.size() != mean_.size()) throw std::invalid_argument("ConfidenceRegion: dimension mismatch");
    const Vector<Scalar> y = llt_.matrixL().solve(x - mean_);
    return y.squaredNorm() / (step_size_ * step_size_);
  }

  bool contains(const Vector<Scalar>& x) const { return squared_distance(x) <= static_cast<Scalar>(threshold_); }

  double threshold() const { return threshold_; }

 private:
  Vector<Scalar> mean_;
  Scalar step_size_;
  Eigen::LLT<Matrix<Scalar>> llt_;
  double threshold_;
};

template <typename Scalar>
bool in_region(const Vector<Scalar>& x, const SearchDistribution<Scalar>& state, double gamma) {
  return ConfidenceRegion<Scalar>(state, gamma).contains(x);
}

/// Independent Bernoulli(p_s) inclusion, in scenario order; if nothing was
/// drawn, one scenario from Cat(p / sum p).
ScenarioSubset sample_subset_bernoulli(const ScenarioProbabilities& probs, RandomStream& rng);

/// lambda_s distinct scenarios drawn from Cat(p / sum p), rejecting repeats.
ScenarioSubset sample_subset_fixed(const ScenarioProbabilities& probs, int lambda_s, RandomStream& rng);

/// c_p * eta*lambda_x / max(m - eta*lambda_x - 1, eta*lambda_x).
double compute_cn_adaptive(double c_p, double eta, int lambda_x, int m);

/// c_p * lambda_x / nonsupport_count, or 0 when the count is 0.
double compute_cn_fixed(double c_p, int lambda_x, int nonsupport_count);

/// Number of subset scenarios (columns) that support no candidate at all.
int count_nonsupport(const FlagTable& support);

/// Raw Delta before clipping. support(k, j) says subset scenario j attains
/// F(x_k; A); region(k) says x_k lies in the confidence region.
Eigen::VectorXd probability_delta(const ScenarioProbabilities& probs, const ScenarioSubset& subset,
                                  const FlagTable& support, const FlagArray& region, double c_p, double c_n);

/// clip(p + Delta, epsilon, 1).
ScenarioProbabilities update_probabilities(const ScenarioProbabilities& probs, const ScenarioSubset& subset,
                                           const FlagTable& support, const FlagArray& region, double c_p,
                                           double c_n);

}  // namespace as3cma

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "as3cma/as3.hpp"
#include "as3cma/box.hpp"

namespace as3cma {

enum class Sense { Minimize, Maximize };

/// A family f(x, s), s in [0, m). `evaluate` always returns the value to be
/// minimized; maximization problems are negated at construction and carry
/// Sense::Maximize so reports can flip the sign back.
struct WorstCaseProblem {
  std::string name;
  int n = 0;
  int m = 0;
  std::function<double(const Eigen::VectorXd&, int)> evaluate;
  std::optional<Eigen::VectorXd> known_optimum;
  std::optional<double> optimal_value;  // F(known_optimum) by full evaluation
  std::optional<Box> domain;
  Sense sense = Sense::Minimize;

  double natural_value(double canonical) const { return sense == Sense::Maximize ? -canonical : canonical; }
};

class FCallCounter {
 public:
  void charge(std::int64_t calls) {
    if (calls < 0) throw std::invalid_argument("FCallCounter: negative charge");
    total_ += calls;
  }
  std::int64_t total() const { return total_; }

 private:
  std::int64_t total_ = 0;
};

struct EvaluationRecord {
  Eigen::VectorXd candidate;
  ScenarioSubset subset;
  Eigen::VectorXd values;   // values[j] = f(x, subset.indices[j])
  double worst_value = 0.0;
  std::vector<int> supporting;  // scenarios with values == worst_value exactly
  bool in_region = false;

  /// supporting as membership flags over the subset positions.
  FlagArray support_flags() const;
};

class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, Eigen::VectorXd x, int scenario)
      : std::runtime_error(what), point(std::move(x)), scenario(scenario) {}
  Eigen::VectorXd point;
  int scenario;
};

class UndefinedCorrelation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// F(x; A) = max over s in A of f(x, s). Charges |A| f-calls.
EvaluationRecord evaluate_subset(const WorstCaseProblem& problem, const Eigen::VectorXd& x,
                                 const ScenarioSubset& subset, FCallCounter& counter);

/// F(x) over every scenario. Charges m f-calls.
EvaluationRecord evaluate_full(const WorstCaseProblem& problem, const Eigen::VectorXd& x, FCallCounter& counter);

/// Kendall's tau-b. Throws UndefinedCorrelation when either list is all tied.
double kendall_tau(const std::vector<double>& a, const std::vector<double>& b);

/// Union of exact argmax sets over `sample_count` points drawn by `sampler`.
/// Returned sorted; a lower approximation of the support scenarios of the
/// sampled neighbourhood.
std::vector<int> support_oracle(const WorstCaseProblem& problem, const std::function<Eigen::VectorXd()>& sampler,
                                int sample_count, FCallCounter& counter);

/// Uniform sampler over the ball of `radius` around `center`.
std::function<Eigen::VectorXd()> ball_sampler(Eigen::VectorXd center, double radius, RandomStream& rng);

struct SupportRatios {
  double hit = 0.0;     // |A & S*| / |S*|
  double excess = 0.0;  // |A \ S*| / |S*|
};

SupportRatios subset_support_ratios(const ScenarioSubset& subset, const std::vector<int>& support_set);

}  // namespace as3cma

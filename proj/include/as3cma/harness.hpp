#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "as3cma/as3.hpp"
#include "as3cma/cma_engine.hpp"
#include "as3cma/problems.hpp"
#include "as3cma/worstcase.hpp"

namespace as3cma {

enum class Algorithm { Baseline, As3Adaptive, As3Fixed };

const char* to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);
const char* to_string(RestartPolicy p);
RestartPolicy restart_policy_from_string(const std::string& s);

struct GridSource {
  std::optional<std::filesystem::path> path;  // load from file when set
  std::uint64_t seed = 1;                     // otherwise generate
  int rows = 50;
  int cols = 50;
  int bump_count = 12;
  double smoothness = 6.0;
};

struct ExperimentConfig {
  Algorithm algorithm = Algorithm::As3Adaptive;
  ProblemParams problem;
  GridSource grid;  // used when problem.family == WellPlacement

  int trials = 20;
  std::uint64_t seed_base = 0;
  std::optional<long long> budget_fcalls;     // 1e6 for P1-P5, 3e5 for well placement
  std::optional<RestartPolicy> restart;       // None for P1-P5, Simple for well placement
  std::optional<double> init_lo, init_hi;     // m0 ~ U[lo, hi]^n; defaults -4, 4 or the problem domain
  std::optional<double> sigma0;               // 2 for P1-P5, 12.5 for well placement
  std::optional<int> lambda_x;
  As3Config as3;
  TerminationThresholds thresholds;
  double coord_std = 1e-8;  // restart trigger, only with a restart policy
  bool record_tau = false;
  int support_samples = 500;
  double support_radius = 1e-6;
  int jobs = 1;

  void validate() const;
};

/// Values after per-family defaults are applied.
struct ResolvedRunSettings {
  long long budget;
  RestartPolicy restart;
  Box init_box;
  double sigma0;
  std::optional<int> lambda_x;
};

ResolvedRunSettings resolve_settings(const ExperimentConfig& config, const WorstCaseProblem& problem);

/// Builds the problem a config describes (loads or generates grids as needed).
WorstCaseProblem build_problem(const ExperimentConfig& config);

struct IterationRecord {
  long iteration = 0;         // counts across restarts, from 1
  long long fcalls = 0;       // cumulative algorithm f-calls
  std::optional<double> F_full;  // F(m^t) over all scenarios, after the update
  double F_subset = 0.0;      // F(m^t; A^t)
  double sum_p = 0.0;
  int subset_size = 0;
  std::optional<double> tau;  // Kendall tau of F vs F(.; A^t) over the candidates
  int restarts = 0;

  bool operator==(const IterationRecord&) const = default;
};

struct RunTrace {
  std::vector<IterationRecord> records;
  TerminationStatus status;
  std::vector<double> best_so_far;  // min over iterations of F_full, canonical sense
  long long fcalls = 0;
  long long shadow_fcalls = 0;
  int restarts = 0;
  Eigen::VectorXd final_mean;
  ScenarioSubset final_subset;
  Eigen::VectorXd final_p;

  bool success() const { return status.outcome == Outcome::Success; }
  double best_value() const;
};

RunTrace run_baseline(const ExperimentConfig& config, const WorstCaseProblem& problem, std::uint64_t seed);
RunTrace run_as3(const ExperimentConfig& config, const WorstCaseProblem& problem, std::uint64_t seed);
RunTrace run_as3_fixed(const ExperimentConfig& config, const WorstCaseProblem& problem, std::uint64_t seed);

/// Dispatches on config.algorithm.
RunTrace run_single(const ExperimentConfig& config, const WorstCaseProblem& problem, std::uint64_t seed);

struct TrialSummary {
  int trial = 0;
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::Running;
  bool success = false;
  long long fcalls = 0;
  long long fcalls_imputed = 0;  // budget for failed runs
  int restarts = 0;
  double best_value = 0.0;       // natural sense of the problem
  double final_sum_p = 0.0;
  int final_subset_size = 0;
  std::optional<double> hit_ratio;
  std::optional<double> excess_ratio;
};

struct Quartiles {
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

struct ExperimentResult {
  std::string problem_name;
  Algorithm algorithm = Algorithm::Baseline;
  long long budget = 0;
  std::vector<int> support_set;  // S_support(x*) by oracle; empty without a known optimum
  std::vector<RunTrace> traces;
  std::vector<TrialSummary> trials;

  int successes() const;
  double mean_fcalls_imputed() const;
  Quartiles fcalls_quartiles() const;
  Quartiles restarts_quartiles() const;
  Quartiles best_value_quartiles() const;
  Quartiles final_sum_p_quartiles() const;
  std::vector<double> fcalls_imputed() const;
};

TrialSummary summarize_trial(const RunTrace& trace, int trial, std::uint64_t seed, long long budget,
                             const std::vector<int>& support_set, Sense sense);

ExperimentResult run_experiment(const ExperimentConfig& config);
ExperimentResult run_experiment(const ExperimentConfig& config, const WorstCaseProblem& problem);

// Statistics.

struct MannWhitneyResult {
  double u = 0.0;  // U of the first sample
  double p_value = 1.0;
  bool exact = false;
};

/// Two-sided Mann-Whitney U test with midranks. Exact permutation p-value
/// when the combined size is at most 16, otherwise the tie-corrected normal
/// approximation with continuity correction.
MannWhitneyResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b);

/// Median and quartiles with linear interpolation between order statistics
/// (position h = (N - 1) q on the sorted sample).
Quartiles median_iqr(std::vector<double> samples);

}  // namespace as3cma

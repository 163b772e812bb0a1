#include "as3cma/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace as3cma {

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Baseline: return "baseline";
    case Algorithm::As3Adaptive: return "as3";
    case Algorithm::As3Fixed: return "as3-fixed";
  }
  return "unknown";
}

Algorithm algorithm_from_string(const std::string& s) {
  for (Algorithm a : {Algorithm::Baseline, Algorithm::As3Adaptive, Algorithm::As3Fixed})
    if (s == to_string(a)) return a;
  throw std::invalid_argument("unknown algorithm '" + s + "' (expected baseline, as3 or as3-fixed)");
}

const char* to_string(RestartPolicy p) {
  switch (p) {
    case RestartPolicy::None: return "none";
    case RestartPolicy::Simple: return "simple";
    case RestartPolicy::DoubleLambda: return "double";
  }
  return "unknown";
}

RestartPolicy restart_policy_from_string(const std::string& s) {
  for (RestartPolicy p : {RestartPolicy::None, RestartPolicy::Simple, RestartPolicy::DoubleLambda})
    if (s == to_string(p)) return p;
  throw std::invalid_argument("unknown restart policy '" + s + "' (expected none, simple or double)");
}

void ExperimentConfig::validate() const {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (budget_fcalls && *budget_fcalls < 1) throw std::invalid_argument("budget must be >= 1");
  if (sigma0 && !(*sigma0 > 0.0)) throw std::invalid_argument("sigma0 must be positive");
  if (lambda_x && *lambda_x < 2) throw std::invalid_argument("lambda_x must be >= 2");
  if (init_lo.has_value() != init_hi.has_value()) throw std::invalid_argument("init.lo and init.hi go together");
  if (init_lo && !(*init_lo <= *init_hi)) throw std::invalid_argument("init.lo must not exceed init.hi");
  if (support_samples < 1) throw std::invalid_argument("support_samples must be >= 1");
  if (!(support_radius > 0.0)) throw std::invalid_argument("support_radius must be positive");
  if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
  if (algorithm == Algorithm::As3Fixed && !as3.lambda_s)
    throw std::invalid_argument("as3-fixed requires as3.lambda_s");
  problem.validate();
}

ResolvedRunSettings resolve_settings(const ExperimentConfig& config, const WorstCaseProblem& problem) {
  const bool well = config.problem.family == Family::WellPlacement;
  ResolvedRunSettings r{};
  r.budget = config.budget_fcalls.value_or(well ? 300000 : 1000000);
  r.restart = config.restart.value_or(well ? RestartPolicy::Simple : RestartPolicy::None);
  r.sigma0 = config.sigma0.value_or(well ? 12.5 : 2.0);
  r.lambda_x = config.lambda_x;
  if (config.init_lo)
    r.init_box = Box::cube(problem.n, *config.init_lo, *config.init_hi);
  else if (problem.domain)
    r.init_box = *problem.domain;
  else
    r.init_box = Box::cube(problem.n, -4.0, 4.0);
  if (r.init_box.dimension() != problem.n) throw std::invalid_argument("initialization box has wrong dimension");
  return r;
}

WorstCaseProblem build_problem(const ExperimentConfig& config) {
  if (config.problem.family != Family::WellPlacement) return make_problem(config.problem);
  const GridSource& g = config.grid;
  auto grids = std::make_shared<GridStack>(
      g.path ? load_grids(*g.path)
             : generate_synthetic_grids(g.seed, config.problem.m, g.rows, g.cols, g.bump_count, g.smoothness));
  if (grids->m != config.problem.m)
    throw std::invalid_argument("grid file has m = " + std::to_string(grids->m) + " but the config says m = " +
                                std::to_string(config.problem.m));
  return make_well_placement_problem(grids);
}

double RunTrace::best_value() const {
  return best_so_far.empty() ? std::numeric_limits<double>::infinity() : best_so_far.back();
}

namespace {

class Optimizer {
 public:
  Optimizer(const ExperimentConfig& config, const WorstCaseProblem& problem, std::uint64_t seed, Algorithm algo)
      : config_(config),
        problem_(problem),
        settings_(resolve_settings(config, problem)),
        algo_(algo),
        scenario_rng_(RandomStream::derive(seed, "scenario")),
        candidate_rng_(RandomStream::derive(seed, "candidate")) {
    if (algo_ != Algorithm::Baseline)
      as3_ = resolve(config.as3, problem.m,
                     algo_ == Algorithm::As3Fixed ? SubsetVariant::Fixed : SubsetVariant::Adaptive);
    const int n = problem.n;
    state_ = init<double>(n, settings_.init_box.sample(candidate_rng_), settings_.sigma0,
                          Eigen::MatrixXd::Identity(n, n), settings_.lambda_x);
    reset_probabilities();
  }

  RunTrace run() {
    RunTrace trace;
    long iteration = 0;
    double best = std::numeric_limits<double>::infinity();
    for (;;) {
      ++iteration;
      const ScenarioSubset subset = draw_subset();
      const Eigen::MatrixXd X = ask(state_, candidate_rng_);
      const ConfidenceRegion<double> region(state_, as3_ ? as3_->gamma : 0.99);

      const int lambda = state_.lambda_x;
      Eigen::VectorXd fitness(lambda);
      FlagTable support(lambda, subset.size());
      FlagArray in_region(lambda);
      for (int k = 0; k < lambda; ++k) {
        const EvaluationRecord rec = evaluate_subset(problem_, X.col(k), subset, counter_);
        fitness[k] = rec.worst_value;
        support.row(k) = rec.support_flags().transpose();
        in_region[k] = as3_ ? region.contains(X.col(k)) : false;
      }

      std::optional<double> tau;
      if (config_.record_tau) tau = kendall_diagnostic(X, fitness, subset);

      tell(state_, X, fitness);

      if (as3_) {
        const double c_n = algo_ == Algorithm::As3Fixed
                               ? compute_cn_fixed(as3_->c_p, lambda, count_nonsupport(support))
                               : compute_cn_adaptive(as3_->c_p, as3_->eta, lambda, problem_.m);
        probs_ = update_probabilities(probs_, subset, support, in_region, as3_->c_p, c_n);
      }

      const EvaluationRecord at_mean = evaluate_full(problem_, state_.mean, shadow_);
      double f_subset = -std::numeric_limits<double>::infinity();
      for (int s : subset.indices) f_subset = std::max(f_subset, at_mean.values[s]);
      best = std::min(best, at_mean.worst_value);
      const double gap = problem_.optimal_value ? std::abs(at_mean.worst_value - *problem_.optimal_value)
                                                : std::numeric_limits<double>::infinity();

      IterationRecord rec;
      rec.iteration = iteration;
      rec.fcalls = counter_.total();
      rec.F_full = at_mean.worst_value;
      rec.F_subset = f_subset;
      rec.sum_p = probs_.sum();
      rec.subset_size = subset.size();
      rec.tau = tau;
      rec.restarts = restarts_;
      trace.records.push_back(rec);
      trace.best_so_far.push_back(best);
      trace.final_subset = subset;

      TerminationStatus status = check_termination(state_, gap, counter_.total(), settings_.budget,
                                                   config_.thresholds);
      if (status.outcome == Outcome::Success || status.outcome == Outcome::FailBudget) {
        trace.status = std::move(status);
        break;
      }
      const bool restart_policy = settings_.restart != RestartPolicy::None;
      const bool converged = status.terminal() || (restart_policy && coordinate_std_termination(state_, config_.coord_std));
      if (!converged) continue;
      if (!restart_policy) {
        trace.status = std::move(status);
        break;
      }
      restart(state_, settings_.restart, settings_.init_box, candidate_rng_);
      reset_probabilities();
      ++restarts_;
    }

    trace.fcalls = counter_.total();
    trace.shadow_fcalls = shadow_.total();
    trace.restarts = restarts_;
    trace.final_mean = state_.mean;
    trace.final_p = probs_.p;
    return trace;
  }

 private:
  void reset_probabilities() {
    if (as3_)
      probs_ = ScenarioProbabilities::constant(problem_.m, as3_->p0, as3_->epsilon);
    else
      probs_ = ScenarioProbabilities::constant(problem_.m, 1.0, 1.0);
  }

  ScenarioSubset draw_subset() {
    switch (algo_) {
      case Algorithm::Baseline: return ScenarioSubset::full(problem_.m);
      case Algorithm::As3Adaptive: return sample_subset_bernoulli(probs_, scenario_rng_);
      case Algorithm::As3Fixed: return sample_subset_fixed(probs_, as3_->lambda_s, scenario_rng_);
    }
    throw std::logic_error("unreachable");
  }

  std::optional<double> kendall_diagnostic(const Eigen::MatrixXd& X, const Eigen::VectorXd& fitness,
                                           const ScenarioSubset& subset) {
    std::vector<double> sub(fitness.data(), fitness.data() + fitness.size());
    std::vector<double> full = sub;
    if (subset.size() < problem_.m)
      for (Eigen::Index k = 0; k < X.cols(); ++k) full[k] = evaluate_full(problem_, X.col(k), shadow_).worst_value;
    try {
      return kendall_tau(full, sub);
    } catch (const UndefinedCorrelation&) {
      return std::nullopt;
    }
  }

  const ExperimentConfig& config_;
  const WorstCaseProblem& problem_;
  ResolvedRunSettings settings_;
  Algorithm algo_;
  std::optional<ResolvedAs3Config> as3_;
  RandomStream scenario_rng_;
  RandomStream candidate_rng_;
  SearchDistributiond state_;
  ScenarioProbabilities probs_;
  FCallCounter counter_;
  FCallCounter shadow_;
  int restarts_ = 0;
};

}  // namespace

RunTrace run_baseline(const ExperimentConfig& config, const WorstCaseProblem& problem, std::uint64_t seed) {
  return Optimizer(config, problem, seed, Algorithm::Baseline).run();
}

RunTrace run_as3(const ExperimentConfig& config, const WorstCaseProblem& problem, std::uint64_t seed) {
  return Optimizer(config, problem, seed, Algorithm::As3Adaptive).run();
}

RunTrace run_as3_fixed(const ExperimentConfig& config, const WorstCaseProblem& problem, std::uint64_t seed) {
  return Optimizer(config, problem, seed, Algorithm::As3Fixed).run();
}

RunTrace run_single(const ExperimentConfig& config, const WorstCaseProblem& problem, std::uint64_t seed) {
  switch (config.algorithm) {
    case Algorithm::Baseline: return run_baseline(config, problem, seed);
    case Algorithm::As3Adaptive: return run_as3(config, problem, seed);
    case Algorithm::As3Fixed: return run_as3_fixed(config, problem, seed);
  }
  throw std::logic_error("unreachable");
}

TrialSummary summarize_trial(const RunTrace& trace, int trial, std::uint64_t seed, long long budget,
                             const std::vector<int>& support_set, Sense sense) {
  TrialSummary t;
  t.trial = trial;
  t.seed = seed;
  t.outcome = trace.status.outcome;
  t.success = trace.success();
  t.fcalls = trace.fcalls;
  t.fcalls_imputed = t.success ? trace.fcalls : budget;
  t.restarts = trace.restarts;
  t.best_value = sense == Sense::Maximize ? -trace.best_value() : trace.best_value();
  t.final_sum_p = trace.final_p.size() ? trace.final_p.sum() : 0.0;
  t.final_subset_size = trace.final_subset.size();
  if (!support_set.empty() && !trace.final_subset.indices.empty()) {
    const SupportRatios r = subset_support_ratios(trace.final_subset, support_set);
    t.hit_ratio = r.hit;
    t.excess_ratio = r.excess;
  }
  return t;
}

int ExperimentResult::successes() const {
  return static_cast<int>(std::count_if(trials.begin(), trials.end(), [](const TrialSummary& t) { return t.success; }));
}

std::vector<double> ExperimentResult::fcalls_imputed() const {
  std::vector<double> v;
  for (const auto& t : trials) v.push_back(static_cast<double>(t.fcalls_imputed));
  return v;
}

double ExperimentResult::mean_fcalls_imputed() const {
  if (trials.empty()) throw std::invalid_argument("no trials");
  const auto v = fcalls_imputed();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

Quartiles ExperimentResult::fcalls_quartiles() const { return median_iqr(fcalls_imputed()); }

Quartiles ExperimentResult::restarts_quartiles() const {
  std::vector<double> v;
  for (const auto& t : trials) v.push_back(t.restarts);
  return median_iqr(v);
}

Quartiles ExperimentResult::best_value_quartiles() const {
  std::vector<double> v;
  for (const auto& t : trials) v.push_back(t.best_value);
  return median_iqr(v);
}

Quartiles ExperimentResult::final_sum_p_quartiles() const {
  std::vector<double> v;
  for (const auto& t : trials) v.push_back(t.final_sum_p);
  return median_iqr(v);
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const WorstCaseProblem problem = build_problem(config);
  return run_experiment(config, problem);
}

ExperimentResult run_experiment(const ExperimentConfig& config, const WorstCaseProblem& problem) {
  config.validate();
  const ResolvedRunSettings settings = resolve_settings(config, problem);

  ExperimentResult result;
  result.problem_name = problem.name;
  result.algorithm = config.algorithm;
  result.budget = settings.budget;
  if (problem.known_optimum) {
    RandomStream rng = RandomStream::derive(config.seed_base, "oracle");
    FCallCounter diagnostic;
    result.support_set = support_oracle(problem, ball_sampler(*problem.known_optimum, config.support_radius, rng),
                                        config.support_samples, diagnostic);
  }

  const int trials = config.trials;
  result.traces.resize(trials);
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (int i = next++; i < trials; i = next++) {
      try {
        result.traces[i] = run_single(config, problem, config.seed_base + static_cast<std::uint64_t>(i));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int jobs = std::min(config.jobs, trials);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  for (int i = 0; i < trials; ++i)
    result.trials.push_back(summarize_trial(result.traces[i], i, config.seed_base + static_cast<std::uint64_t>(i),
                                            settings.budget, result.support_set, problem.sense));
  return result;
}

namespace {

// Midranks of the pooled sample, doubled so they are integers.
std::vector<long> doubled_midranks(const std::vector<double>& pooled, std::vector<long>* tie_sizes) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
  std::vector<long> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && pooled[idx[j + 1]] == pooled[idx[i]]) ++j;
    // Positions i..j (0-based) share rank ((i+1) + (j+1)) / 2.
    const long doubled = static_cast<long>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = doubled;
    if (tie_sizes) tie_sizes->push_back(static_cast<long>(j - i + 1));
    i = j + 1;
  }
  return ranks;
}

}  // namespace

MannWhitneyResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("mann_whitney_u: empty sample");
  for (double v : a)
    if (std::isnan(v)) throw std::invalid_argument("mann_whitney_u: NaN in sample");
  for (double v : b)
    if (std::isnan(v)) throw std::invalid_argument("mann_whitney_u: NaN in sample");

  const long n1 = static_cast<long>(a.size()), n2 = static_cast<long>(b.size()), N = n1 + n2;
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::vector<long> ties;
  const std::vector<long> ranks = doubled_midranks(pooled, &ties);

  long t_obs = 0;  // 2 * rank sum of the first sample
  for (long i = 0; i < n1; ++i) t_obs += ranks[i];

  MannWhitneyResult res;
  res.u = 0.5 * static_cast<double>(t_obs) - 0.5 * static_cast<double>(n1 * (n1 + 1));
  const double mean_u = 0.5 * static_cast<double>(n1 * n2);

  if (N <= 16) {
    // Permutation distribution of the doubled rank sum over all C(N, n1) splits.
    const long center = n1 * (N + 1);  // null mean of the doubled rank sum
    const long max_sum = std::accumulate(ranks.begin(), ranks.end(), 0L);
    std::vector<std::vector<double>> count(n1 + 1, std::vector<double>(max_sum + 1, 0.0));
    count[0][0] = 1.0;
    for (long r : ranks)
      for (long k = n1; k >= 1; --k)
        for (long s = max_sum; s >= r; --s) count[k][s] += count[k - 1][s - r];
    double total = 0.0, extreme = 0.0;
    const long dev_obs = std::labs(t_obs - center);
    for (long s = 0; s <= max_sum; ++s) {
      const double c = count[n1][s];
      if (c == 0.0) continue;
      total += c;
      if (std::labs(s - center) >= dev_obs) extreme += c;
    }
    res.p_value = std::min(1.0, extreme / total);
    res.exact = true;
    return res;
  }

  double tie_term = 0.0;
  for (long t : ties) tie_term += static_cast<double>(t * t * t - t);
  const double dn = static_cast<double>(N);
  const double var = static_cast<double>(n1 * n2) / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  if (!(var > 0.0)) {
    res.p_value = 1.0;
    return res;
  }
  const double z = std::max(0.0, std::abs(res.u - mean_u) - 0.5) / std::sqrt(var);
  res.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return res;
}

Quartiles median_iqr(std::vector<double> samples) {
  if (samples.empty()) throw std::invalid_argument("median_iqr: empty sample");
  std::sort(samples.begin(), samples.end());
  auto at = [&](double q) {
    const double h = (static_cast<double>(samples.size()) - 1.0) * q;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, samples.size() - 1);
    return samples[lo] + (h - static_cast<double>(lo)) * (samples[hi] - samples[lo]);
  };
  return {at(0.5), at(0.25), at(0.75)};
}

}  // namespace as3cma

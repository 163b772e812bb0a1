#include "as3cma/worstcase.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace as3cma {

FlagArray EvaluationRecord::support_flags() const {
  FlagArray flags(values.size());
  for (Eigen::Index j = 0; j < values.size(); ++j) flags[j] = values[j] == worst_value;
  return flags;
}

EvaluationRecord evaluate_subset(const WorstCaseProblem& problem, const Eigen::VectorXd& x,
                                 const ScenarioSubset& subset, FCallCounter& counter) {
  if (subset.indices.empty()) throw std::invalid_argument("evaluate_subset: empty subset");
  if (x.size() != problem.n) throw std::invalid_argument("evaluate_subset: candidate has wrong dimension");

  EvaluationRecord rec;
  rec.candidate = x;
  rec.subset = subset;
  rec.values.resize(subset.size());
  for (int j = 0; j < subset.size(); ++j) {
    const int s = subset.indices[j];
    if (s < 0 || s >= problem.m) throw std::invalid_argument("evaluate_subset: scenario index out of range");
    const double v = problem.evaluate(x, s);
    if (!std::isfinite(v)) {
      std::ostringstream msg;
      msg << problem.name << ": non-finite f at scenario " << s << ", x = [" << x.transpose() << "]";
      throw EvaluationError(msg.str(), x, s);
    }
    rec.values[j] = v;
  }
  counter.charge(subset.size());

  rec.worst_value = rec.values.maxCoeff();
  for (int j = 0; j < subset.size(); ++j)
    if (rec.values[j] == rec.worst_value) rec.supporting.push_back(subset.indices[j]);
  return rec;
}

EvaluationRecord evaluate_full(const WorstCaseProblem& problem, const Eigen::VectorXd& x, FCallCounter& counter) {
  return evaluate_subset(problem, x, ScenarioSubset::full(problem.m), counter);
}

namespace {

// Stable merge sort of `v`, returning the number of strict inversions.
std::int64_t merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + lo, buf.begin() + hi, v.begin() + lo);
  return swaps;
}

template <typename Eq>
std::int64_t tied_pairs(std::size_t n, Eq same) {
  std::int64_t pairs = 0;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && same(i - 1, i)) {
      ++run;
    } else {
      pairs += static_cast<std::int64_t>(run * (run - 1) / 2);
      run = 1;
    }
  }
  return pairs;
}

}  // namespace

// Knight's O(n log n) algorithm.
double kendall_tau(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("kendall_tau: lengths differ");
  if (a.size() < 2) throw std::invalid_argument("kendall_tau: need at least two observations");
  const std::size_t n = a.size();

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
    return a[i] < a[j] || (a[i] == a[j] && b[i] < b[j]);
  });

  const std::int64_t ties_a = tied_pairs(n, [&](std::size_t i, std::size_t j) { return a[idx[i]] == a[idx[j]]; });
  const std::int64_t ties_joint = tied_pairs(
      n, [&](std::size_t i, std::size_t j) { return a[idx[i]] == a[idx[j]] && b[idx[i]] == b[idx[j]]; });

  std::vector<double> bs(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) bs[i] = b[idx[i]];
  const std::int64_t swaps = merge_count(bs, buf, 0, n);
  const std::int64_t ties_b = tied_pairs(n, [&](std::size_t i, std::size_t j) { return bs[i] == bs[j]; });

  const std::int64_t total = static_cast<std::int64_t>(n * (n - 1) / 2);
  if (ties_a == total || ties_b == total) throw UndefinedCorrelation("kendall_tau: all values tied in one list");
  const double numerator = static_cast<double>(total - ties_a - ties_b + ties_joint - 2 * swaps);
  const double denominator = std::sqrt(static_cast<double>(total - ties_a) * static_cast<double>(total - ties_b));
  return std::clamp(numerator / denominator, -1.0, 1.0);
}

std::vector<int> support_oracle(const WorstCaseProblem& problem, const std::function<Eigen::VectorXd()>& sampler,
                                int sample_count, FCallCounter& counter) {
  if (sample_count < 1) throw std::invalid_argument("support_oracle: sample_count must be >= 1");
  std::set<int> found;
  const ScenarioSubset all = ScenarioSubset::full(problem.m);
  for (int i = 0; i < sample_count; ++i) {
    const EvaluationRecord rec = evaluate_subset(problem, sampler(), all, counter);
    found.insert(rec.supporting.begin(), rec.supporting.end());
  }
  return {found.begin(), found.end()};
}

std::function<Eigen::VectorXd()> ball_sampler(Eigen::VectorXd center, double radius, RandomStream& rng) {
  return [center = std::move(center), radius, &rng]() {
    const Eigen::Index n = center.size();
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal();
    const double norm = z.norm();
    const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(n));
    return Eigen::VectorXd(center + (norm > 0.0 ? r / norm : 0.0) * z);
  };
}

SupportRatios subset_support_ratios(const ScenarioSubset& subset, const std::vector<int>& support_set) {
  if (support_set.empty()) throw std::invalid_argument("subset_support_ratios: empty support set");
  std::vector<int> sorted_support = support_set;
  std::sort(sorted_support.begin(), sorted_support.end());
  sorted_support.erase(std::unique(sorted_support.begin(), sorted_support.end()), sorted_support.end());
  int hit = 0;
  for (int s : subset.indices)
    if (std::binary_search(sorted_support.begin(), sorted_support.end(), s)) ++hit;
  const double k = static_cast<double>(sorted_support.size());
  return {hit / k, (subset.size() - hit) / k};
}

}  // namespace as3cma

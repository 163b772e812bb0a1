#include "as3cma/as3.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace as3cma {

ScenarioProbabilities ScenarioProbabilities::constant(int m, double p0, double epsilon) {
  if (m < 1) throw std::invalid_argument("ScenarioProbabilities: m must be >= 1");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw std::invalid_argument("ScenarioProbabilities: epsilon must be in (0, 1]");
  if (!(p0 >= epsilon && p0 <= 1.0)) throw std::invalid_argument("ScenarioProbabilities: p0 must be in [epsilon, 1]");
  return {Eigen::VectorXd::Constant(m, p0), epsilon};
}

void ScenarioProbabilities::check_invariants() const {
  if (p.size() < 1) throw std::logic_error("ScenarioProbabilities: empty");
  if ((p.array() < epsilon).any() || (p.array() > 1.0).any())
    throw std::logic_error("ScenarioProbabilities: entry outside [epsilon, 1]");
}

ScenarioSubset ScenarioSubset::full(int m) {
  ScenarioSubset a;
  a.indices.resize(m);
  for (int s = 0; s < m; ++s) a.indices[s] = s;
  return a;
}

ScenarioSubset ScenarioSubset::from_indices(std::vector<int> indices, int m) {
  std::sort(indices.begin(), indices.end());
  if (indices.empty()) throw std::invalid_argument("ScenarioSubset: empty");
  if (std::adjacent_find(indices.begin(), indices.end()) != indices.end())
    throw std::invalid_argument("ScenarioSubset: duplicate index");
  if (indices.front() < 0 || indices.back() >= m) throw std::invalid_argument("ScenarioSubset: index out of range");
  return ScenarioSubset{std::move(indices)};
}

bool ScenarioSubset::contains(int s) const { return std::binary_search(indices.begin(), indices.end(), s); }

ResolvedAs3Config resolve(const As3Config& cfg, int m, SubsetVariant variant) {
  ResolvedAs3Config r{};
  r.eta = cfg.eta;
  r.gamma = cfg.gamma;
  r.epsilon = cfg.epsilon.value_or(1.0 / m);
  if (variant == SubsetVariant::Fixed) {
    if (!cfg.lambda_s) throw std::invalid_argument("fixed subset variant requires lambda_s");
    r.lambda_s = *cfg.lambda_s;
    if (r.lambda_s < 1 || r.lambda_s > m) throw std::invalid_argument("lambda_s must be in [1, m]");
    r.c_p = cfg.c_p;
    r.p0 = cfg.p0.value_or(std::max(static_cast<double>(r.lambda_s) / m, r.epsilon));
  } else {
    r.lambda_s = 0;
    r.c_p = cfg.c_p;
    r.p0 = cfg.p0.value_or(std::max(0.1, r.epsilon));
  }
  if (!(r.c_p > 0.0 && r.c_p <= 1.0)) throw std::invalid_argument("c_p must be in (0, 1]");
  if (!(r.eta > 0.0 && r.eta <= 1.0)) throw std::invalid_argument("eta must be in (0, 1]");
  if (!(r.gamma > 0.0 && r.gamma < 1.0)) throw std::invalid_argument("gamma must be in (0, 1)");
  if (!(r.epsilon > 0.0 && r.epsilon <= 1.0)) throw std::invalid_argument("epsilon must be in (0, 1]");
  if (!(r.p0 >= r.epsilon && r.p0 <= 1.0)) throw std::invalid_argument("p0 must be in [epsilon, 1]");
  return r;
}

namespace {

double gamma_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int k = 1; k < 1000; ++k) {
    term *= x / (a + k);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-17) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper tail Q(a, x) by the modified Lentz continued fraction.
double gamma_continued_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 1000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0)) throw std::invalid_argument("regularized_gamma_p: a must be positive");
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return gamma_series(a, x);
  return 1.0 - gamma_continued_fraction(a, x);
}

double chi2_quantile(int n, double gamma) {
  if (n < 1) throw std::invalid_argument("chi2_quantile: n must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("chi2_quantile: gamma must be in (0, 1)");
  const double a = 0.5 * n;
  auto cdf = [a](double x) { return regularized_gamma_p(a, 0.5 * x); };

  double lo = 0.0;
  double hi = std::max(1.0, static_cast<double>(n));
  while (cdf(hi) < gamma) {
    lo = hi;
    hi *= 2.0;
  }
  // Plain bisection; the decision cdf(mid) < gamma is monotone in gamma, so
  // the returned quantile is too.
  for (int it = 0; it < 400 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (cdf(mid) < gamma)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

int sample_categorical(const Eigen::VectorXd& p, double total, RandomStream& rng) {
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (Eigen::Index s = 0; s < p.size(); ++s) {
    acc += p[s];
    if (u < acc) return static_cast<int>(s);
  }
  return static_cast<int>(p.size() - 1);
}

}  // namespace

ScenarioSubset sample_subset_bernoulli(const ScenarioProbabilities& probs, RandomStream& rng) {
  ScenarioSubset a;
  const int m = probs.size();
  for (int s = 0; s < m; ++s)
    if (rng.uniform() < probs.p[s]) a.indices.push_back(s);
  if (a.indices.empty()) a.indices.push_back(sample_categorical(probs.p, probs.sum(), rng));
  return a;
}

ScenarioSubset sample_subset_fixed(const ScenarioProbabilities& probs, int lambda_s, RandomStream& rng) {
  const int m = probs.size();
  if (lambda_s < 1 || lambda_s > m)
    throw std::invalid_argument("sample_subset_fixed: lambda_s = " + std::to_string(lambda_s) + " not in [1, " +
                                std::to_string(m) + "]");
  std::vector<char> taken(m, 0);
  const double total = probs.sum();
  int count = 0;
  while (count < lambda_s) {
    const int s = sample_categorical(probs.p, total, rng);
    if (!taken[s]) {
      taken[s] = 1;
      ++count;
    }
  }
  ScenarioSubset a;
  a.indices.reserve(lambda_s);
  for (int s = 0; s < m; ++s)
    if (taken[s]) a.indices.push_back(s);
  return a;
}

double compute_cn_adaptive(double c_p, double eta, int lambda_x, int m) {
  const double el = eta * lambda_x;
  return c_p * (el / std::max(m - el - 1.0, el));
}

double compute_cn_fixed(double c_p, int lambda_x, int nonsupport_count) {
  if (nonsupport_count < 0) throw std::invalid_argument("compute_cn_fixed: negative count");
  if (nonsupport_count == 0) return 0.0;
  return c_p * lambda_x / nonsupport_count;
}

int count_nonsupport(const FlagTable& support) {
  int count = 0;
  for (Eigen::Index j = 0; j < support.cols(); ++j)
    if (!support.col(j).any()) ++count;
  return count;
}

Eigen::VectorXd probability_delta(const ScenarioProbabilities& probs, const ScenarioSubset& subset,
                                  const FlagTable& support, const FlagArray& region, double c_p, double c_n) {
  if (support.cols() != subset.size())
    throw std::invalid_argument("probability_delta: support table has " + std::to_string(support.cols()) +
                                " columns for a subset of size " + std::to_string(subset.size()));
  if (support.rows() != region.size()) throw std::invalid_argument("probability_delta: region flags length mismatch");

  Eigen::VectorXd delta = Eigen::VectorXd::Zero(probs.size());
  for (int j = 0; j < subset.size(); ++j) {
    const int s = subset.indices[j];
    if (s < 0 || s >= probs.size()) throw std::invalid_argument("probability_delta: subset index out of range");
    const auto hits = (support.col(j) && region).count();
    delta[s] = hits > 0 ? c_p * static_cast<double>(hits) : -c_n;
  }
  return delta;
}

ScenarioProbabilities update_probabilities(const ScenarioProbabilities& probs, const ScenarioSubset& subset,
                                           const FlagTable& support, const FlagArray& region, double c_p,
                                           double c_n) {
  const Eigen::VectorXd delta = probability_delta(probs, subset, support, region, c_p, c_n);
  ScenarioProbabilities next{(probs.p + delta).cwiseMax(probs.epsilon).cwiseMin(1.0), probs.epsilon};
  next.check_invariants();
  return next;
}

}  // namespace as3cma

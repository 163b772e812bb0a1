#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "as3cma/problems.hpp"
#include "as3cma/worstcase.hpp"

using namespace as3cma;
using Eigen::VectorXd;

namespace {

// O(n^2) tau-b by explicit pair counting.
double brute_tau_b(const std::vector<double>& a, const std::vector<double>& b) {
  long long concordant = 0, discordant = 0, tie_a = 0, tie_b = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const double da = a[i] - a[j], db = b[i] - b[j];
      if (da == 0 && db == 0) {
        ++tie_a;
        ++tie_b;
      } else if (da == 0) {
        ++tie_a;
      } else if (db == 0) {
        ++tie_b;
      } else if ((da > 0) == (db > 0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  const double n0 = static_cast<double>(a.size() * (a.size() - 1) / 2);
  return (concordant - discordant) / std::sqrt((n0 - tie_a) * (n0 - tie_b));
}

WorstCaseProblem table_problem(std::vector<std::vector<double>> rows) {
  WorstCaseProblem p;
  p.name = "table";
  p.n = 1;
  p.m = static_cast<int>(rows[0].size());
  p.evaluate = [rows](const VectorXd& x, int s) { return rows[static_cast<int>(x[0])][s]; };
  return p;
}

}  // namespace

TEST_CASE("evaluate_subset") {
  const auto p5 = make_problem({Family::P5, 1, 3, {}, {}});
  FCallCounter counter;
  SUBCASE("P5 with m = 3 at the origin") {
    const auto rec = evaluate_subset(p5, VectorXd::Zero(1), ScenarioSubset::full(3), counter);
    CHECK(rec.values[0] == -1.0);
    CHECK(rec.values[1] == 0.0);
    CHECK(rec.values[2] == -1.0);
    CHECK(rec.worst_value == 0.0);
    CHECK(rec.supporting == std::vector<int>{1});
    CHECK(counter.total() == 3);
  }
  SUBCASE("singleton subset") {
    const VectorXd x = VectorXd::Constant(1, 0.37);
    const auto rec = evaluate_subset(p5, x, ScenarioSubset::from_indices({2}, 3), counter);
    CHECK(rec.worst_value == p5.evaluate(x, 2));
    CHECK(rec.supporting == std::vector<int>{2});
  }
  SUBCASE("counter accounting") {
    const auto p = make_problem({Family::P5, 1, 9, {}, {}});
    counter.charge(7);
    evaluate_subset(p, VectorXd::Zero(1), ScenarioSubset::from_indices({0, 2, 4, 6, 8}, 9), counter);
    CHECK(counter.total() == 12);
    CHECK_THROWS_AS(counter.charge(-1), std::invalid_argument);
  }
  SUBCASE("ties keep every maximizer") {
    const auto p = table_problem({{1.0, 3.0, 3.0, 2.0}});
    const auto rec = evaluate_subset(p, VectorXd::Zero(1), ScenarioSubset::full(4), counter);
    CHECK(rec.supporting == std::vector<int>{1, 2});
    const FlagArray flags = rec.support_flags();
    CHECK_FALSE(flags[0]);
    CHECK(flags[1]);
    CHECK(flags[2]);
    CHECK_FALSE(flags[3]);
  }
  SUBCASE("non-finite values carry the point and scenario") {
    const auto p = table_problem({{1.0, std::nan(""), 0.0}});
    try {
      evaluate_subset(p, VectorXd::Zero(1), ScenarioSubset::full(3), counter);
      FAIL("expected EvaluationError");
    } catch (const EvaluationError& e) {
      CHECK(e.scenario == 1);
      CHECK(e.point.size() == 1);
    }
  }
  SUBCASE("empty subset rejected") {
    CHECK_THROWS_AS(evaluate_subset(p5, VectorXd::Zero(1), ScenarioSubset{}, counter), std::invalid_argument);
  }
}

TEST_CASE("evaluate_full") {
  FCallCounter counter;
  SUBCASE("P2 at the origin") {
    const auto p2 = make_problem({Family::P2, 10, 30, 10, {}});
    const auto rec = evaluate_full(p2, VectorXd::Zero(10), counter);
    CHECK(rec.worst_value == 0.0);
    for (int s = 0; s < 10; ++s) CHECK(rec.values[s] == 0.0);
    for (int s = 10; s < 30; ++s) CHECK(rec.values[s] == doctest::Approx(-1.0));
    CHECK(rec.supporting.size() == 10);
    CHECK(counter.total() == 30);
  }
  SUBCASE("single scenario") {
    WorstCaseProblem sphere{"sphere", 3, 1, [](const VectorXd& x, int) { return x.squaredNorm(); }, {}, {}, {}, {}};
    const VectorXd x = VectorXd::Constant(3, 2.0);
    CHECK(evaluate_full(sphere, x, counter).worst_value == 12.0);
  }
  SUBCASE("subset never exceeds full, and grows with the subset") {
    const auto p1 = make_problem({Family::P1, 3, 12, 4, {}});
    RandomStream rng(3);
    for (int i = 0; i < 1000; ++i) {
      VectorXd x(3);
      for (int j = 0; j < 3; ++j) x[j] = rng.uniform(-3, 3);
      const auto big = sample_subset_bernoulli(ScenarioProbabilities::constant(12, 0.6, 0.1), rng);
      std::vector<int> small;
      for (int s : big.indices)
        if (rng.uniform() < 0.5) small.push_back(s);
      if (small.empty()) small.push_back(big.indices.front());
      const double f_small = evaluate_subset(p1, x, ScenarioSubset::from_indices(small, 12), counter).worst_value;
      const double f_big = evaluate_subset(p1, x, big, counter).worst_value;
      const double f_full = evaluate_full(p1, x, counter).worst_value;
      REQUIRE(f_small <= f_big);
      REQUIRE(f_big <= f_full);
    }
  }
  SUBCASE("conservation") {
    const auto p = make_problem({Family::P5, 2, 7, {}, {}});
    RandomStream rng(8);
    long long expected = 0;
    for (int i = 0; i < 100; ++i) {
      const auto a = sample_subset_bernoulli(ScenarioProbabilities::constant(7, 0.4, 0.1), rng);
      evaluate_subset(p, VectorXd::Zero(2), a, counter);
      expected += a.size();
    }
    CHECK(counter.total() == expected);
  }
}

TEST_CASE("kendall_tau") {
  CHECK(kendall_tau({1, 2, 3, 4}, {1, 2, 3, 4}) == doctest::Approx(1.0));
  CHECK(kendall_tau({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(kendall_tau({1, 2, 3, 4}, {1, 3, 2, 4}) == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(kendall_tau({1, 1, 1}, {1, 2, 3}), UndefinedCorrelation);
  CHECK_THROWS_AS(kendall_tau({1, 2, 3}, {5, 5, 5}), UndefinedCorrelation);
  CHECK_THROWS_AS(kendall_tau({1}, {1}), std::invalid_argument);
  CHECK_THROWS_AS(kendall_tau({1, 2}, {1, 2, 3}), std::invalid_argument);

  SUBCASE("agrees with pair counting, symmetric, bounded") {
    RandomStream rng(13);
    for (int trial = 0; trial < 500; ++trial) {
      const int n = 2 + static_cast<int>(rng.uniform() * 40);
      const int levels = 1 + static_cast<int>(rng.uniform() * 8);
      std::vector<double> a(n), b(n);
      for (int i = 0; i < n; ++i) {
        a[i] = std::floor(rng.uniform() * levels);
        b[i] = std::floor(rng.uniform() * levels);
      }
      const bool a_tied = std::all_of(a.begin(), a.end(), [&](double v) { return v == a[0]; });
      const bool b_tied = std::all_of(b.begin(), b.end(), [&](double v) { return v == b[0]; });
      if (a_tied || b_tied) {
        CHECK_THROWS_AS(kendall_tau(a, b), UndefinedCorrelation);
        continue;
      }
      const double tau = kendall_tau(a, b);
      REQUIRE(tau == doctest::Approx(brute_tau_b(a, b)).epsilon(1e-12));
      REQUIRE(tau == doctest::Approx(kendall_tau(b, a)).epsilon(1e-12));
      REQUIRE(std::abs(tau) <= 1.0);
    }
  }
}

TEST_CASE("support_oracle") {
  FCallCounter diagnostic;
  SUBCASE("P2 near the optimum finds exactly 1..K") {
    const auto p2 = make_problem({Family::P2, 10, 30, 10, {}});
    RandomStream rng(1);
    const auto found = support_oracle(p2, ball_sampler(VectorXd::Zero(10), 1e-3, rng), 1000, diagnostic);
    std::vector<int> expected(10);
    std::iota(expected.begin(), expected.end(), 0);
    CHECK(found == expected);
    CHECK(diagnostic.total() == 30000);
  }
  SUBCASE("P5 with odd m shrinks to the middle scenario") {
    const auto p5 = make_problem({Family::P5, 1, 9, {}, {}});
    for (double radius : {1e-1, 1e-3, 1e-6}) {
      RandomStream rng(2);
      CHECK(support_oracle(p5, ball_sampler(VectorXd::Zero(1), radius, rng), 200, diagnostic) ==
            std::vector<int>{4});
    }
  }
  SUBCASE("one sample gives that point's argmax set") {
    const auto p1 = make_problem({Family::P1, 2, 6, 3, {}});
    const VectorXd x = (VectorXd(2) << 0.2, -0.7).finished();
    const auto found = support_oracle(p1, [&] { return x; }, 1, diagnostic);
    CHECK(found == evaluate_full(p1, x, diagnostic).supporting);
  }
  SUBCASE("more samples never lose scenarios") {
    const auto p1 = make_problem({Family::P1, 2, 12, 4, {}});
    RandomStream a(9), b(9);
    const auto few = support_oracle(p1, ball_sampler(VectorXd::Zero(2), 2.0, a), 30, diagnostic);
    const auto many = support_oracle(p1, ball_sampler(VectorXd::Zero(2), 2.0, b), 300, diagnostic);
    CHECK(std::includes(many.begin(), many.end(), few.begin(), few.end()));
  }
  SUBCASE("ball sampler stays in the ball") {
    RandomStream rng(4);
    const VectorXd c = VectorXd::Constant(5, 1.0);
    auto sample = ball_sampler(c, 0.5, rng);
    for (int i = 0; i < 1000; ++i) CHECK((sample() - c).norm() <= 0.5);
  }
  CHECK_THROWS_AS(support_oracle(make_problem({Family::P5, 1, 3, {}, {}}), [] { return VectorXd::Zero(1); }, 0,
                                 diagnostic),
                  std::invalid_argument);
}

TEST_CASE("subset_support_ratios") {
  std::vector<int> support(10);
  std::iota(support.begin(), support.end(), 0);
  auto r = subset_support_ratios(ScenarioSubset::full(10), support);
  CHECK(r.hit == 1.0);
  CHECK(r.excess == 0.0);

  r = subset_support_ratios(ScenarioSubset::full(30), support);
  CHECK(r.hit == 1.0);
  CHECK(r.excess == doctest::Approx(30.0 / 10.0 - 1.0));

  r = subset_support_ratios(ScenarioSubset::from_indices({12, 15, 20}, 30), support);
  CHECK(r.hit == 0.0);
  CHECK(r.excess == doctest::Approx(0.3));

  CHECK_THROWS_AS(subset_support_ratios(ScenarioSubset::full(3), {}), std::invalid_argument);
}

#pragma once

#include <Eigen/Dense>

#include <stdexcept>

#include "as3cma/rng.hpp"

namespace as3cma {

/// Axis-aligned box [lower, upper] in R^n.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Box() = default;
  Box(Eigen::VectorXd lo, Eigen::VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size()) throw std::invalid_argument("Box: bound sizes differ");
    if ((lower.array() > upper.array()).any()) throw std::invalid_argument("Box: lower > upper");
  }

  static Box cube(int n, double lo, double hi) {
    return Box(Eigen::VectorXd::Constant(n, lo), Eigen::VectorXd::Constant(n, hi));
  }

  int dimension() const { return static_cast<int>(lower.size()); }

  bool contains(const Eigen::VectorXd& x) const {
    return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
  }

  Eigen::VectorXd clamp(const Eigen::VectorXd& x) const {
    return x.cwiseMax(lower).cwiseMin(upper);
  }

  /// Uniform sample, one draw per coordinate in index order.
  Eigen::VectorXd sample(RandomStream& rng) const {
    Eigen::VectorXd x(lower.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.uniform(lower[i], upper[i]);
    return x;
  }
};

}  // namespace as3cma

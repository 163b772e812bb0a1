#pragma once

// Analytic min-max test problems P1-P5 and the grid-based well-placement
// objective. Formulas use 1-based scenario numbers internally; the public
// evaluate functions take the 0-based index used across the library.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "as3cma/worstcase.hpp"

namespace as3cma {

enum class Family { P1, P2, P3, P4, P5, WellPlacement };

const char* to_string(Family f);
Family family_from_string(const std::string& s);

struct ProblemParams {
  Family family = Family::P1;
  int n = 2;
  int m = 2;
  std::optional<int> K;  // P1, P2
  std::optional<int> L;  // P4

  /// Throws std::invalid_argument when the family's constraints are violated.
  void validate() const;
};

double p1_eval(const Eigen::VectorXd& x, int s, const ProblemParams& params);
double p2_eval(const Eigen::VectorXd& x, int s, const ProblemParams& params);
double p3_eval(const Eigen::VectorXd& x, int s, const ProblemParams& params);
double p4_eval(const Eigen::VectorXd& x, int s, const ProblemParams& params);
double p5_eval(const Eigen::VectorXd& x, int s, const ProblemParams& params);

/// P1-P5 with known optimum 0 and optimal value F(0) by full evaluation.
WorstCaseProblem make_problem(const ProblemParams& params);

/// Per-scenario injectable-volume grids. Node (i, j), 1-based, sits at real
/// coordinates (i, j); layers[s](i-1, j-1) holds its value.
struct GridStack {
  int m = 0;
  int rows = 0;
  int cols = 0;
  std::vector<Eigen::MatrixXd> layers;

  void validate() const;
  bool operator==(const GridStack& other) const;
};

/// Bilinear interpolant of one layer at (u, v) in [1, rows] x [1, cols].
double bilinear_interpolate(const Eigen::MatrixXd& layer, double u, double v);

/// Three wells at (x0, x1), (x2, x3), (x4, x5). Coordinates are clipped into
/// the grid. Returns the interference-weighted total volume (to be maximized).
double well_placement_eval(const GridStack& grids, const Eigen::VectorXd& x, int s);

/// max-min well placement as a canonical minimization problem (negated).
WorstCaseProblem make_well_placement_problem(std::shared_ptr<const GridStack> grids);

GridStack generate_synthetic_grids(std::uint64_t seed, int m, int rows = 50, int cols = 50, int bump_count = 12,
                                   double smoothness = 6.0);

GridStack load_grids(const std::filesystem::path& path);
void save_grids(const GridStack& stack, const std::filesystem::path& path);

}  // namespace as3cma

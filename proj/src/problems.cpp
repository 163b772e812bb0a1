#include "as3cma/problems.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace as3cma {

const char* to_string(Family f) {
  switch (f) {
    case Family::P1: return "p1";
    case Family::P2: return "p2";
    case Family::P3: return "p3";
    case Family::P4: return "p4";
    case Family::P5: return "p5";
    case Family::WellPlacement: return "well";
  }
  return "unknown";
}

Family family_from_string(const std::string& s) {
  for (Family f : {Family::P1, Family::P2, Family::P3, Family::P4, Family::P5, Family::WellPlacement})
    if (s == to_string(f)) return f;
  throw std::invalid_argument("unknown problem family '" + s + "' (expected p1..p5 or well)");
}

void ProblemParams::validate() const {
  auto fail = [this](const std::string& why) {
    throw std::invalid_argument(std::string(to_string(family)) + ": " + why);
  };
  switch (family) {
    case Family::P1:
    case Family::P2:
      if (n < 2) fail("n must be >= 2");
      if (m < 2) fail("m must be >= 2");
      if (!K) fail("K is required");
      if (*K < 2 || *K > m) fail("K must satisfy 2 <= K <= m");
      break;
    case Family::P3:
      if (n < 1) fail("n must be >= 1");
      if (m < 2 * n) fail("m must be >= 2n");
      break;
    case Family::P4:
      if (n < 1) fail("n must be >= 1");
      if (!L) fail("L is required");
      if (*L < 2 || *L > m) fail("L must satisfy 2 <= L <= m");
      if (m % *L != 0) fail("L must divide m");
      break;
    case Family::P5:
      if (n < 1) fail("n must be >= 1");
      if (m < 2) fail("m must be >= 2");
      break;
    case Family::WellPlacement:
      if (n != 6) fail("well placement has n = 6");
      if (m < 1) fail("m must be >= 1");
      break;
  }
}

namespace {

void check_index(const Eigen::VectorXd& x, int s, const ProblemParams& p) {
  if (s < 0 || s >= p.m) throw std::out_of_range("scenario index " + std::to_string(s) + " out of range");
  if (x.size() != p.n) throw std::invalid_argument("candidate has wrong dimension");
}

struct Planar {
  double c;
  double s;
};

// Shared first branch of P1 and P2: the K scenarios around the optimum.
double inner_branch(const Eigen::VectorXd& x, int s1, int K) {
  const double omega = std::numbers::pi / K;
  const double c = std::cos(omega), sn = std::sin(omega);
  const double alpha = (c * c) / (sn * sn);
  const double proj = x[0] * std::cos(omega * s1) + x[1] * std::sin(omega * s1);
  return x.squaredNorm() - (1.0 + alpha) * proj * proj;
}

Planar outer_direction(int s1, int K, int m) {
  const double omega = 2.0 * std::numbers::pi / (m - K);
  return {std::cos(omega * (s1 - K)), std::sin(omega * (s1 - K))};
}

double outer_sq_distance(const Eigen::VectorXd& x, Planar v) {
  const double d0 = x[0] - v.c, d1 = x[1] - v.s;
  return d0 * d0 + d1 * d1 + x.tail(x.size() - 2).squaredNorm();
}

}  // namespace

double p1_eval(const Eigen::VectorXd& x, int s, const ProblemParams& params) {
  check_index(x, s, params);
  const int K = *params.K, s1 = s + 1;
  if (s1 <= K) return inner_branch(x, s1, K);
  return 2.0 * outer_sq_distance(x, outer_direction(s1, K, params.m)) - 8.0;
}

double p2_eval(const Eigen::VectorXd& x, int s, const ProblemParams& params) {
  check_index(x, s, params);
  const int K = *params.K, s1 = s + 1;
  if (s1 <= K) return inner_branch(x, s1, K);
  return std::sqrt(outer_sq_distance(x, outer_direction(s1, K, params.m))) - 2.0;
}

double p3_eval(const Eigen::VectorXd& x, int s, const ProblemParams& params) {
  check_index(x, s, params);
  const int n = params.n, s1 = s + 1;
  const int K = (params.m + 2 * n - 1) / (2 * n);
  const int k = (s1 + 2 * n - 1) / (2 * n);
  const int ell = s1 - 2 * n * (k - 1);
  const int coord = (ell + 1) / 2 - 1;
  const double sign = (ell % 2 == 0) ? 1.0 : -1.0;

  auto alpha_t = [K](int j) { return 5.0 * j / K; };
  double beta = alpha_t(1) * alpha_t(1);
  for (int j = 2; j <= k; ++j) {
    const double a_prev = alpha_t(j - 1), a = alpha_t(j);
    beta += (a + a_prev) * (a + a_prev) - (2.0 * a_prev) * (2.0 * a_prev);
  }
  // <x - alpha v, v> with v = sign * e_coord and |v| = 1.
  const double inner = sign * x[coord] - alpha_t(k);
  return inner * inner - beta;
}

double p4_eval(const Eigen::VectorXd& x, int s, const ProblemParams& params) {
  check_index(x, s, params);
  const int L = *params.L, s1 = s + 1;
  const int K = params.m / L;
  const int k = (s1 + L - 1) / L;
  const int ell = s1 - L * (k - 1);
  const double radius = 5.0 * k / K;
  const double omega = 2.0 * std::numbers::pi / L;
  const std::array<double, 2> v{radius * std::cos(omega * ell), radius * std::sin(omega * ell)};
  double xv = 0.0, vv = 0.0;
  for (int i = 0; i < std::min(params.n, 2); ++i) {
    xv += x[i] * v[i];
    vv += v[i] * v[i];
  }
  return x.squaredNorm() + 2.0 * xv - vv + 5.0 / K;
}

double p5_eval(const Eigen::VectorXd& x, int s, const ProblemParams& params) {
  check_index(x, s, params);
  const double omega = 2.0 * s / (params.m - 1) - 1.0;
  return x.squaredNorm() + x[0] * omega - omega * omega;
}

WorstCaseProblem make_problem(const ProblemParams& params) {
  params.validate();
  if (params.family == Family::WellPlacement)
    throw std::invalid_argument("make_problem: well placement needs a GridStack; use make_well_placement_problem");

  using Eval = double (*)(const Eigen::VectorXd&, int, const ProblemParams&);
  Eval fn = nullptr;
  switch (params.family) {
    case Family::P1: fn = p1_eval; break;
    case Family::P2: fn = p2_eval; break;
    case Family::P3: fn = p3_eval; break;
    case Family::P4: fn = p4_eval; break;
    case Family::P5: fn = p5_eval; break;
    case Family::WellPlacement: break;
  }

  WorstCaseProblem problem;
  std::ostringstream name;
  name << to_string(params.family) << "(n=" << params.n << ",m=" << params.m;
  if (params.K) name << ",K=" << *params.K;
  if (params.L) name << ",L=" << *params.L;
  name << ")";
  problem.name = name.str();
  problem.n = params.n;
  problem.m = params.m;
  problem.evaluate = [fn, params](const Eigen::VectorXd& x, int s) { return fn(x, s, params); };
  problem.known_optimum = Eigen::VectorXd::Zero(params.n);

  FCallCounter scratch;
  problem.optimal_value = evaluate_full(problem, *problem.known_optimum, scratch).worst_value;
  return problem;
}

void GridStack::validate() const {
  if (m < 1 || rows < 1 || cols < 1) throw std::invalid_argument("GridStack: extents must be positive");
  if (static_cast<int>(layers.size()) != m) throw std::invalid_argument("GridStack: layer count != m");
  for (const auto& layer : layers) {
    if (layer.rows() != rows || layer.cols() != cols) throw std::invalid_argument("GridStack: layer has wrong shape");
    if (!layer.allFinite()) throw std::invalid_argument("GridStack: non-finite value");
    if ((layer.array() < 0.0).any()) throw std::invalid_argument("GridStack: negative value");
  }
}

bool GridStack::operator==(const GridStack& other) const {
  if (m != other.m || rows != other.rows || cols != other.cols || layers.size() != other.layers.size()) return false;
  for (std::size_t s = 0; s < layers.size(); ++s)
    if (layers[s] != other.layers[s]) return false;
  return true;
}

namespace {

// Lower node (1-based) and fractional offset along one axis.
std::pair<int, double> locate(double u, int extent) {
  if (extent == 1) return {1, 0.0};
  const int lo = std::min(static_cast<int>(std::floor(u)), extent - 1);
  return {lo, u - lo};
}

}  // namespace

double bilinear_interpolate(const Eigen::MatrixXd& layer, double u, double v) {
  const int rows = static_cast<int>(layer.rows()), cols = static_cast<int>(layer.cols());
  if (!(u >= 1.0 && u <= rows && v >= 1.0 && v <= cols))
    throw std::out_of_range("bilinear_interpolate: point outside [1, rows] x [1, cols]");
  const auto [i, t] = locate(u, rows);
  const auto [j, w] = locate(v, cols);
  const int i1 = std::min(i + 1, rows), j1 = std::min(j + 1, cols);
  // Convert to 0-based storage.
  const double g00 = layer(i - 1, j - 1), g10 = layer(i1 - 1, j - 1);
  const double g01 = layer(i - 1, j1 - 1), g11 = layer(i1 - 1, j1 - 1);
  return (1.0 - t) * (1.0 - w) * g00 + t * (1.0 - w) * g10 + (1.0 - t) * w * g01 + t * w * g11;
}

double well_placement_eval(const GridStack& grids, const Eigen::VectorXd& x, int s) {
  if (x.size() != 6) throw std::invalid_argument("well_placement_eval: x must have 6 coordinates");
  if (s < 0 || s >= grids.m) throw std::out_of_range("well_placement_eval: scenario out of range");
  const Eigen::MatrixXd& layer = grids.layers[s];

  std::array<Eigen::Vector2d, 3> wells;
  std::array<double, 3> volume{};
  for (int i = 0; i < 3; ++i) {
    wells[i] = Eigen::Vector2d(std::clamp(x[2 * i], 1.0, static_cast<double>(grids.rows)),
                               std::clamp(x[2 * i + 1], 1.0, static_cast<double>(grids.cols)));
    volume[i] = bilinear_interpolate(layer, wells[i][0], wells[i][1]);
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return volume[a] > volume[b]; });

  double total = 0.0;
  for (int i = 0; i < 3; ++i) {
    double interference = 1.0;
    for (int j = 0; j < i; ++j)
      interference *= 1.0 - std::exp(-(wells[order[i]] - wells[order[j]]).norm());
    total += volume[order[i]] * interference;
  }
  return total;
}

WorstCaseProblem make_well_placement_problem(std::shared_ptr<const GridStack> grids) {
  if (!grids) throw std::invalid_argument("make_well_placement_problem: null grid stack");
  grids->validate();
  WorstCaseProblem problem;
  problem.name = "well(m=" + std::to_string(grids->m) + "," + std::to_string(grids->rows) + "x" +
                 std::to_string(grids->cols) + ")";
  problem.n = 6;
  problem.m = grids->m;
  problem.sense = Sense::Maximize;
  Eigen::VectorXd lo(6), hi(6);
  for (int i = 0; i < 3; ++i) {
    lo.segment<2>(2 * i) << 1.0, 1.0;
    hi.segment<2>(2 * i) << grids->rows, grids->cols;
  }
  problem.domain = Box(lo, hi);
  problem.evaluate = [grids](const Eigen::VectorXd& x, int s) { return -well_placement_eval(*grids, x, s); };
  return problem;
}

GridStack generate_synthetic_grids(std::uint64_t seed, int m, int rows, int cols, int bump_count,
                                   double smoothness) {
  if (m < 1 || rows < 1 || cols < 1) throw std::invalid_argument("generate_synthetic_grids: bad extents");
  if (bump_count < 1 || !(smoothness > 0.0)) throw std::invalid_argument("generate_synthetic_grids: bad bump settings");
  RandomStream rng(seed);

  struct Bump {
    double u, v, amplitude, width;
  };
  // Macro-structure shared by all scenarios.
  std::vector<Bump> macro(bump_count);
  for (auto& b : macro) {
    b.u = rng.uniform(1.0, rows);
    b.v = rng.uniform(1.0, cols);
    b.amplitude = rng.uniform(0.4, 1.0);
    b.width = smoothness * rng.uniform(0.6, 1.6);
  }

  constexpr double base = 0.05;
  constexpr int weak_zones = 2;
  GridStack stack{m, rows, cols, {}};
  stack.layers.reserve(m);
  for (int s = 0; s < m; ++s) {
    // Per-scenario perturbation: bump amplitudes and positions jitter, and a
    // few low-injectivity zones are carved in multiplicatively.
    std::vector<Bump> local = macro;
    for (auto& b : local) {
      b.amplitude *= std::exp(0.3 * rng.normal());
      b.u += 0.15 * b.width * rng.normal();
      b.v += 0.15 * b.width * rng.normal();
    }
    std::array<Bump, weak_zones> weak{};
    for (auto& z : weak) {
      z.u = rng.uniform(1.0, rows);
      z.v = rng.uniform(1.0, cols);
      z.amplitude = rng.uniform(0.3, 0.7);
      z.width = smoothness * rng.uniform(1.0, 2.0);
    }

    Eigen::MatrixXd layer(rows, cols);
    for (int i = 1; i <= rows; ++i) {
      for (int j = 1; j <= cols; ++j) {
        double value = base;
        for (const auto& b : local) {
          const double d2 = (i - b.u) * (i - b.u) + (j - b.v) * (j - b.v);
          value += b.amplitude * std::exp(-d2 / (2.0 * b.width * b.width));
        }
        for (const auto& z : weak) {
          const double d2 = (i - z.u) * (i - z.u) + (j - z.v) * (j - z.v);
          value *= 1.0 - z.amplitude * std::exp(-d2 / (2.0 * z.width * z.width));
        }
        layer(i - 1, j - 1) = value;
      }
    }
    stack.layers.push_back(std::move(layer));
  }
  return stack;
}

namespace {

[[noreturn]] void malformed(const std::filesystem::path& path, const std::string& why) {
  throw std::runtime_error("grid file " + path.string() + ": " + why);
}

}  // namespace

GridStack load_grids(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("grid file " + path.string() + ": cannot open");

  std::string header;
  if (!std::getline(in, header)) malformed(path, "missing header");
  std::istringstream hs(header);
  long long m = 0, rows = 0, cols = 0;
  std::string extra;
  if (!(hs >> m >> rows >> cols) || (hs >> extra)) malformed(path, "header must be 'm rows cols'");
  if (m < 1 || rows < 1 || cols < 1) malformed(path, "header extents must be positive");

  const long long expected = m * rows * cols;
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(expected));
  std::string token;
  while (in >> token) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size()) malformed(path, "cannot parse value '" + token + "'");
    if (!std::isfinite(v)) malformed(path, "non-finite value '" + token + "'");
    values.push_back(v);
  }
  if (static_cast<long long>(values.size()) != expected)
    malformed(path, "expected " + std::to_string(expected) + " values, found " + std::to_string(values.size()));

  GridStack stack{static_cast<int>(m), static_cast<int>(rows), static_cast<int>(cols), {}};
  std::size_t k = 0;
  for (int s = 0; s < stack.m; ++s) {
    Eigen::MatrixXd layer(stack.rows, stack.cols);
    for (int i = 0; i < stack.rows; ++i)
      for (int j = 0; j < stack.cols; ++j) layer(i, j) = values[k++];
    stack.layers.push_back(std::move(layer));
  }
  return stack;
}

void save_grids(const GridStack& stack, const std::filesystem::path& path) {
  stack.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("grid file " + path.string() + ": cannot open for writing");
  out << stack.m << ' ' << stack.rows << ' ' << stack.cols << '\n';
  std::array<char, 64> buf{};
  for (int s = 0; s < stack.m; ++s) {
    if (s > 0) out << '\n';
    for (int i = 0; i < stack.rows; ++i) {
      for (int j = 0; j < stack.cols; ++j) {
        const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), stack.layers[s](i, j));
        if (j > 0) out << ' ';
        out.write(buf.data(), res.ptr - buf.data());
      }
      out << '\n';
    }
  }
  if (!out) throw std::runtime_error("grid file " + path.string() + ": write failed");
}

}  // namespace as3cma

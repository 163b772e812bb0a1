#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "as3cma/config.hpp"
#include "as3cma/harness.hpp"
#include "as3cma/problems.hpp"
#include "as3cma/trace_io.hpp"
#include "as3cma/worstcase.hpp"

using namespace as3cma;

namespace {

// Flags shared by run, sweep and oracle. Command-line values override the file.
struct CommonOptions {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<double> budget;
  std::optional<std::string> algo;
  std::optional<std::string> problem;
  std::optional<int> jobs;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_path, "key = value config file")->check(CLI::ExistingFile);
    app->add_option("-s,--set", sets, "override one key, e.g. --set m=50 (repeatable)");
    app->add_option("--seed", seed, "base seed");
    app->add_option("--trials", trials, "number of trials");
    app->add_option("--budget", budget, "f-call budget per trial");
    app->add_option("--algo", algo, "baseline | as3 | as3-fixed");
    app->add_option("--problem", problem, "p1 .. p5 | well");
    app->add_option("-j,--jobs", jobs, "worker threads (0 = all cores)");
  }

  ExperimentConfig build(bool validate = true) const {
    ExperimentConfig c;
    if (!config_path.empty()) load_config_file(c, config_path);
    for (const auto& s : sets) apply_assignment(c, s);
    if (seed) c.seed_base = *seed;
    if (trials) c.trials = *trials;
    if (budget) c.budget_fcalls = static_cast<long long>(*budget);
    if (algo) apply_setting(c, "algo", *algo);
    if (problem) apply_setting(c, "problem", *problem);
    if (jobs) c.jobs = *jobs == 0 ? static_cast<int>(std::max(1u, std::thread::hardware_concurrency())) : *jobs;
    if (c.problem.family == Family::WellPlacement) c.problem.n = 6;
    if (!validate) return c;
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    return c;
  }
};

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(10);
  out << v;
  return out.str();
}

std::string opt(const std::optional<double>& v) { return v ? fmt(*v) : ""; }

void print_trials(const ExperimentResult& r, std::ostream& out) {
  out << "trial,seed,outcome,fcalls,fcalls_imputed,restarts,best_value,final_sum_p,final_subset_size,hit_ratio,"
         "excess_ratio\n";
  for (const auto& t : r.trials)
    out << t.trial << ',' << t.seed << ',' << to_string(t.outcome) << ',' << t.fcalls << ',' << t.fcalls_imputed << ','
        << t.restarts << ',' << fmt(t.best_value) << ',' << fmt(t.final_sum_p) << ',' << t.final_subset_size << ','
        << opt(t.hit_ratio) << ',' << opt(t.excess_ratio) << '\n';
}

const char* kAggregateHeader =
    "successes,trials,fcalls_median,fcalls_q25,fcalls_q75,fcalls_mean_imputed,restarts_median,best_median,"
    "sum_p_median";

std::string aggregate_row(const ExperimentResult& r) {
  const auto f = r.fcalls_quartiles();
  std::ostringstream out;
  out << r.successes() << ',' << r.trials.size() << ',' << fmt(f.median) << ',' << fmt(f.q25) << ',' << fmt(f.q75)
      << ',' << fmt(r.mean_fcalls_imputed()) << ',' << fmt(r.restarts_quartiles().median) << ','
      << fmt(r.best_value_quartiles().median) << ',' << fmt(r.final_sum_p_quartiles().median);
  return out.str();
}

int cmd_run(const CommonOptions& common, const std::string& out_path) {
  const ExperimentConfig config = common.build();
  const auto result = run_experiment(config);
  if (!out_path.empty()) export_traces(result.traces, trace_format_from_path(out_path), out_path);
  std::cout << "# " << result.problem_name << " algo=" << to_string(config.algorithm) << " budget=" << result.budget
            << '\n';
  print_trials(result, std::cout);
  std::cout << "# " << kAggregateHeader << "\n# " << aggregate_row(result) << '\n';
  return 0;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_sweep(const CommonOptions& common, const std::string& param, const std::string& values,
              const std::string& out_path) {
  const ExperimentConfig base = common.build(false);
  const auto list = split(values, ',');
  if (list.empty()) throw ConfigError("--values is empty");

  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw std::runtime_error("cannot open " + out_path + " for writing");
  }
  std::ostream& out = out_path.empty() ? std::cout : file;
  out << param << ",algo,problem," << kAggregateHeader << '\n';
  for (const auto& v : list) {
    ExperimentConfig c = base;
    apply_setting(c, param, v);
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(param + "=" + v + ": " + e.what());
    }
    const auto r = run_experiment(c);
    out << v << ',' << to_string(c.algorithm) << ",\"" << r.problem_name << "\"," << aggregate_row(r) << '\n';
    out.flush();
  }
  return 0;
}

int cmd_oracle(const CommonOptions& common, const std::vector<double>& radii, int samples, const std::string& at) {
  const ExperimentConfig config = common.build();
  const WorstCaseProblem problem = build_problem(config);
  Eigen::VectorXd center;
  if (!at.empty()) {
    const auto parts = split(at, ',');
    if (static_cast<int>(parts.size()) != problem.n)
      throw ConfigError("--at needs " + std::to_string(problem.n) + " comma-separated values");
    center.resize(problem.n);
    for (int i = 0; i < problem.n; ++i) center[i] = std::stod(parts[i]);
  } else if (problem.known_optimum) {
    center = *problem.known_optimum;
  } else {
    throw ConfigError(problem.name + " has no known optimum; pass --at");
  }

  FCallCounter diagnostic;
  const auto rec = evaluate_full(problem, center, diagnostic);
  std::cout << "# " << problem.name << " F(center) = " << fmt(problem.natural_value(rec.worst_value)) << '\n';
  std::cout << "radius,samples,support_size,support\n";
  RandomStream rng = RandomStream::derive(config.seed_base, "oracle");
  for (double r : radii) {
    const auto support = support_oracle(problem, ball_sampler(center, r, rng), samples, diagnostic);
    std::cout << fmt(r) << ',' << samples << ',' << support.size() << ",\"";
    for (std::size_t i = 0; i < support.size(); ++i) std::cout << (i ? " " : "") << support[i] + 1;
    std::cout << "\"\n";
  }
  std::cout << "scenario,value\n";
  for (int s = 0; s < problem.m; ++s) std::cout << s + 1 << ',' << fmt(problem.natural_value(rec.values[s])) << '\n';
  return 0;
}

int cmd_gridgen(std::uint64_t seed, int m, int rows, int cols, int bumps, double smoothness, const std::string& out) {
  const auto stack = generate_synthetic_grids(seed, m, rows, cols, bumps, smoothness);
  save_grids(stack, out);
  std::cout << "wrote " << m << " layers of " << rows << "x" << cols << " to " << out << '\n';
  return 0;
}

int cmd_stats(const std::vector<std::string>& files, std::optional<double> budget, const std::string& out_path) {
  struct Sample {
    std::string file;
    std::vector<double> fcalls;
    int successes = 0;
  };
  std::vector<Sample> samples;
  for (const auto& f : files) {
    Sample s{f, {}, 0};
    for (const auto& row : final_rows(read_trace_rows(f))) {
      const bool ok = row.outcome == "success";
      s.successes += ok;
      s.fcalls.push_back(!ok && budget ? *budget : static_cast<double>(row.fcalls));
    }
    if (s.fcalls.empty()) throw std::runtime_error(f + ": no trials in trace");
    samples.push_back(std::move(s));
  }

  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw std::runtime_error("cannot open " + out_path + " for writing");
  }
  std::ostream& out = out_path.empty() ? std::cout : file;
  out << "file,trials,successes,fcalls_median,fcalls_q25,fcalls_q75,u_vs_first,p_vs_first,exact\n";
  for (const auto& s : samples) {
    const auto q = median_iqr(s.fcalls);
    out << '"' << s.file << "\"," << s.fcalls.size() << ',' << s.successes << ',' << fmt(q.median) << ','
        << fmt(q.q25) << ',' << fmt(q.q75) << ',';
    if (&s == &samples.front()) {
      out << ",,\n";
    } else {
      const auto mw = mann_whitney_u(s.fcalls, samples.front().fcalls);
      out << fmt(mw.u) << ',' << fmt(mw.p_value) << ',' << (mw.exact ? "true" : "false") << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Worst-case CMA-ES with adaptive scenario subsets"};
  app.require_subcommand(1);

  CommonOptions run_opts, sweep_opts, oracle_opts;
  std::string run_out, sweep_out, sweep_param, sweep_values;

  auto* run = app.add_subcommand("run", "run a batch of trials and print per-trial results");
  run_opts.attach(run);
  run->add_option("-o,--out", run_out, "trace file (.csv or .jsonl)");

  auto* sweep = app.add_subcommand("sweep", "repeat a batch while varying one config key");
  sweep_opts.attach(sweep);
  sweep->add_option("--param", sweep_param, "config key to vary, e.g. m, K, as3.eta")->required();
  sweep->add_option("--values", sweep_values, "comma-separated values")->required();
  sweep->add_option("-o,--out", sweep_out, "CSV output (default stdout)");

  std::vector<double> radii{1e-1, 1e-3, 1e-6};
  int oracle_samples = 1000;
  std::string oracle_at;
  auto* oracle = app.add_subcommand("oracle", "support scenarios around a point (default: the known optimum)");
  oracle_opts.attach(oracle);
  oracle->add_option("--radius", radii, "ball radii")->delimiter(',');
  oracle->add_option("--samples", oracle_samples, "points per radius")->check(CLI::PositiveNumber);
  oracle->add_option("--at", oracle_at, "comma-separated centre point");

  std::uint64_t grid_seed = 1;
  int grid_m = 50, grid_rows = 50, grid_cols = 50, grid_bumps = 12;
  double grid_smooth = 6.0;
  std::string grid_out;
  auto* gridgen = app.add_subcommand("gridgen", "write a synthetic injectability grid stack");
  gridgen->add_option("--seed", grid_seed, "generator seed");
  gridgen->add_option("-m,--scenarios", grid_m, "number of scenarios");
  gridgen->add_option("--rows", grid_rows, "grid rows");
  gridgen->add_option("--cols", grid_cols, "grid columns");
  gridgen->add_option("--bumps", grid_bumps, "number of high-injectivity bumps");
  gridgen->add_option("--smoothness", grid_smooth, "bump width scale in grid cells");
  gridgen->add_option("-o,--out", grid_out, "output file")->required();

  std::vector<std::string> stats_files;
  std::optional<double> stats_budget;
  std::string stats_out;
  auto* stats = app.add_subcommand("stats", "median/IQR and Mann-Whitney tables from trace files");
  stats->add_option("traces", stats_files, "trace files; the first is the reference")->required()->check(
      CLI::ExistingFile);
  stats->add_option("--budget", stats_budget, "impute failed trials at this f-call count");
  stats->add_option("-o,--out", stats_out, "CSV output (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_opts, run_out);
    if (sweep->parsed()) return cmd_sweep(sweep_opts, sweep_param, sweep_values, sweep_out);
    if (oracle->parsed()) return cmd_oracle(oracle_opts, radii, oracle_samples, oracle_at);
    if (gridgen->parsed())
      return cmd_gridgen(grid_seed, grid_m, grid_rows, grid_cols, grid_bumps, grid_smooth, grid_out);
    if (stats->parsed()) return cmd_stats(stats_files, stats_budget, stats_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

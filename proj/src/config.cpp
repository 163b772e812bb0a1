#include "as3cma/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace as3cma {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse(const std::string& key, const std::string& value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty())
    throw ConfigError("bad value '" + value + "' for key '" + key + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("bad boolean '" + value + "' for key '" + key + "'");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"algo", [](auto& c, auto&, auto& v) { c.algorithm = algorithm_from_string(v); }},
      {"problem", [](auto& c, auto&, auto& v) { c.problem.family = family_from_string(v); }},
      {"n", [](auto& c, auto& k, auto& v) { c.problem.n = parse<int>(k, v); }},
      {"m", [](auto& c, auto& k, auto& v) { c.problem.m = parse<int>(k, v); }},
      {"K", [](auto& c, auto& k, auto& v) { c.problem.K = parse<int>(k, v); }},
      {"L", [](auto& c, auto& k, auto& v) { c.problem.L = parse<int>(k, v); }},
      {"trials", [](auto& c, auto& k, auto& v) { c.trials = parse<int>(k, v); }},
      {"seed", [](auto& c, auto& k, auto& v) { c.seed_base = parse<std::uint64_t>(k, v); }},
      {"budget", [](auto& c, auto& k, auto& v) { c.budget_fcalls = static_cast<long long>(parse<double>(k, v)); }},
      {"jobs", [](auto& c, auto& k, auto& v) { c.jobs = parse<int>(k, v); }},
      {"restart", [](auto& c, auto&, auto& v) { c.restart = restart_policy_from_string(v); }},
      {"init.lo", [](auto& c, auto& k, auto& v) { c.init_lo = parse<double>(k, v); }},
      {"init.hi", [](auto& c, auto& k, auto& v) { c.init_hi = parse<double>(k, v); }},
      {"sigma0", [](auto& c, auto& k, auto& v) { c.sigma0 = parse<double>(k, v); }},
      {"lambda_x", [](auto& c, auto& k, auto& v) { c.lambda_x = parse<int>(k, v); }},
      {"as3.c_p", [](auto& c, auto& k, auto& v) { c.as3.c_p = parse<double>(k, v); }},
      {"as3.eta", [](auto& c, auto& k, auto& v) { c.as3.eta = parse<double>(k, v); }},
      {"as3.gamma", [](auto& c, auto& k, auto& v) { c.as3.gamma = parse<double>(k, v); }},
      {"as3.epsilon", [](auto& c, auto& k, auto& v) { c.as3.epsilon = parse<double>(k, v); }},
      {"as3.p0", [](auto& c, auto& k, auto& v) { c.as3.p0 = parse<double>(k, v); }},
      {"as3.lambda_s", [](auto& c, auto& k, auto& v) { c.as3.lambda_s = parse<int>(k, v); }},
      {"term.gap", [](auto& c, auto& k, auto& v) { c.thresholds.gap = parse<double>(k, v); }},
      {"term.sigma_min", [](auto& c, auto& k, auto& v) { c.thresholds.sigma_min = parse<double>(k, v); }},
      {"term.cond_max", [](auto& c, auto& k, auto& v) { c.thresholds.cond_max = parse<double>(k, v); }},
      {"coord_std", [](auto& c, auto& k, auto& v) { c.coord_std = parse<double>(k, v); }},
      {"record_tau", [](auto& c, auto& k, auto& v) { c.record_tau = parse_bool(k, v); }},
      {"support.samples", [](auto& c, auto& k, auto& v) { c.support_samples = parse<int>(k, v); }},
      {"support.radius", [](auto& c, auto& k, auto& v) { c.support_radius = parse<double>(k, v); }},
      {"grid", [](auto& c, auto&, auto& v) { c.grid.path = v; }},
      {"grid.seed", [](auto& c, auto& k, auto& v) { c.grid.seed = parse<std::uint64_t>(k, v); }},
      {"grid.rows", [](auto& c, auto& k, auto& v) { c.grid.rows = parse<int>(k, v); }},
      {"grid.cols", [](auto& c, auto& k, auto& v) { c.grid.cols = parse<int>(k, v); }},
      {"grid.bumps", [](auto& c, auto& k, auto& v) { c.grid.bump_count = parse<int>(k, v); }},
      {"grid.smoothness", [](auto& c, auto& k, auto& v) { c.grid.smoothness = parse<double>(k, v); }},
  };
  return table;
}

}  // namespace

void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
  try {
    it->second(config, key, value);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(e.what()));
  }
}

void apply_assignment(ExperimentConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  apply_setting(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text,
                                                                   const std::string& origin) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    out.emplace_back(key, trim(t.substr(eq + 1)));
  }
  return out;
}

void load_config_file(ExperimentConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  for (const auto& [key, value] : parse_config_text(buffer.str(), path.string())) {
    try {
      apply_setting(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
}

std::string describe(const ExperimentConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "algo = " << to_string(c.algorithm) << '\n';
  out << "problem = " << to_string(c.problem.family) << '\n';
  out << "n = " << c.problem.n << '\n' << "m = " << c.problem.m << '\n';
  if (c.problem.K) out << "K = " << *c.problem.K << '\n';
  if (c.problem.L) out << "L = " << *c.problem.L << '\n';
  out << "trials = " << c.trials << '\n' << "seed = " << c.seed_base << '\n';
  if (c.budget_fcalls) out << "budget = " << *c.budget_fcalls << '\n';
  out << "jobs = " << c.jobs << '\n';
  if (c.restart) out << "restart = " << to_string(*c.restart) << '\n';
  if (c.init_lo) out << "init.lo = " << *c.init_lo << '\n' << "init.hi = " << *c.init_hi << '\n';
  if (c.sigma0) out << "sigma0 = " << *c.sigma0 << '\n';
  if (c.lambda_x) out << "lambda_x = " << *c.lambda_x << '\n';
  out << "as3.c_p = " << c.as3.c_p << '\n' << "as3.eta = " << c.as3.eta << '\n';
  out << "as3.gamma = " << c.as3.gamma << '\n';
  if (c.as3.epsilon) out << "as3.epsilon = " << *c.as3.epsilon << '\n';
  if (c.as3.p0) out << "as3.p0 = " << *c.as3.p0 << '\n';
  if (c.as3.lambda_s) out << "as3.lambda_s = " << *c.as3.lambda_s << '\n';
  out << "term.gap = " << c.thresholds.gap << '\n' << "term.sigma_min = " << c.thresholds.sigma_min << '\n';
  out << "term.cond_max = " << c.thresholds.cond_max << '\n' << "coord_std = " << c.coord_std << '\n';
  out << "record_tau = " << (c.record_tau ? "true" : "false") << '\n';
  out << "support.samples = " << c.support_samples << '\n' << "support.radius = " << c.support_radius << '\n';
  if (c.problem.family == Family::WellPlacement) {
    if (c.grid.path) out << "grid = " << c.grid.path->string() << '\n';
    out << "grid.seed = " << c.grid.seed << '\n' << "grid.rows = " << c.grid.rows << '\n';
    out << "grid.cols = " << c.grid.cols << '\n' << "grid.bumps = " << c.grid.bump_count << '\n';
    out << "grid.smoothness = " << c.grid.smoothness << '\n';
  }
  return out.str();
}

}  // namespace as3cma

#pragma once

// Flat key=value experiment configuration. Blank lines and lines starting
// with '#' are ignored. Keys:
//
//   algo = baseline | as3 | as3-fixed       problem = p1 .. p5 | well
//   n, m, K, L                              trials, seed, budget, jobs
//   restart = none | simple | double        init.lo, init.hi, sigma0, lambda_x
//   as3.c_p, as3.eta, as3.gamma, as3.epsilon, as3.p0, as3.lambda_s
//   term.gap, term.sigma_min, term.cond_max, coord_std
//   record_tau = true | false               support.samples, support.radius
//   grid = <path>                           grid.seed, grid.rows, grid.cols,
//                                           grid.bumps, grid.smoothness

#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "as3cma/harness.hpp"

namespace as3cma {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sets one key. Throws ConfigError for unknown keys or unparsable values.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

/// "key=value" as given on a command line.
void apply_assignment(ExperimentConfig& config, const std::string& assignment);

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text,
                                                                   const std::string& origin = "<text>");

/// Applies every setting in the file on top of `config`.
void load_config_file(ExperimentConfig& config, const std::filesystem::path& path);

/// The config as key=value lines that load back to the same settings.
std::string describe(const ExperimentConfig& config);

}  // namespace as3cma

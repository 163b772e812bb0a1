#pragma once

// Per-iteration trace export. Both formats start with a version comment line
// and carry the same fields: trial, iteration, fcalls, F_mt, sum_p,
// subset_size, tau, restarts, outcome. F_mt and tau may be missing (empty
// CSV cell, JSON null). outcome is "running" except on a trial's last row.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "as3cma/harness.hpp"

namespace as3cma {

inline constexpr const char* kTraceHeader = "# as3cma-trace v1";

enum class TraceFormat { Csv, Jsonl };

/// .csv or .jsonl; anything else throws.
TraceFormat trace_format_from_path(const std::filesystem::path& path);

struct TraceRow {
  int trial = 0;
  long iteration = 0;
  long long fcalls = 0;
  std::optional<double> F_mt;
  double sum_p = 0.0;
  int subset_size = 0;
  std::optional<double> tau;
  int restarts = 0;
  std::string outcome;

  bool operator==(const TraceRow&) const = default;
};

/// Rows of every trace; the trial number is the position in `traces`.
std::vector<TraceRow> flatten(const std::vector<RunTrace>& traces);

void write_trace_rows(const std::vector<TraceRow>& rows, TraceFormat format, const std::filesystem::path& path);
void export_traces(const std::vector<RunTrace>& traces, TraceFormat format, const std::filesystem::path& path);

/// Reads either format; the format is taken from the extension.
std::vector<TraceRow> read_trace_rows(const std::filesystem::path& path);

/// Final row of each trial, ordered by trial number.
std::vector<TraceRow> final_rows(const std::vector<TraceRow>& rows);

}  // namespace as3cma

#include "as3cma/trace_io.hpp"

#include <json.hpp>

#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace as3cma {

namespace {

constexpr std::array<const char*, 9> kColumns{"trial", "iteration", "fcalls", "F_mt", "sum_p",
                                              "subset_size", "tau", "restarts", "outcome"};

std::runtime_error io_error(const std::filesystem::path& path, const std::string& what) {
  return std::runtime_error("trace " + path.string() + ": " + what);
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

template <typename T>
T parse_number(const std::string& text, const std::filesystem::path& path, int line) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw io_error(path, "line " + std::to_string(line) + ": bad number '" + text + "'");
  return value;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

TraceFormat trace_format_from_path(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".csv") return TraceFormat::Csv;
  if (ext == ".jsonl") return TraceFormat::Jsonl;
  throw std::invalid_argument("trace path " + path.string() + " must end in .csv or .jsonl");
}

std::vector<TraceRow> flatten(const std::vector<RunTrace>& traces) {
  std::vector<TraceRow> rows;
  for (std::size_t t = 0; t < traces.size(); ++t) {
    const RunTrace& trace = traces[t];
    for (std::size_t i = 0; i < trace.records.size(); ++i) {
      const IterationRecord& r = trace.records[i];
      const bool last = i + 1 == trace.records.size();
      rows.push_back({static_cast<int>(t), r.iteration, r.fcalls, r.F_full, r.sum_p, r.subset_size, r.tau,
                      r.restarts, last ? to_string(trace.status.outcome) : to_string(Outcome::Running)});
    }
  }
  return rows;
}

void write_trace_rows(const std::vector<TraceRow>& rows, TraceFormat format, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error(path, "cannot open for writing");
  out << kTraceHeader << '\n';
  if (format == TraceFormat::Csv) {
    for (std::size_t c = 0; c < kColumns.size(); ++c) out << (c ? "," : "") << kColumns[c];
    out << '\n';
    for (const TraceRow& r : rows) {
      out << r.trial << ',' << r.iteration << ',' << r.fcalls << ',' << (r.F_mt ? format_double(*r.F_mt) : "")
          << ',' << format_double(r.sum_p) << ',' << r.subset_size << ',' << (r.tau ? format_double(*r.tau) : "")
          << ',' << r.restarts << ',' << r.outcome << '\n';
    }
  } else {
    for (const TraceRow& r : rows) {
      nlohmann::ordered_json j;
      j["trial"] = r.trial;
      j["iteration"] = r.iteration;
      j["fcalls"] = r.fcalls;
      j["F_mt"] = r.F_mt ? nlohmann::ordered_json(*r.F_mt) : nlohmann::ordered_json(nullptr);
      j["sum_p"] = r.sum_p;
      j["subset_size"] = r.subset_size;
      j["tau"] = r.tau ? nlohmann::ordered_json(*r.tau) : nlohmann::ordered_json(nullptr);
      j["restarts"] = r.restarts;
      j["outcome"] = r.outcome;
      out << j.dump() << '\n';
    }
  }
  if (!out) throw io_error(path, "write failed");
}

void export_traces(const std::vector<RunTrace>& traces, TraceFormat format, const std::filesystem::path& path) {
  write_trace_rows(flatten(traces), format, path);
}

std::vector<TraceRow> read_trace_rows(const std::filesystem::path& path) {
  const TraceFormat format = trace_format_from_path(path);
  std::ifstream in(path);
  if (!in) throw io_error(path, "cannot open");
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) throw io_error(path, "missing '" + std::string(kTraceHeader) + "' header");

  std::vector<TraceRow> rows;
  int line_no = 1;
  if (format == TraceFormat::Csv) {
    ++line_no;
    if (!std::getline(in, line)) throw io_error(path, "missing column line");
    const auto names = split_csv(line);
    if (names.size() != kColumns.size()) throw io_error(path, "unexpected column line '" + line + "'");
    for (std::size_t c = 0; c < kColumns.size(); ++c)
      if (names[c] != kColumns[c]) throw io_error(path, "unexpected column '" + names[c] + "'");
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto cells = split_csv(line);
      if (cells.size() != kColumns.size())
        throw io_error(path, "line " + std::to_string(line_no) + ": expected 9 fields");
      TraceRow r;
      r.trial = parse_number<int>(cells[0], path, line_no);
      r.iteration = parse_number<long>(cells[1], path, line_no);
      r.fcalls = parse_number<long long>(cells[2], path, line_no);
      if (!cells[3].empty()) r.F_mt = parse_number<double>(cells[3], path, line_no);
      r.sum_p = parse_number<double>(cells[4], path, line_no);
      r.subset_size = parse_number<int>(cells[5], path, line_no);
      if (!cells[6].empty()) r.tau = parse_number<double>(cells[6], path, line_no);
      r.restarts = parse_number<int>(cells[7], path, line_no);
      r.outcome = cells[8];
      rows.push_back(std::move(r));
    }
    return rows;
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TraceRow r;
      r.trial = j.at("trial").get<int>();
      r.iteration = j.at("iteration").get<long>();
      r.fcalls = j.at("fcalls").get<long long>();
      if (!j.at("F_mt").is_null()) r.F_mt = j.at("F_mt").get<double>();
      r.sum_p = j.at("sum_p").get<double>();
      r.subset_size = j.at("subset_size").get<int>();
      if (!j.at("tau").is_null()) r.tau = j.at("tau").get<double>();
      r.restarts = j.at("restarts").get<int>();
      r.outcome = j.at("outcome").get<std::string>();
      rows.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw io_error(path, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

std::vector<TraceRow> final_rows(const std::vector<TraceRow>& rows) {
  std::map<int, TraceRow> last;
  for (const TraceRow& r : rows) last[r.trial] = r;
  std::vector<TraceRow> out;
  for (auto& [trial, row] : last) out.push_back(row);
  return out;
}

}  // namespace as3cma

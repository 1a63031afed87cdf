#include "collusion/formats.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace collusion {
namespace {

using nlohmann::json;

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double ParseDouble(const std::string& text, const std::string& column) {
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw SchemaMismatch("summary column " + column + " is not a number: '" +
                         text + "'");
  }
  return value;
}

std::int64_t ParseInt(const std::string& text, const std::string& column) {
  char* end = nullptr;
  const long long value = std::strtoll(text.c_str(), &end, 10);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw SchemaMismatch("summary column " + column + " is not an integer: '" +
                         text + "'");
  }
  return value;
}

template <class T>
void AppendArray(std::string& out, const std::vector<T>& values) {
  out += '[';
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    if constexpr (std::is_same_v<T, double>) {
      out += FormatDouble(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  out += ']';
}

Termination ParseTermination(const std::string& name) {
  if (name == "converged") return Termination::kConverged;
  if (name == "horizon") return Termination::kHorizon;
  throw SchemaMismatch("unknown termination '" + name + "'");
}

}  // namespace

std::string FormatDouble(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

void WriteTraceJsonl(std::ostream& out, const Trace& trace) {
  out << "{\"schema\":\"" << kTraceSchema << "\",\"version\":" << kTraceVersion
      << ",\"firms\":" << trace.num_firms() << ",\"stages\":" << trace.size()
      << ",\"termination\":\"" << TerminationName(trace.termination)
      << "\"}\n";
  std::string line;
  for (std::int64_t k = 0; k < trace.size(); ++k) {
    const StageRecord r = trace.record(k);
    line.clear();
    line += "{\"t\":" + std::to_string(r.t) + ",\"actions\":";
    AppendArray(line, r.actions);
    line += ",\"prices\":";
    AppendArray(line, r.prices);
    line += ",\"profits_true\":";
    AppendArray(line, r.profits_true);
    line += ",\"profits_observed\":";
    AppendArray(line, r.profits_observed);
    line += "}\n";
    out << line;
  }
}

Trace ReadTraceJsonl(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaMismatch("trace file is empty");
  const json header = json::parse(line);
  const std::string schema = header.value("schema", "");
  const int version = header.value("version", -1);
  if (schema != kTraceSchema || version != kTraceVersion) {
    throw SchemaMismatch("trace schema " + schema + " v" +
                         std::to_string(version) + " does not match " +
                         kTraceSchema + " v" + std::to_string(kTraceVersion));
  }
  Trace trace(header.at("firms").get<int>());
  const std::int64_t stages = header.at("stages").get<std::int64_t>();
  StageRecord r;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json row = json::parse(line);
    r.t = row.at("t").get<std::int64_t>();
    r.actions = row.at("actions").get<std::vector<int>>();
    r.prices = row.at("prices").get<std::vector<double>>();
    r.profits_true = row.at("profits_true").get<std::vector<double>>();
    r.profits_observed = row.at("profits_observed").get<std::vector<double>>();
    trace.Append(r);
  }
  if (trace.size() != stages) {
    throw SchemaMismatch("trace header announces " + std::to_string(stages) +
                         " stages, file holds " + std::to_string(trace.size()));
  }
  trace.termination = ParseTermination(header.at("termination"));
  return trace;
}

void WriteSummaryCsv(std::ostream& out, const MetricsSummary& summary) {
  const std::size_t n = summary.p_bar.size();
  const bool has_delta = !summary.delta.empty();
  out << "schema_version,seed,stages,termination,converged_at";
  for (std::size_t i = 0; i < n; ++i) out << ",p_bar_" << i;
  for (std::size_t i = 0; i < n; ++i) out << ",delta_" << i;
  out << ",delta_mean";
  for (std::size_t i = 0; i < n; ++i) out << ",regret_final_" << i;
  out << ",clamped_rewards\n";

  out << kSummaryVersion << ',' << summary.seed << ',' << summary.stages << ','
      << TerminationName(summary.termination) << ',';
  if (summary.converged_at) out << *summary.converged_at;
  for (double p : summary.p_bar) out << ',' << FormatDouble(p);
  for (std::size_t i = 0; i < n; ++i) {
    out << ',';
    if (has_delta) out << FormatDouble(summary.delta[i]);
  }
  out << ',';
  if (has_delta) out << FormatDouble(summary.delta_mean);
  for (double r : summary.regret_final) out << ',' << FormatDouble(r);
  out << ',' << summary.clamped_rewards << '\n';
}

MetricsSummary ReadSummaryCsv(std::istream& in) {
  std::string header_line, row_line;
  if (!std::getline(in, header_line) || !std::getline(in, row_line)) {
    throw SchemaMismatch("summary file needs a header and one row");
  }
  const std::vector<std::string> header = SplitCsvLine(header_line);
  const std::vector<std::string> row = SplitCsvLine(row_line);
  if (header.empty() || header[0] != "schema_version" ||
      row.size() != header.size()) {
    throw SchemaMismatch("summary file is malformed");
  }
  const std::int64_t version = ParseInt(row[0], "schema_version");
  if (version != kSummaryVersion) {
    throw SchemaMismatch("summary schema v" + std::to_string(version) +
                         " does not match v" +
                         std::to_string(kSummaryVersion));
  }
  // Fixed columns: 5 leading, delta_mean, clamped_rewards; 3 per firm.
  if ((header.size() - 7) % 3 != 0) {
    throw SchemaMismatch("summary file has an unexpected column count");
  }
  const std::size_t n = (header.size() - 7) / 3;
  MetricsSummary s;
  s.seed = static_cast<std::uint64_t>(std::strtoull(row[1].c_str(), nullptr, 10));
  s.stages = ParseInt(row[2], "stages");
  s.termination = ParseTermination(row[3]);
  if (!row[4].empty()) s.converged_at = ParseInt(row[4], "converged_at");
  std::size_t c = 5;
  for (std::size_t i = 0; i < n; ++i, ++c) {
    s.p_bar.push_back(ParseDouble(row[c], header[c]));
  }
  const bool has_delta = !row[c].empty();
  for (std::size_t i = 0; i < n; ++i, ++c) {
    if (has_delta) s.delta.push_back(ParseDouble(row[c], header[c]));
  }
  if (has_delta) s.delta_mean = ParseDouble(row[c], header[c]);
  ++c;
  for (std::size_t i = 0; i < n; ++i, ++c) {
    s.regret_final.push_back(ParseDouble(row[c], header[c]));
  }
  s.clamped_rewards = ParseInt(row[c], header[c]);
  return s;
}

void WriteRegretCsv(std::ostream& out,
                    const std::vector<RegretSeries>& series) {
  out << "checkpoint";
  for (std::size_t i = 0; i < series.size(); ++i) out << ",regret_" << i;
  out << '\n';
  if (series.empty()) return;
  for (std::size_t k = 0; k < series[0].checkpoints.size(); ++k) {
    out << series[0].checkpoints[k];
    for (const RegretSeries& s : series) out << ',' << FormatDouble(s.regret[k]);
    out << '\n';
  }
}

void WriteProbeCsv(std::ostream& out, const ProbeResult& probe) {
  const std::size_t n = probe.pre_deviation_actions.size();
  out << "probe_stage";
  for (std::size_t i = 0; i < n; ++i) out << ",action_" << i;
  for (std::size_t i = 0; i < n; ++i) out << ",price_" << i;
  out << '\n';
  auto row = [&](std::size_t stage, const std::vector<int>& actions,
                 const std::vector<double>& prices) {
    out << stage;
    for (int a : actions) out << ',' << a;
    for (double p : prices) out << ',' << FormatDouble(p);
    out << '\n';
  };
  row(0, probe.pre_deviation_actions, probe.pre_deviation_prices);
  for (std::size_t k = 0; k < probe.actions.size(); ++k) {
    row(k + 1, probe.actions[k], probe.prices[k]);
  }
}

void WriteFileAtomic(const std::string& path,
                     const std::function<void(std::ostream&)>& write) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) {
    std::filesystem::create_directories(target.parent_path());
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    write(out);
    if (!out.flush()) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, target);
}

void WriteFileAtomic(const std::string& path, const std::string& contents) {
  WriteFileAtomic(path, [&](std::ostream& out) { out << contents; });
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace collusion

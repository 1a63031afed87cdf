#ifndef COLLUSION_EXPERIMENT_H_
#define COLLUSION_EXPERIMENT_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "collusion/agents.h"
#include "collusion/equilibrium.h"
#include "collusion/market.h"
#include "collusion/simulation.h"
#include "json.hpp"

namespace collusion {

using Json = nlohmann::json;

enum class GridBounds { kEquilibria, kInterval };
enum class Retention { kAll, kSummariesOnly, kEveryK };

struct GridSpec {
  int points = 15;
  GridBounds bounds = GridBounds::kEquilibria;
  double xi = 0.1;
};

struct SweepAxis {
  // Dotted path into the resolved config. A non-numeric segment applied to
  // a list addresses every element ("agents.alpha").
  std::string param;
  std::vector<Json> values;
};

struct ExperimentConfig {
  // Every key with its default filled in; parsing this reproduces the config.
  Json resolved;

  std::string name;
  std::uint64_t cell_index = 0;
  // Exactly one of market / matrix is set.
  std::optional<MarketGame> market;
  std::optional<DiscreteGame> matrix;
  GridSpec grid;
  std::vector<AgentSpec> agents;
  std::int64_t horizon = 0;
  std::int64_t convergence_window = 0;
  std::int64_t tail_window = 0;
  double noise_sigma = 0.0;
  std::vector<std::uint64_t> seeds;
  std::vector<SweepAxis> sweep;
  std::string out_dir;
  Retention retention = Retention::kAll;
  int every_k = 1;
};

// Unknown keys and out-of-range values throw InvalidInput naming the key.
// Agents may be omitted only when require_agents is false.
ExperimentConfig ParseConfig(const Json& config, bool require_agents = true);
ExperimentConfig LoadConfig(const std::string& path,
                            bool require_agents = true);

// Sets a dotted path in a JSON document (see SweepAxis).
void SetPath(Json& doc, const std::string& path, const Json& value);

const char* RetentionName(Retention retention);

struct Cell {
  int index = 0;
  std::vector<std::pair<std::string, Json>> assignment;
  ExperimentConfig config;  // sweep removed, cell_index set
};

// Cartesian product of the sweep axes, first axis slowest. A config without
// a sweep is one cell that keeps its own cell_index.
std::vector<Cell> ExpandSweep(const ExperimentConfig& config);

struct PreparedGame {
  StageGame stage;
  // Empty for matrix games.
  Benchmarks benchmarks;
  bool has_benchmarks = false;
};

// Benchmarks, grid bounds and the payoff table. Throws std::runtime_error
// when a benchmark solver fails to converge.
PreparedGame PrepareGame(const ExperimentConfig& config);

// Per-run generator seed: MixSeed(seed_value, cell_index).
std::uint64_t RunSeed(const ExperimentConfig& config, std::uint64_t seed_value);

SimConfig MakeSimConfig(const ExperimentConfig& config,
                        const PreparedGame& game, std::uint64_t seed_value);

// Config that reproduces one run on its own.
Json RunConfig(const ExperimentConfig& cell_config, std::uint64_t seed_value);

struct RunRecord {
  int cell = 0;
  std::uint64_t seed = 0;
  std::string dir;
  MetricsSummary summary;
  bool reused = false;
  bool has_trace = false;
};

struct Stat {
  int count = 0;
  std::optional<double> mean;
  std::optional<double> sd;  // sample standard deviation, count >= 2
};

Stat Describe(const std::vector<double>& values);

struct CellReport {
  int cell = 0;
  std::vector<std::pair<std::string, Json>> assignment;
  int runs = 0;
  int converged = 0;
  std::optional<double> mean_convergence_stage;
  Stat delta_all;
  Stat delta_converged;
  std::vector<double> nash;
  std::vector<double> monopoly;
};

struct ExperimentReport {
  std::string dir;
  std::vector<CellReport> cells;
  std::vector<RunRecord> runs;  // cell-major, then seed order
  int computed = 0;
  int reused = 0;
};

struct RunOptions {
  int workers = 1;
  std::ostream* log = nullptr;
};

// Runs every (cell, seed) pair, persisting artifacts under
// <out_dir>/<name>/cell-<k>/seed-<s>/. Runs whose summary already exists are
// loaded instead of recomputed. Any failed run makes the whole call throw
// after the others finish; no report is written in that case.
ExperimentReport RunExperiment(const ExperimentConfig& config,
                               const RunOptions& options = {});

std::string ExperimentDir(const ExperimentConfig& config);
std::string RunDir(const ExperimentConfig& cell_config,
                   std::uint64_t seed_value);

void WriteReportCsv(std::ostream& out, const ExperimentReport& report);
std::string FormatReportTable(const ExperimentReport& report);

struct RunAnalysis {
  std::string dir;
  MetricsSummary persisted;
  bool has_trace = false;
  // Only meaningful with a trace.
  bool summary_matches = false;
  std::optional<double> cce_violation;
  double payoff_range = 0.0;
  std::vector<RegretSeries> regret;
};

// Every run directory under path (or path itself), in sorted order. When a
// trace is present, metrics are recomputed and compared with the summary.
std::vector<RunAnalysis> AnalyzeArtifacts(const std::string& path,
                                          double tail_fraction = 0.5);

// Runs one episode of a single-cell config and probes it.
ProbeResult RunProbe(const ExperimentConfig& config, std::uint64_t seed_value,
                     int length);

}  // namespace collusion

#endif  // COLLUSION_EXPERIMENT_H_

// Command-line entry point: solve, simulate, sweep, analyze, probe.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "collusion/equilibrium.h"
#include "collusion/experiment.h"
#include "collusion/formats.h"

namespace {

namespace fs = std::filesystem;
using collusion::Json;

struct CommonFlags {
  std::string config;
  std::string out;
  int workers = 0;
  std::optional<std::uint64_t> seed;
  std::string retention;
};

void AddCommon(CLI::App* cmd, CommonFlags& flags, bool needs_config = true) {
  auto* c = cmd->add_option("--config", flags.config, "experiment config (JSON)");
  if (needs_config) c->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", flags.out,
                  "output root (default: output.dir, then $COLLUSION_OUT, then runs)");
  cmd->add_option("--workers", flags.workers,
                  "parallel runs (default: hardware threads)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--seed", flags.seed, "run only this seed value");
  cmd->add_option("--retention", flags.retention,
                  "trace retention: all | summaries-only | every-k");
}

collusion::ExperimentConfig Load(const CommonFlags& flags,
                                 bool require_agents = true) {
  Json doc;
  try {
    doc = Json::parse(collusion::ReadFile(flags.config));
  } catch (const Json::parse_error& e) {
    throw collusion::InvalidInput("cannot parse " + flags.config + ": " + e.what());
  }
  if (!doc.is_object()) throw collusion::InvalidInput("config must be an object");
  if (!flags.out.empty()) doc["output"]["dir"] = flags.out;
  if (!flags.retention.empty()) doc["output"]["retention"] = flags.retention;
  if (flags.seed) doc["seeds"] = Json::array({*flags.seed});
  return collusion::ParseConfig(doc, require_agents);
}

int Workers(const CommonFlags& flags) {
  if (flags.workers > 0) return flags.workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string Fmt(double x) { return collusion::FormatDouble(x); }

int Solve(const CommonFlags& flags, int discrete_check, bool diagnostics) {
  using namespace collusion;
  const ExperimentConfig cfg = Load(flags, /*require_agents=*/false);
  if (cfg.matrix) {
    const DiscreteGame& g = *cfg.matrix;
    const auto equilibria = BruteForceDiscreteNash(g);
    std::cout << "matrix game, " << g.num_players() << " players, "
              << g.num_profiles() << " profiles\n";
    std::cout << "pure Nash equilibria: " << equilibria.size() << '\n';
    for (const auto& eq : equilibria) {
      std::cout << " ";
      for (int a : eq) std::cout << ' ' << a;
      std::cout << '\n';
    }
    if (diagnostics) {
      const PotentialCheck pc = CheckExactPotential(g);
      std::cout << "exact potential: " << (pc.is_potential ? "yes" : "no")
                << " (max four-cycle defect " << Fmt(pc.max_defect) << ")\n";
    }
    return 0;
  }

  const MarketGame& game = *cfg.market;
  const Benchmarks b = ComputeBenchmarks(game);
  std::cout << "model " << cfg.resolved["game"]["model"].get<std::string>()
            << ", firms " << game.num_firms() << ", interval ["
            << Fmt(game.interval().lo) << ", " << Fmt(game.interval().hi)
            << "]\n";
  std::printf("%-5s %-24s %-24s\n", "firm", "nash", "monopoly");
  for (int i = 0; i < game.num_firms(); ++i) {
    std::printf("%-5d %-24s %-24s\n", i, Fmt(b.nash[i]).c_str(),
                Fmt(b.monopoly[i]).c_str());
  }
  std::cout << "nash residual " << Fmt(b.nash_residual)
            << ", monopoly residual " << Fmt(b.monopoly_residual)
            << ", converged " << (b.converged ? "yes" : "no") << '\n';
  if (game.is_logit()) {
    double foc = 0.0;
    for (int i = 0; i < game.num_firms(); ++i) {
      foc = std::max(foc, LogitNashFocResidual(game, b.nash, i));
    }
    std::cout << "first-order residuals: nash " << Fmt(foc) << ", monopoly "
              << Fmt(LogitMonopolyFocResidual(game, b.monopoly)) << '\n';
  }

  if (discrete_check > 0) {
    const ActionGrid grid =
        MakeGrid(game.interval().lo, game.interval().hi, discrete_check);
    const auto equilibria = BruteForceDiscreteNash(Discretize(game, grid));
    std::vector<std::vector<int>> kept;
    for (const auto& eq : equilibria) {
      if (PricesAtOrAboveCost(game, grid, eq)) kept.push_back(eq);
    }
    double worst = 0.0;
    for (const auto& eq : kept) {
      for (int i = 0; i < game.num_firms(); ++i) {
        worst = std::max(worst, std::abs(grid[eq[i]] - b.nash[i]) / grid.step());
      }
    }
    std::cout << "discrete check on " << discrete_check << " points: "
              << equilibria.size() << " pure equilibria, " << kept.size()
              << " with every price at or above cost; farthest is "
              << Fmt(worst) << " grid steps from the solver ("
              << (!kept.empty() && worst <= 1.0 + 1e-9 ? "agrees within one step"
                                                       : "DISAGREES")
              << ")\n";
    if (kept.empty() || worst > 1.0 + 1e-9) return 1;
  }

  if (diagnostics) {
    const PreparedGame prepared = PrepareGame(cfg);
    const DiscreteGame& table = prepared.stage.table();
    const PotentialCheck pc = CheckExactPotential(table);
    std::cout << "exact potential on the " << cfg.grid.points
              << "-point grid: " << (pc.is_potential ? "yes" : "no")
              << " (max four-cycle defect " << Fmt(pc.max_defect) << ")\n";
    if (game.is_differentiable()) {
      Rng rng(0);
      const MonotonicityCheck mc = CheckMonotonicity(game, 1000, rng);
      std::cout << "monotonicity on " << mc.pairs << " sampled pairs: "
                << (mc.monotone_on_sample ? "no violation" : "violated")
                << " (min normalized inner product "
                << Fmt(mc.min_normalized) << ")\n";
    }
  }
  return 0;
}

int RunAll(const CommonFlags& flags, bool allow_sweep) {
  using namespace collusion;
  const ExperimentConfig cfg = Load(flags);
  if (!allow_sweep && !cfg.sweep.empty()) {
    throw InvalidInput("config has a sweep; use the sweep subcommand");
  }
  RunOptions options;
  options.workers = Workers(flags);
  options.log = &std::cerr;
  const ExperimentReport report = RunExperiment(cfg, options);
  std::cout << FormatReportTable(report);
  return 0;
}

int Analyze(const std::string& path, double tail_fraction) {
  using namespace collusion;
  const std::vector<RunAnalysis> runs = AnalyzeArtifacts(path, tail_fraction);
  bool all_match = true;
  int summaries_only = 0;
  std::ostringstream table;
  table << "run_dir,seed,termination,stages,delta_mean,has_trace,"
           "summary_matches,cce_violation,payoff_range\n";
  std::printf("%-48s %-10s %-10s %-12s %-8s %s\n", "run", "end", "stages",
              "delta_mean", "match", "cce violation");
  for (const RunAnalysis& a : runs) {
    const MetricsSummary& s = a.persisted;
    const std::string delta = s.delta.empty() ? "" : FormatDouble(s.delta_mean);
    const std::string cce = a.cce_violation ? FormatDouble(*a.cce_violation) : "";
    table << a.dir << ',' << s.seed << ',' << TerminationName(s.termination)
          << ',' << s.stages << ',' << delta << ','
          << (a.has_trace ? "yes" : "no") << ','
          << (a.has_trace ? (a.summary_matches ? "yes" : "no") : "") << ','
          << cce << ',' << (a.has_trace ? FormatDouble(a.payoff_range) : "")
          << '\n';
    std::printf("%-48s %-10s %-10lld %-12s %-8s %s\n", a.dir.c_str(),
                TerminationName(s.termination), static_cast<long long>(s.stages),
                s.delta.empty() ? "-" : Fmt(s.delta_mean).substr(0, 10).c_str(),
                a.has_trace ? (a.summary_matches ? "yes" : "NO") : "-",
                a.cce_violation ? Fmt(*a.cce_violation).c_str() : "-");
    if (a.has_trace) {
      all_match = all_match && a.summary_matches;
      if (!a.regret.empty()) {
        WriteFileAtomic((fs::path(a.dir) / "regret.csv").string(),
                        [&](std::ostream& out) { WriteRegretCsv(out, a.regret); });
      }
    } else {
      ++summaries_only;
    }
  }
  const fs::path root = fs::is_directory(path) ? fs::path(path) : fs::path(path).parent_path();
  WriteFileAtomic((root / "analysis.csv").string(), table.str());
  if (summaries_only > 0) {
    std::cout << "notice: " << summaries_only
              << " run(s) kept summaries only; regret curves and CCE checks "
                 "need traces\n";
  }
  std::cout << "wrote " << (root / "analysis.csv").string() << '\n';
  if (!all_match) {
    std::cerr << "error: a summary recomputed from its trace differs from the "
                 "persisted summary\n";
    return 1;
  }
  return 0;
}

int Probe(const CommonFlags& flags, int length) {
  using namespace collusion;
  const ExperimentConfig cfg = Load(flags);
  const std::uint64_t seed = cfg.seeds.front();
  const ProbeResult probe = RunProbe(cfg, seed, length);
  std::ostringstream csv;
  WriteProbeCsv(csv, probe);
  const std::string path =
      (fs::path(ExperimentDir(cfg)) / ("probe-seed-" + std::to_string(seed) + ".csv"))
          .string();
  WriteFileAtomic(path, csv.str());
  std::cout << csv.str() << "wrote " << path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Repeated pricing games with learning agents"};
  app.require_subcommand(1);

  CommonFlags solve_flags, sim_flags, sweep_flags, probe_flags, analyze_flags;
  int discrete_check = 0;
  bool diagnostics = false;
  auto* solve = app.add_subcommand("solve", "print Nash and monopoly benchmarks");
  AddCommon(solve, solve_flags);
  solve->add_option("--discrete-check", discrete_check,
                    "cross-check against brute-force discrete Nash on m points")
      ->check(CLI::Range(2, 100000));
  solve->add_flag("--diagnostics", diagnostics,
                  "potential and monotonicity diagnostics");

  auto* simulate = app.add_subcommand("simulate", "run every seed of one config");
  AddCommon(simulate, sim_flags);
  auto* sweep = app.add_subcommand("sweep", "run a parameter sweep");
  AddCommon(sweep, sweep_flags);

  std::string analyze_path;
  double tail_fraction = 0.5;
  auto* analyze = app.add_subcommand("analyze", "recompute and export metrics");
  analyze->add_option("path", analyze_path,
                      "experiment, cell or run directory (or use --config)");
  AddCommon(analyze, analyze_flags, /*needs_config=*/false);
  analyze->add_option("--tail-fraction", tail_fraction,
                      "tail share of stages used for the CCE check")
      ->check(CLI::Range(0.0, 1.0));

  int length = 10;
  auto* probe = app.add_subcommand("probe", "deviation probe of a converged run");
  AddCommon(probe, probe_flags);
  probe->add_option("--length", length, "probe stages")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) return Solve(solve_flags, discrete_check, diagnostics);
    if (*simulate) return RunAll(sim_flags, /*allow_sweep=*/false);
    if (*sweep) return RunAll(sweep_flags, /*allow_sweep=*/true);
    if (*probe) return Probe(probe_flags, length);
    if (*analyze) {
      std::string path = analyze_path;
      if (path.empty()) {
        if (analyze_flags.config.empty()) {
          throw collusion::InvalidInput("analyze needs a path or --config");
        }
        path = collusion::ExperimentDir(Load(analyze_flags));
      }
      return Analyze(path, tail_fraction);
    }
  } catch (const collusion::InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

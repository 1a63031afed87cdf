#ifndef COLLUSION_SIMULATION_H_
#define COLLUSION_SIMULATION_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "collusion/agents.h"
#include "collusion/equilibrium.h"
#include "collusion/market.h"

namespace collusion {

// What the engine plays each stage: a payoff table over grid indices plus
// the price each index stands for. Market games are tabulated once through
// Payoff(), so table lookups reproduce Payoff() bit for bit.
class StageGame {
 public:
  StageGame(const MarketGame& game, const ActionGrid& grid,
            std::int64_t profile_cap = kDefaultProfileCap);
  // Plain matrix game; action values are the action indices.
  explicit StageGame(DiscreteGame table);

  int num_players() const { return table_->num_players(); }
  int num_actions(int player) const { return table_->num_actions(player); }
  double action_value(int player, int action) const {
    return values_[player][action];
  }
  const DiscreteGame& table() const { return *table_; }
  // Null for plain matrix games.
  const MarketGame* market() const { return market_.get(); }
  const ActionGrid* grid() const { return market_ ? &grid_ : nullptr; }

 private:
  std::shared_ptr<const DiscreteGame> table_;
  std::vector<std::vector<double>> values_;
  std::shared_ptr<const MarketGame> market_;
  ActionGrid grid_;
};

struct SimConfig {
  StageGame stage;
  std::vector<AgentSpec> agents;
  std::int64_t horizon = 0;
  std::int64_t convergence_window = 100000;
  // 0 selects min(10^4, max(1, horizon / 10)).
  std::int64_t tail_window = 0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

void ValidateSimConfig(const SimConfig& cfg);
std::int64_t EffectiveTailWindow(const SimConfig& cfg);

struct StageRecord {
  std::int64_t t = 0;
  std::vector<int> actions;
  std::vector<double> prices;
  std::vector<double> profits_true;
  std::vector<double> profits_observed;
};

enum class Termination { kConverged, kHorizon };
const char* TerminationName(Termination reason);

// Stage records stored column-wise; record(k) materializes one row.
class Trace {
 public:
  explicit Trace(int num_firms = 0) : n_(num_firms) {}

  int num_firms() const { return n_; }
  std::int64_t size() const { return stages_; }
  bool empty() const { return stages_ == 0; }

  // Stage indices must be contiguous from 1.
  void Append(const StageRecord& record);
  StageRecord record(std::int64_t k) const;

  int action(std::int64_t k, int firm) const { return actions_[k * n_ + firm]; }
  double price(std::int64_t k, int firm) const { return prices_[k * n_ + firm]; }
  double profit_true(std::int64_t k, int firm) const {
    return profits_true_[k * n_ + firm];
  }
  double profit_observed(std::int64_t k, int firm) const {
    return profits_observed_[k * n_ + firm];
  }
  std::span<const int> actions(std::int64_t k) const {
    return {actions_.data() + k * n_, static_cast<std::size_t>(n_)};
  }

  Termination termination = Termination::kHorizon;

  friend bool operator==(const Trace&, const Trace&) = default;

 private:
  int n_ = 0;
  std::int64_t stages_ = 0;
  std::vector<int> actions_;
  std::vector<double> prices_;
  std::vector<double> profits_true_;
  std::vector<double> profits_observed_;
};

// Independent generator streams per firm, so that the order in which agents
// are evaluated within a stage cannot change any draw.
class StageStreams {
 public:
  StageStreams(std::uint64_t seed, int num_firms);
  Rng& agent(int firm) { return agent_[firm]; }
  double Gaussian(int firm) { return gauss_[firm](noise_[firm]); }
  Rng& init() { return init_; }

 private:
  std::vector<Rng> agent_;
  std::vector<Rng> noise_;
  std::vector<std::normal_distribution<double>> gauss_;
  Rng init_;
};

// One simultaneous stage. Every agent selects against last_actions; the
// payoff is evaluated once; each agent learns from its own observed profit.
// order permutes agent evaluation (identity when empty). Returns true if any
// agent's greedy policy changed.
bool RunStage(const StageGame& stage, std::span<const AgentSpec> specs,
              std::span<AgentState> states, std::span<const int> last_actions,
              std::int64_t t, StageStreams& streams, double noise_sigma,
              StageRecord& out, std::span<const int> order = {});

struct RegretSeries {
  std::vector<std::int64_t> checkpoints;
  std::vector<double> regret;
  double final_value() const { return regret.empty() ? 0.0 : regret.back(); }
};

// Running hindsight regret of one firm against the true payoff table.
// Checkpoints at powers of two plus the final stage.
class RegretTracker {
 public:
  RegretTracker(const DiscreteGame& table, int firm);
  void Add(std::span<const int> actions, double realized_profit);
  RegretSeries Finish() const;
  double realized_total() const { return realized_; }

 private:
  double Current() const;

  const DiscreteGame* table_;
  int firm_;
  std::int64_t t_ = 0;
  std::vector<double> fixed_totals_;
  double realized_ = 0.0;
  RegretSeries series_;
};

struct EpisodeOptions {
  bool record_trace = true;
};

struct EpisodeResult {
  Trace trace;
  std::vector<AgentState> final_states;
  std::vector<int> initial_actions;
  std::vector<int> last_actions;
  std::int64_t stages = 0;
  Termination termination = Termination::kHorizon;
  std::optional<std::int64_t> converged_at;
  std::vector<double> tail_prices;
  std::vector<RegretSeries> regret;
  std::int64_t clamped_rewards = 0;
};

EpisodeResult SimulateEpisode(const SimConfig& cfg,
                              const EpisodeOptions& options = {});
Trace RunEpisode(const SimConfig& cfg);

RegretSeries ComputeRegret(const Trace& trace, const StageGame& stage,
                           int firm);

// Mean price per firm over the last min(window, size) stages.
std::vector<double> TailAveragePrices(const Trace& trace,
                                      std::int64_t window);

// (p_bar - pN) / (pM - pN), unclamped.
double CollusionIndex(double p_bar, double nash, double monopoly);

struct MetricsSummary {
  std::uint64_t seed = 0;
  std::int64_t stages = 0;
  Termination termination = Termination::kHorizon;
  std::optional<std::int64_t> converged_at;
  std::vector<double> p_bar;
  std::vector<double> delta;
  double delta_mean = 0.0;
  std::vector<double> regret_final;
  std::int64_t clamped_rewards = 0;

  friend bool operator==(const MetricsSummary&,
                         const MetricsSummary&) = default;
};

MetricsSummary Summarize(const EpisodeResult& result,
                         const Benchmarks& benchmarks, std::uint64_t seed);

// Same metrics recomputed from a stored trace.
MetricsSummary SummarizeTrace(const Trace& trace, const StageGame& stage,
                              std::int64_t tail_window,
                              const Benchmarks& benchmarks,
                              std::uint64_t seed,
                              std::int64_t clamped_rewards = 0);

struct ProbeResult {
  std::vector<int> pre_deviation_actions;
  std::vector<double> pre_deviation_prices;
  int deviation_action = 0;
  // length x num_firms
  std::vector<std::vector<int>> actions;
  std::vector<std::vector<double>> prices;
};

// Greedy continuation of a converged episode in which firm 0 deviates once
// to its static best response at probe stage 1. Policies are frozen.
ProbeResult DeviationProbe(const EpisodeResult& result, const SimConfig& cfg,
                           int length);

// Frequencies of joint action profiles over the last tail_fraction of stages.
JointDistribution EmpiricalJointDistribution(const Trace& trace,
                                             const DiscreteGame& table,
                                             double tail_fraction);

}  // namespace collusion

#endif  // COLLUSION_SIMULATION_H_

#include "collusion/simulation.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace collusion {
namespace {

bool IsPowerOfTwo(std::int64_t t) { return t > 0 && (t & (t - 1)) == 0; }

void CheckSpecsMatchStage(std::span<const AgentSpec> specs,
                          std::span<AgentState> states,
                          const StageGame& stage) {
  Require(static_cast<int>(specs.size()) == stage.num_players() &&
              specs.size() == states.size(),
          "agent count must equal the number of firms");
}

}  // namespace

StageGame::StageGame(const MarketGame& game, const ActionGrid& grid,
                     std::int64_t profile_cap)
    : table_(std::make_shared<const DiscreteGame>(
          Discretize(game, grid, profile_cap))),
      values_(game.num_firms(), grid.points()),
      market_(std::make_shared<const MarketGame>(game)),
      grid_(grid) {}

StageGame::StageGame(DiscreteGame table)
    : table_(std::make_shared<const DiscreteGame>(std::move(table))) {
  values_.resize(table_->num_players());
  for (int i = 0; i < table_->num_players(); ++i) {
    values_[i].resize(table_->num_actions(i));
    std::iota(values_[i].begin(), values_[i].end(), 0.0);
  }
}

void ValidateSimConfig(const SimConfig& cfg) {
  Require(static_cast<int>(cfg.agents.size()) == cfg.stage.num_players(),
          "agents length (" + std::to_string(cfg.agents.size()) +
              ") must equal the firm count (" +
              std::to_string(cfg.stage.num_players()) + ")");
  for (const AgentSpec& spec : cfg.agents) {
    ValidateAgentSpec(spec);
    if (std::holds_alternative<GradientAscentSpec>(spec)) {
      throw UnsupportedModel(
          "gradient agents run through RunGradientDynamics, not the grid "
          "engine");
    }
  }
  Require(cfg.horizon >= 0, "horizon must be >= 0");
  Require(cfg.convergence_window >= 1, "convergence_window must be >= 1");
  Require(cfg.horizon == 0 || cfg.convergence_window <= cfg.horizon,
          "convergence_window must be <= horizon");
  Require(cfg.tail_window >= 0, "tail_window must be >= 0");
  Require(cfg.noise_sigma >= 0.0 && std::isfinite(cfg.noise_sigma),
          "noise_sigma must be >= 0");
}

std::int64_t EffectiveTailWindow(const SimConfig& cfg) {
  if (cfg.tail_window > 0) return cfg.tail_window;
  return std::min<std::int64_t>(10000, std::max<std::int64_t>(1, cfg.horizon / 10));
}

const char* TerminationName(Termination reason) {
  return reason == Termination::kConverged ? "converged" : "horizon";
}

void Trace::Append(const StageRecord& record) {
  Require(record.t == stages_ + 1, "stage indices must be contiguous from 1");
  Require(static_cast<int>(record.actions.size()) == n_ &&
              static_cast<int>(record.prices.size()) == n_ &&
              static_cast<int>(record.profits_true.size()) == n_ &&
              static_cast<int>(record.profits_observed.size()) == n_,
          "stage record width must equal the firm count");
  actions_.insert(actions_.end(), record.actions.begin(), record.actions.end());
  prices_.insert(prices_.end(), record.prices.begin(), record.prices.end());
  profits_true_.insert(profits_true_.end(), record.profits_true.begin(),
                       record.profits_true.end());
  profits_observed_.insert(profits_observed_.end(),
                           record.profits_observed.begin(),
                           record.profits_observed.end());
  ++stages_;
}

StageRecord Trace::record(std::int64_t k) const {
  Require(k >= 0 && k < stages_, "stage index out of range");
  StageRecord r;
  r.t = k + 1;
  const auto begin = k * n_, end = (k + 1) * n_;
  r.actions.assign(actions_.begin() + begin, actions_.begin() + end);
  r.prices.assign(prices_.begin() + begin, prices_.begin() + end);
  r.profits_true.assign(profits_true_.begin() + begin,
                        profits_true_.begin() + end);
  r.profits_observed.assign(profits_observed_.begin() + begin,
                            profits_observed_.begin() + end);
  return r;
}

StageStreams::StageStreams(std::uint64_t seed, int num_firms)
    : gauss_(num_firms), init_(MixSeed(seed, 3)) {
  for (int i = 0; i < num_firms; ++i) {
    agent_.emplace_back(MixSeed(seed, 1, i));
    noise_.emplace_back(MixSeed(seed, 2, i));
  }
}

bool RunStage(const StageGame& stage, std::span<const AgentSpec> specs,
              std::span<AgentState> states, std::span<const int> last_actions,
              std::int64_t t, StageStreams& streams, double noise_sigma,
              StageRecord& out, std::span<const int> order) {
  CheckSpecsMatchStage(specs, states, stage);
  const DiscreteGame& table = stage.table();
  const int n = stage.num_players();
  out.t = t;
  out.actions.resize(n);
  out.prices.resize(n);
  out.profits_true.resize(n);
  out.profits_observed.resize(n);

  thread_local std::vector<int> identity;
  if (order.empty()) {
    identity.resize(n);
    std::iota(identity.begin(), identity.end(), 0);
    order = identity;
  }
  thread_local std::vector<int> env;
  env.resize(n);

  // Selection sees only last stage's joint actions.
  for (int i : order) {
    env[i] = StateIndex(specs[i], table, i, last_actions);
    out.actions[i] = SelectAction(specs[i], states[i], env[i], t,
                                  streams.agent(i));
  }
  const std::int64_t flat = table.Flatten(out.actions);
  for (int i = 0; i < n; ++i) {
    out.prices[i] = stage.action_value(i, out.actions[i]);
    out.profits_true[i] = table.payoff(flat, i);
  }

  bool changed = false;
  thread_local std::vector<double> cf_profits;
  thread_local std::vector<int> cf_states;
  thread_local std::vector<int> cf_actions;
  for (int i : order) {
    double observed = out.profits_true[i];
    if (noise_sigma > 0.0) observed += noise_sigma * streams.Gaussian(i);
    out.profits_observed[i] = observed;

    Observation obs;
    obs.state = env[i];
    obs.action = out.actions[i];
    obs.profit = observed;
    obs.next_state = StateIndex(specs[i], table, i, out.actions);
    obs.t = t;
    const auto* q = std::get_if<QLearningSpec>(&specs[i]);
    if (q != nullptr && q->update_mode == UpdateMode::kSynchronous) {
      const int m = table.num_actions(i);
      const std::int64_t base = flat - out.actions[i] * table.stride(i);
      cf_profits.resize(m);
      cf_states.resize(m);
      cf_actions.assign(out.actions.begin(), out.actions.end());
      for (int a = 0; a < m; ++a) {
        cf_profits[a] = table.payoff(base + a * table.stride(i), i);
        cf_actions[i] = a;
        cf_states[a] = StateIndex(specs[i], table, i, cf_actions);
      }
      obs.counterfactual_profits = cf_profits;
      obs.counterfactual_next_states = cf_states;
    }
    if (Update(specs[i], states[i], obs)) changed = true;
  }
  return changed;
}

RegretTracker::RegretTracker(const DiscreteGame& table, int firm)
    : table_(&table), firm_(firm), fixed_totals_(table.num_actions(firm), 0.0) {}

void RegretTracker::Add(std::span<const int> actions, double realized_profit) {
  const std::int64_t stride = table_->stride(firm_);
  const std::int64_t base =
      table_->Flatten(actions) - actions[firm_] * stride;
  for (std::size_t a = 0; a < fixed_totals_.size(); ++a) {
    fixed_totals_[a] += table_->payoff(base + a * stride, firm_);
  }
  realized_ += realized_profit;
  ++t_;
  if (IsPowerOfTwo(t_)) {
    series_.checkpoints.push_back(t_);
    series_.regret.push_back(Current());
  }
}

double RegretTracker::Current() const {
  return *std::max_element(fixed_totals_.begin(), fixed_totals_.end()) -
         realized_;
}

RegretSeries RegretTracker::Finish() const {
  RegretSeries out = series_;
  if (t_ > 0 && !IsPowerOfTwo(t_)) {
    out.checkpoints.push_back(t_);
    out.regret.push_back(Current());
  }
  return out;
}

EpisodeResult SimulateEpisode(const SimConfig& cfg,
                              const EpisodeOptions& options) {
  ValidateSimConfig(cfg);
  const StageGame& stage = cfg.stage;
  const DiscreteGame& table = stage.table();
  const int n = stage.num_players();

  EpisodeResult result;
  result.trace = Trace(n);
  result.final_states.reserve(n);
  for (int i = 0; i < n; ++i) {
    result.final_states.push_back(
        InitAgent(cfg.agents[i], table, i, cfg.horizon));
  }
  StageStreams streams(cfg.seed, n);
  result.initial_actions.resize(n);
  for (int i = 0; i < n; ++i) {
    result.initial_actions[i] = UniformIndex(streams.init(), table.num_actions(i));
  }
  std::vector<int> last = result.initial_actions;

  std::vector<RegretTracker> trackers;
  for (int i = 0; i < n; ++i) trackers.emplace_back(table, i);

  const std::int64_t tail = EffectiveTailWindow(cfg);
  const std::int64_t ring_size = std::min(tail, std::max<std::int64_t>(cfg.horizon, 1));
  std::vector<double> ring(static_cast<std::size_t>(ring_size) * n, 0.0);

  StageRecord record;
  std::int64_t stable = 0;
  std::int64_t t = 0;
  while (t < cfg.horizon) {
    ++t;
    const bool changed =
        RunStage(stage, cfg.agents, result.final_states, last, t, streams,
                 cfg.noise_sigma, record);
    for (int i = 0; i < n; ++i) {
      trackers[i].Add(record.actions, record.profits_true[i]);
      ring[((t - 1) % ring_size) * n + i] = record.prices[i];
    }
    if (options.record_trace) result.trace.Append(record);
    last = record.actions;
    stable = changed ? 0 : stable + 1;
    if (stable >= cfg.convergence_window) {
      result.termination = Termination::kConverged;
      result.converged_at = t;
      break;
    }
  }
  result.stages = t;
  result.trace.termination = result.termination;
  result.last_actions = last;

  // Chronological sum over the tail, matching TailAveragePrices.
  const std::int64_t used = std::min(ring_size, t);
  result.tail_prices.assign(n, 0.0);
  if (used > 0) {
    for (int i = 0; i < n; ++i) {
      double sum = 0.0;
      for (std::int64_t s = t - used + 1; s <= t; ++s) {
        sum += ring[((s - 1) % ring_size) * n + i];
      }
      result.tail_prices[i] = sum / static_cast<double>(used);
    }
  }
  for (int i = 0; i < n; ++i) {
    result.regret.push_back(trackers[i].Finish());
    result.clamped_rewards += ClampedRewards(result.final_states[i]);
  }
  return result;
}

Trace RunEpisode(const SimConfig& cfg) { return SimulateEpisode(cfg).trace; }

RegretSeries ComputeRegret(const Trace& trace, const StageGame& stage,
                           int firm) {
  Require(!trace.empty(), "regret needs a nonempty trace");
  Require(firm >= 0 && firm < stage.num_players(), "firm index out of range");
  RegretTracker tracker(stage.table(), firm);
  for (std::int64_t k = 0; k < trace.size(); ++k) {
    tracker.Add(trace.actions(k), trace.profit_true(k, firm));
  }
  return tracker.Finish();
}

std::vector<double> TailAveragePrices(const Trace& trace,
                                      std::int64_t window) {
  const int n = trace.num_firms();
  const std::int64_t used = std::min(window, trace.size());
  std::vector<double> out(n, 0.0);
  if (used <= 0) return out;
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::int64_t k = trace.size() - used; k < trace.size(); ++k) {
      sum += trace.price(k, i);
    }
    out[i] = sum / static_cast<double>(used);
  }
  return out;
}

double CollusionIndex(double p_bar, double nash, double monopoly) {
  if (monopoly == nash) {
    throw UndefinedBenchmark(
        "collusion index undefined: monopoly price equals Nash price");
  }
  return (p_bar - nash) / (monopoly - nash);
}

namespace {

void FillDeltas(MetricsSummary& summary, const Benchmarks& benchmarks) {
  summary.delta.clear();
  summary.delta_mean = 0.0;
  if (benchmarks.nash.empty()) return;
  const std::size_t n = summary.p_bar.size();
  Require(benchmarks.nash.size() == n && benchmarks.monopoly.size() == n,
          "benchmark width must equal the firm count");
  for (std::size_t i = 0; i < n; ++i) {
    summary.delta.push_back(CollusionIndex(
        summary.p_bar[i], benchmarks.nash[i], benchmarks.monopoly[i]));
  }
  double sum = 0.0;
  for (double d : summary.delta) sum += d;
  summary.delta_mean = sum / static_cast<double>(n);
}

}  // namespace

MetricsSummary Summarize(const EpisodeResult& result,
                         const Benchmarks& benchmarks, std::uint64_t seed) {
  MetricsSummary summary;
  summary.seed = seed;
  summary.stages = result.stages;
  summary.termination = result.termination;
  summary.converged_at = result.converged_at;
  summary.p_bar = result.tail_prices;
  for (const RegretSeries& r : result.regret) {
    summary.regret_final.push_back(r.final_value());
  }
  summary.clamped_rewards = result.clamped_rewards;
  FillDeltas(summary, benchmarks);
  return summary;
}

MetricsSummary SummarizeTrace(const Trace& trace, const StageGame& stage,
                              std::int64_t tail_window,
                              const Benchmarks& benchmarks, std::uint64_t seed,
                              std::int64_t clamped_rewards) {
  MetricsSummary summary;
  summary.seed = seed;
  summary.stages = trace.size();
  summary.termination = trace.termination;
  if (trace.termination == Termination::kConverged) {
    summary.converged_at = trace.size();
  }
  summary.p_bar = TailAveragePrices(trace, tail_window);
  for (int i = 0; i < trace.num_firms(); ++i) {
    summary.regret_final.push_back(
        trace.empty() ? 0.0 : ComputeRegret(trace, stage, i).final_value());
  }
  summary.clamped_rewards = clamped_rewards;
  FillDeltas(summary, benchmarks);
  return summary;
}

ProbeResult DeviationProbe(const EpisodeResult& result, const SimConfig& cfg,
                           int length) {
  if (!result.converged_at) {
    throw ProbeUnavailable("deviation probe needs a converged episode");
  }
  Require(length >= 1, "probe length must be >= 1");
  const StageGame& stage = cfg.stage;
  const DiscreteGame& table = stage.table();
  const int n = stage.num_players();

  auto greedy_profile = [&](std::span<const int> last) {
    std::vector<int> actions(n);
    for (int i = 0; i < n; ++i) {
      actions[i] = GreedyAction(cfg.agents[i], result.final_states[i],
                                StateIndex(cfg.agents[i], table, i, last));
    }
    return actions;
  };
  auto prices_of = [&](std::span<const int> actions) {
    std::vector<double> prices(n);
    for (int i = 0; i < n; ++i) prices[i] = stage.action_value(i, actions[i]);
    return prices;
  };

  ProbeResult probe;
  probe.pre_deviation_actions = greedy_profile(result.last_actions);
  probe.pre_deviation_prices = prices_of(probe.pre_deviation_actions);

  // Firm 0's static best response to the others' greedy actions.
  std::vector<int> deviation = probe.pre_deviation_actions;
  const std::int64_t stride = table.stride(0);
  const std::int64_t base = table.Flatten(deviation) - deviation[0] * stride;
  int best = 0;
  for (int a = 1; a < table.num_actions(0); ++a) {
    if (table.payoff(base + a * stride, 0) > table.payoff(base + best * stride, 0)) {
      best = a;
    }
  }
  probe.deviation_action = best;
  deviation[0] = best;

  std::vector<int> current = deviation;
  for (int k = 0; k < length; ++k) {
    if (k > 0) current = greedy_profile(probe.actions.back());
    probe.actions.push_back(current);
    probe.prices.push_back(prices_of(current));
  }
  return probe;
}

JointDistribution EmpiricalJointDistribution(const Trace& trace,
                                             const DiscreteGame& table,
                                             double tail_fraction) {
  Require(tail_fraction > 0.0 && tail_fraction <= 1.0,
          "tail fraction must be in (0, 1]");
  Require(trace.num_firms() == table.num_players(),
          "trace width must equal the player count");
  const std::int64_t used = static_cast<std::int64_t>(
      std::floor(tail_fraction * static_cast<double>(trace.size())));
  Require(used >= 1, "empirical distribution needs a nonempty tail");
  std::vector<double> mass(table.num_profiles(), 0.0);
  for (std::int64_t k = trace.size() - used; k < trace.size(); ++k) {
    mass[table.Flatten(trace.actions(k))] += 1.0;
  }
  for (double& q : mass) q /= static_cast<double>(used);
  return JointDistribution(table.action_counts(), std::move(mass));
}

}  // namespace collusion

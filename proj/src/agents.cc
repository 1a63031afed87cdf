#include "collusion/agents.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace collusion {
namespace {

// Log-weights are re-centred once the largest exceeds this.
constexpr double kLogWeightCeiling = 500.0;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

int LowestArgmax(std::span<const double> values) {
  return static_cast<int>(std::max_element(values.begin(), values.end()) -
                          values.begin());
}

// Uniform random choice among all maximizers.
int RandomArgmax(std::span<const double> values, Rng& rng) {
  double best = values[0];
  int ties = 1;
  for (std::size_t a = 1; a < values.size(); ++a) {
    if (values[a] > best) {
      best = values[a];
      ties = 1;
    } else if (values[a] == best) {
      ++ties;
    }
  }
  int pick = ties == 1 ? 0 : UniformIndex(rng, ties);
  for (std::size_t a = 0; a < values.size(); ++a) {
    if (values[a] == best && pick-- == 0) return static_cast<int>(a);
  }
  return 0;
}

std::span<const double> Row(const QState& state, int s) {
  return {state.q.data() + static_cast<std::size_t>(s) * state.num_actions,
          static_cast<std::size_t>(state.num_actions)};
}

std::span<double> Row(QState& state, int s) {
  return {state.q.data() + static_cast<std::size_t>(s) * state.num_actions,
          static_cast<std::size_t>(state.num_actions)};
}

void CheckAction(int action, int m) {
  Require(action >= 0 && action < m, "observed action index out of range");
}

}  // namespace

double EpsilonAt(const ExplorationSchedule& schedule, std::int64_t t) {
  Require(t >= 0, "exploration schedule needs t >= 0");
  if (schedule.kind == ExplorationSchedule::Kind::kConstant) {
    return schedule.epsilon;
  }
  return std::exp(-schedule.beta * static_cast<double>(t));
}

void ValidateAgentSpec(const AgentSpec& spec) {
  std::visit(
      Overloaded{
          [](const QLearningSpec& q) {
            Require(q.learning_rate > 0.0 && q.learning_rate <= 1.0,
                    "q_learning alpha must be in (0, 1]");
            Require(q.discount >= 0.0 && q.discount < 1.0,
                    "q_learning delta must be in [0, 1)");
            if (q.exploration.kind == ExplorationSchedule::Kind::kConstant) {
              Require(q.exploration.epsilon >= 0.0 &&
                          q.exploration.epsilon <= 1.0,
                      "q_learning epsilon must be in [0, 1]");
            } else {
              Require(q.exploration.beta > 0.0,
                      "q_learning beta must be > 0");
            }
          },
          [](const Exp3Spec& e) {
            if (e.eta) Require(*e.eta > 0.0, "exp3 eta must be > 0");
            Require(e.gamma >= 0.0 && e.gamma < 1.0,
                    "exp3 gamma must be in [0, 1)");
            if (e.reward_lo && e.reward_hi) {
              Require(*e.reward_lo < *e.reward_hi,
                      "exp3 reward bounds need lo < hi");
            }
          },
          [](const UcbSpec& u) {
            Require(u.width > 0.0, "ucb c must be > 0");
          },
          [](const GradientAscentSpec& g) {
            Require(g.step > 0.0, "gradient step must be > 0");
          },
          [](const ConstantSpec& c) {
            Require(c.action >= 0, "constant action must be >= 0");
          },
      },
      spec);
}

const char* AgentKindName(const AgentSpec& spec) {
  return std::visit(
      Overloaded{
          [](const QLearningSpec&) { return "q_learning"; },
          [](const Exp3Spec&) { return "exp3"; },
          [](const UcbSpec&) { return "ucb"; },
          [](const GradientAscentSpec&) { return "gradient"; },
          [](const ConstantSpec&) { return "constant"; },
      },
      spec);
}

std::vector<double> Exp3State::weights() const {
  std::vector<double> w(log_weights.size());
  std::transform(log_weights.begin(), log_weights.end(), w.begin(),
                 [](double lw) { return std::exp(lw); });
  return w;
}

int NumStates(const AgentSpec& spec, const DiscreteGame& stage, int firm) {
  const auto* q = std::get_if<QLearningSpec>(&spec);
  if (q == nullptr) return 1;
  switch (q->state_mode) {
    case StateMode::kStateless:
      return 1;
    case StateMode::kOwnLastPrice:
      return stage.num_actions(firm);
    case StateMode::kLastJointPrices:
      Require(stage.num_profiles() <= std::numeric_limits<int>::max(),
              "joint-price state space is too large");
      return static_cast<int>(stage.num_profiles());
  }
  return 1;
}

int StateIndex(const AgentSpec& spec, const DiscreteGame& stage, int firm,
               std::span<const int> last_actions) {
  const auto* q = std::get_if<QLearningSpec>(&spec);
  if (q == nullptr) return 0;
  switch (q->state_mode) {
    case StateMode::kStateless:
      return 0;
    case StateMode::kOwnLastPrice:
      return last_actions[firm];
    case StateMode::kLastJointPrices:
      return static_cast<int>(stage.Flatten(last_actions));
  }
  return 0;
}

AgentState InitAgent(const AgentSpec& spec, const DiscreteGame& stage,
                     int firm, std::int64_t horizon) {
  ValidateAgentSpec(spec);
  Require(firm >= 0 && firm < stage.num_players(), "firm index out of range");
  const int m = stage.num_actions(firm);
  return std::visit(
      Overloaded{
          [&](const QLearningSpec& q) -> AgentState {
            QState state;
            state.num_actions = m;
            const int states = NumStates(spec, stage, firm);
            std::vector<double> row(m, 0.0);
            if (q.q_init == QInit::kUniformOpponent) {
              // Average payoff of each own price against opponents drawn
              // uniformly from their grids, discounted to a perpetuity.
              const std::int64_t stride = stage.stride(firm);
              for (std::int64_t flat = 0; flat < stage.num_profiles();
                   ++flat) {
                const int own = static_cast<int>(flat / stride % m);
                row[own] += stage.payoff(flat, firm);
              }
              const double opponents =
                  static_cast<double>(stage.num_profiles() / m);
              for (double& v : row) v = v / opponents / (1.0 - q.discount);
            }
            state.q.resize(static_cast<std::size_t>(states) * m);
            for (int s = 0; s < states; ++s) {
              std::copy(row.begin(), row.end(), Row(state, s).begin());
            }
            state.greedy.assign(states, LowestArgmax(row));
            return state;
          },
          [&](const Exp3Spec& e) -> AgentState {
            Exp3State state;
            state.log_weights.assign(m, 0.0);
            if (e.eta) {
              state.eta = *e.eta;
            } else {
              Require(horizon >= 1, "exp3 automatic eta needs a horizon >= 1");
              state.eta = std::sqrt(std::log(static_cast<double>(m)) /
                                    (static_cast<double>(m) * horizon));
            }
            const auto [lo, hi] = stage.PayoffRange(firm);
            state.reward_lo = e.reward_lo.value_or(std::min(0.0, lo));
            state.reward_hi = e.reward_hi.value_or(hi);
            if (!(state.reward_hi > state.reward_lo)) {
              state.reward_hi = state.reward_lo + 1.0;
            }
            return state;
          },
          [&](const UcbSpec&) -> AgentState {
            UcbState state;
            state.counts.assign(m, 0);
            state.means.assign(m, 0.0);
            return state;
          },
          [&](const GradientAscentSpec&) -> AgentState {
            throw UnsupportedModel(
                "gradient agents act on continuous prices, not grid indices");
          },
          [&](const ConstantSpec& c) -> AgentState {
            Require(c.action < m, "constant action index exceeds the grid");
            return ConstantState{c.action};
          },
      },
      spec);
}

AgentState InitAgent(const AgentSpec& spec, const ActionGrid& grid,
                     const MarketGame& game, int firm, std::int64_t horizon) {
  return InitAgent(spec, Discretize(game, grid), firm, horizon);
}

std::vector<double> Exp3Probabilities(const Exp3Spec& spec,
                                      const Exp3State& state) {
  const int m = static_cast<int>(state.log_weights.size());
  const double top =
      *std::max_element(state.log_weights.begin(), state.log_weights.end());
  std::vector<double> p(m);
  double total = 0.0;
  for (int a = 0; a < m; ++a) {
    p[a] = std::exp(state.log_weights[a] - top);
    total += p[a];
  }
  for (int a = 0; a < m; ++a) {
    p[a] = (1.0 - spec.gamma) * p[a] / total + spec.gamma / m;
  }
  return p;
}

double UcbIndex(double mean, std::int64_t count, std::int64_t t,
                double width) {
  Require(count > 0, "ucb index needs at least one pull");
  return mean + width * std::sqrt(2.0 * std::log(static_cast<double>(t)) /
                                  static_cast<double>(count));
}

int SelectAction(const AgentSpec& spec, const AgentState& state,
                 int env_state, std::int64_t t, Rng& rng) {
  return std::visit(
      Overloaded{
          [&](const QLearningSpec& q) {
            const auto& qs = std::get<QState>(state);
            Require(qs.num_actions > 0, "empty action grid");
            Require(env_state >= 0 && env_state < qs.num_states(),
                    "state index out of range");
            const double eps = EpsilonAt(q.exploration, t);
            if (UniformUnit(rng) < eps) {
              return UniformIndex(rng, qs.num_actions);
            }
            return RandomArgmax(Row(qs, env_state), rng);
          },
          [&](const Exp3Spec& e) {
            const auto& es = std::get<Exp3State>(state);
            Require(!es.log_weights.empty(), "empty action grid");
            const std::vector<double> p = Exp3Probabilities(e, es);
            const double u = UniformUnit(rng);
            double cdf = 0.0;
            for (std::size_t a = 0; a < p.size(); ++a) {
              cdf += p[a];
              if (u < cdf) return static_cast<int>(a);
            }
            return static_cast<int>(p.size()) - 1;
          },
          [&](const UcbSpec& u) {
            const auto& us = std::get<UcbState>(state);
            Require(!us.counts.empty(), "empty action grid");
            for (std::size_t a = 0; a < us.counts.size(); ++a) {
              if (us.counts[a] == 0) return static_cast<int>(a);
            }
            std::vector<double> index(us.counts.size());
            for (std::size_t a = 0; a < us.counts.size(); ++a) {
              index[a] = UcbIndex(us.means[a], us.counts[a], us.steps, u.width);
            }
            return RandomArgmax(index, rng);
          },
          [&](const GradientAscentSpec&) -> int {
            throw UnsupportedModel("gradient agents do not select grid actions");
          },
          [&](const ConstantSpec&) {
            return std::get<ConstantState>(state).action;
          },
      },
      spec);
}

bool Update(const AgentSpec& spec, AgentState& state, const Observation& obs) {
  Require(std::isfinite(obs.profit), "observed profit must be finite");
  return std::visit(
      Overloaded{
          [&](const QLearningSpec& q) {
            auto& qs = std::get<QState>(state);
            const int m = qs.num_actions;
            CheckAction(obs.action, m);
            Require(obs.state >= 0 && obs.state < qs.num_states(),
                    "state index out of range");
            auto bootstrap = [&](int next) {
              Require(next >= 0 && next < qs.num_states(),
                      "next state index out of range");
              const auto row = Row(qs, next);
              return *std::max_element(row.begin(), row.end());
            };
            auto learn = [&](int action, double profit, int next) {
              double& cell =
                  qs.q[static_cast<std::size_t>(obs.state) * m + action];
              cell = (1.0 - q.learning_rate) * cell +
                     q.learning_rate * (profit + q.discount * bootstrap(next));
            };
            if (q.update_mode == UpdateMode::kSynchronous) {
              Require(static_cast<int>(obs.counterfactual_profits.size()) == m &&
                          static_cast<int>(
                              obs.counterfactual_next_states.size()) == m,
                      "synchronous updating needs counterfactual feedback");
              // Bootstraps are read before any cell of this row changes.
              std::vector<double> targets(m);
              for (int a = 0; a < m; ++a) {
                const double profit =
                    a == obs.action ? obs.profit : obs.counterfactual_profits[a];
                targets[a] = profit + q.discount *
                                          bootstrap(obs.counterfactual_next_states[a]);
              }
              auto row = Row(qs, obs.state);
              for (int a = 0; a < m; ++a) {
                row[a] = (1.0 - q.learning_rate) * row[a] +
                         q.learning_rate * targets[a];
              }
            } else {
              learn(obs.action, obs.profit, obs.next_state);
            }
            const int greedy = LowestArgmax(Row(qs, obs.state));
            const bool changed = greedy != qs.greedy[obs.state];
            qs.greedy[obs.state] = greedy;
            return changed;
          },
          [&](const Exp3Spec& e) {
            auto& es = std::get<Exp3State>(state);
            const int m = static_cast<int>(es.log_weights.size());
            CheckAction(obs.action, m);
            const double p = Exp3Probabilities(e, es)[obs.action];
            double scaled =
                (obs.profit - es.reward_lo) / (es.reward_hi - es.reward_lo);
            if (scaled < 0.0 || scaled > 1.0) {
              ++es.clamped_rewards;
              scaled = std::clamp(scaled, 0.0, 1.0);
            }
            es.log_weights[obs.action] += es.eta * scaled / p;
            const double top = *std::max_element(es.log_weights.begin(),
                                                 es.log_weights.end());
            if (top > kLogWeightCeiling) {
              for (double& lw : es.log_weights) lw -= top;
            }
            const int greedy = LowestArgmax(es.log_weights);
            const bool changed = greedy != es.greedy;
            es.greedy = greedy;
            return changed;
          },
          [&](const UcbSpec&) {
            auto& us = std::get<UcbState>(state);
            const int m = static_cast<int>(us.counts.size());
            CheckAction(obs.action, m);
            const int a = obs.action;
            ++us.counts[a];
            us.means[a] += (obs.profit - us.means[a]) / us.counts[a];
            ++us.steps;
            const int greedy = LowestArgmax(us.means);
            const bool changed = greedy != us.greedy;
            us.greedy = greedy;
            return changed;
          },
          [&](const GradientAscentSpec&) -> bool {
            throw UnsupportedModel("gradient agents do not take bandit feedback");
          },
          [&](const ConstantSpec&) { return false; },
      },
      spec);
}

int GreedyAction(const AgentSpec& spec, const AgentState& state,
                 int env_state) {
  return std::visit(
      Overloaded{
          [&](const QLearningSpec&) {
            const auto& qs = std::get<QState>(state);
            Require(env_state >= 0 && env_state < qs.num_states(),
                    "state index out of range");
            return qs.greedy[env_state];
          },
          [&](const Exp3Spec&) { return std::get<Exp3State>(state).greedy; },
          [&](const UcbSpec&) { return std::get<UcbState>(state).greedy; },
          [&](const GradientAscentSpec&) -> int {
            throw UnsupportedModel("gradient agents have no grid policy");
          },
          [&](const ConstantSpec&) {
            return std::get<ConstantState>(state).action;
          },
      },
      spec);
}

std::int64_t ClampedRewards(const AgentState& state) {
  const auto* es = std::get_if<Exp3State>(&state);
  return es == nullptr ? 0 : es->clamped_rewards;
}

std::vector<double> GradientStep(const GradientAscentSpec& spec,
                                 std::span<const double> prices,
                                 const MarketGame& game) {
  ValidateAgentSpec(spec);
  const std::vector<double> grad = PseudoGradient(game, prices);
  std::vector<double> next(prices.begin(), prices.end());
  for (std::size_t i = 0; i < next.size(); ++i) {
    next[i] = std::clamp(next[i] + spec.step * grad[i], game.interval().lo,
                         game.interval().hi);
  }
  return next;
}

std::vector<std::vector<double>> RunGradientDynamics(
    const GradientAscentSpec& spec, const MarketGame& game,
    std::vector<double> start, std::int64_t steps) {
  Require(static_cast<int>(start.size()) == game.num_firms(),
          "start profile length must equal the firm count");
  Require(steps >= 0, "gradient dynamics needs steps >= 0");
  std::vector<std::vector<double>> path;
  path.reserve(static_cast<std::size_t>(steps) + 1);
  path.push_back(std::move(start));
  for (std::int64_t k = 0; k < steps; ++k) {
    path.push_back(GradientStep(spec, path.back(), game));
  }
  return path;
}

}  // namespace collusion

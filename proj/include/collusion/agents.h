#ifndef COLLUSION_AGENTS_H_
#define COLLUSION_AGENTS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "collusion/common.h"
#include "collusion/equilibrium.h"
#include "collusion/market.h"

namespace collusion {

struct ExplorationSchedule {
  enum class Kind { kConstant, kDecay };
  Kind kind = Kind::kDecay;
  double epsilon = 0.0;  // kConstant
  double beta = 4e-6;    // kDecay: eps_t = exp(-beta t)

  static ExplorationSchedule Constant(double epsilon) {
    return {Kind::kConstant, epsilon, 0.0};
  }
  static ExplorationSchedule Decay(double beta) {
    return {Kind::kDecay, 0.0, beta};
  }
};

double EpsilonAt(const ExplorationSchedule& schedule, std::int64_t t);

enum class StateMode { kStateless, kOwnLastPrice, kLastJointPrices };
enum class QInit { kZeros, kUniformOpponent };
enum class UpdateMode { kAsynchronous, kSynchronous };

struct QLearningSpec {
  double learning_rate = 0.15;
  double discount = 0.95;
  ExplorationSchedule exploration = ExplorationSchedule::Decay(4e-6);
  StateMode state_mode = StateMode::kLastJointPrices;
  QInit q_init = QInit::kUniformOpponent;
  UpdateMode update_mode = UpdateMode::kAsynchronous;
};

struct Exp3Spec {
  // Unset: sqrt(ln m / (m T)) resolved from the grid size and horizon.
  std::optional<double> eta;
  double gamma = 0.05;
  // Unset: [min(0, min payoff), max payoff] of the firm's stage payoffs.
  std::optional<double> reward_lo;
  std::optional<double> reward_hi;
};

struct UcbSpec {
  double width = 1.0;
};

// Continuous prices with full gradient feedback; not a grid agent.
struct GradientAscentSpec {
  double step = 0.01;
};

// Always plays one grid index. Useful as a static opponent.
struct ConstantSpec {
  int action = 0;
};

using AgentSpec = std::variant<QLearningSpec, Exp3Spec, UcbSpec,
                               GradientAscentSpec, ConstantSpec>;

void ValidateAgentSpec(const AgentSpec& spec);
const char* AgentKindName(const AgentSpec& spec);

struct QState {
  int num_actions = 0;
  std::vector<double> q;    // num_states x num_actions, row-major
  std::vector<int> greedy;  // lowest-index argmax per state
  int num_states() const { return static_cast<int>(greedy.size()); }
  double at(int state, int action) const {
    return q[static_cast<std::size_t>(state) * num_actions + action];
  }
};

struct Exp3State {
  // Weights are kept as logarithms; weights() exponentiates.
  std::vector<double> log_weights;
  double eta = 0.0;
  double reward_lo = 0.0;
  double reward_hi = 1.0;
  int greedy = 0;
  std::int64_t clamped_rewards = 0;
  std::vector<double> weights() const;
};

struct UcbState {
  std::vector<std::int64_t> counts;
  std::vector<double> means;
  std::int64_t steps = 0;
  int greedy = 0;
};

struct GradientState {
  double price = 0.0;
};

struct ConstantState {
  int action = 0;
};

using AgentState =
    std::variant<QState, Exp3State, UcbState, GradientState, ConstantState>;

// Bandit feedback for one stage.
struct Observation {
  int state = 0;  // state the action was chosen in
  int action = 0;
  double profit = 0.0;
  int next_state = 0;
  std::int64_t t = 0;
  // Filled only for synchronous Q-learning: profit and next state for every
  // own action against the realized opponent actions.
  std::span<const double> counterfactual_profits;
  std::span<const int> counterfactual_next_states;
};

int NumStates(const AgentSpec& spec, const DiscreteGame& stage, int firm);

// Encodes the previous joint action profile as this agent's state index.
int StateIndex(const AgentSpec& spec, const DiscreteGame& stage, int firm,
               std::span<const int> last_actions);

AgentState InitAgent(const AgentSpec& spec, const DiscreteGame& stage,
                     int firm, std::int64_t horizon);
AgentState InitAgent(const AgentSpec& spec, const ActionGrid& grid,
                     const MarketGame& game, int firm, std::int64_t horizon);

int SelectAction(const AgentSpec& spec, const AgentState& state,
                 int env_state, std::int64_t t, Rng& rng);

// Applies one learning step. Returns true when the greedy policy changed.
bool Update(const AgentSpec& spec, AgentState& state, const Observation& obs);

// Exploitation action; ties go to the lowest index.
int GreedyAction(const AgentSpec& spec, const AgentState& state,
                 int env_state);

// (1 - gamma) w_a / sum w + gamma / m.
std::vector<double> Exp3Probabilities(const Exp3Spec& spec,
                                      const Exp3State& state);

// mean + c sqrt(2 ln t / n).
double UcbIndex(double mean, std::int64_t count, std::int64_t t, double width);

// Reward warnings recorded by the agent (Exp3 clamps), zero otherwise.
std::int64_t ClampedRewards(const AgentState& state);

// One projected gradient ascent step for every firm.
std::vector<double> GradientStep(const GradientAscentSpec& spec,
                                 std::span<const double> prices,
                                 const MarketGame& game);

// Iterates GradientStep from start; returns steps + 1 profiles.
std::vector<std::vector<double>> RunGradientDynamics(
    const GradientAscentSpec& spec, const MarketGame& game,
    std::vector<double> start, std::int64_t steps);

}  // namespace collusion

#endif  // COLLUSION_AGENTS_H_

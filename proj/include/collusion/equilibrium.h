#ifndef COLLUSION_EQUILIBRIUM_H_
#define COLLUSION_EQUILIBRIUM_H_

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "collusion/common.h"
#include "collusion/market.h"

namespace collusion {

struct EquilibriumResult {
  std::vector<double> prices;
  // Max over firms of |BR_i(p) - p_i| for Nash; for monopoly benchmarks the
  // same quantity against the joint-profit coordinate maximizer.
  double residual = 0.0;
  // Max absolute first-order-condition residual at prices.
  double foc_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Price that maximizes firm's profit on the game's interval, holding the other
// entries of prices fixed (prices[firm] is ignored). Logit demand only.
double BestResponseLogit(const MarketGame& game, int firm,
                         std::span<const double> prices, double tol = 1e-12);

// |(a_i - c_i)(1 - d_i) - mu|, the logit Nash first-order condition.
double LogitNashFocResidual(const MarketGame& game,
                            std::span<const double> prices, int firm);

// Max over firms of |(a_i - c_i) - sum_j (a_j - c_j) d_j - mu|.
double LogitMonopolyFocResidual(const MarketGame& game,
                                std::span<const double> prices);

// Simultaneous best-response iteration from the interval midpoint.
EquilibriumResult SolveNashLogit(const MarketGame& game, double tol = 1e-10,
                                 int max_iter = 1000);

// Joint-profit maximizer: line search on the symmetric diagonal for symmetric
// games, cyclic coordinate ascent otherwise.
EquilibriumResult SolveMonopolyLogit(const MarketGame& game,
                                     double tol = 1e-10,
                                     int max_sweeps = 500);

// Symmetric costs: everyone at the common cost. Otherwise everyone at the
// second-lowest marginal cost.
std::vector<double> NashAllOrNothing(const MarketGame& game);

// Joint-profit maximizer over common prices: D (1 - p)(p - mean cost) peaks
// at (1 + mean cost) / 2, clamped to the interval.
std::vector<double> MonopolyAllOrNothing(const MarketGame& game);

// Closed-form benchmarks for linear demand (interior solutions, then clamped).
EquilibriumResult SolveNashLinear(const MarketGame& game);
EquilibriumResult SolveMonopolyLinear(const MarketGame& game);

struct Benchmarks {
  std::vector<double> nash;
  std::vector<double> monopoly;
  bool converged = true;
  double nash_residual = 0.0;
  double monopoly_residual = 0.0;
};

// Dispatches on the demand model.
Benchmarks ComputeBenchmarks(const MarketGame& game, double tol = 1e-12);

// Normal-form game with payoffs stored profile-major: payoff(profile, player).
// Joint profiles are flattened with player 0 varying fastest.
class DiscreteGame {
 public:
  DiscreteGame(std::vector<int> action_counts, std::vector<double> payoffs);

  static DiscreteGame FromFunction(
      std::vector<int> action_counts,
      const std::function<std::vector<double>(std::span<const int>)>& payoff);

  int num_players() const { return static_cast<int>(counts_.size()); }
  int num_actions(int player) const { return counts_[player]; }
  const std::vector<int>& action_counts() const { return counts_; }
  std::int64_t num_profiles() const { return num_profiles_; }
  std::int64_t stride(int player) const { return strides_[player]; }

  std::int64_t Flatten(std::span<const int> actions) const;
  void Unflatten(std::int64_t flat, std::span<int> actions) const;

  double payoff(std::int64_t flat, int player) const {
    return payoffs_[flat * num_players() + player];
  }
  double payoff(std::span<const int> actions, int player) const {
    return payoff(Flatten(actions), player);
  }
  // Smallest and largest payoff of one player over all profiles.
  std::pair<double, double> PayoffRange(int player) const;

 private:
  std::vector<int> counts_;
  std::vector<std::int64_t> strides_;
  std::int64_t num_profiles_ = 0;
  std::vector<double> payoffs_;
};

inline constexpr std::int64_t kDefaultProfileCap = 50'000'000;

// Payoff tensor of the game restricted to grid prices.
DiscreteGame Discretize(const MarketGame& game, const ActionGrid& grid,
                        std::int64_t profile_cap = kDefaultProfileCap);

// Every pure profile from which no unilateral deviation strictly improves the
// deviator. Exact enumeration.
std::vector<std::vector<int>> BruteForceDiscreteNash(const DiscreteGame& game);

// True when no firm prices below its own marginal cost. Such prices are
// weakly dominated and support spurious discrete equilibria under
// all-or-nothing demand.
bool PricesAtOrAboveCost(const MarketGame& game, const ActionGrid& grid,
                         std::span<const int> actions);

struct PotentialCheck {
  bool is_potential = false;
  double max_defect = 0.0;
};

// Four-cycle test over every player pair and deviation square.
PotentialCheck CheckExactPotential(const DiscreteGame& game,
                                   double tol = 1e-9);

// Own-price partial derivatives by central differences, step 1e-6 * width.
std::vector<double> PseudoGradient(const MarketGame& game,
                                   std::span<const double> prices);

// <g(x) - g(y), x - y> for the pseudo-gradient g.
double MonotonicityInnerProduct(const MarketGame& game,
                                std::span<const double> x,
                                std::span<const double> y);

struct MonotonicityCheck {
  bool monotone_on_sample = false;
  double min_inner_product = 0.0;
  // min of <g(x) - g(y), x - y> / |x - y|^2
  double min_normalized = 0.0;
  int pairs = 0;
};

// Sampled diagnostic, not a proof. Degenerate pairs (x == y) are skipped.
MonotonicityCheck CheckMonotonicity(const MarketGame& game, int sample_pairs,
                                    Rng& rng, double tol = 1e-9);

class JointDistribution {
 public:
  JointDistribution(std::vector<int> action_counts, std::vector<double> mass);

  static JointDistribution PointMass(const DiscreteGame& game,
                                     std::span<const int> actions);

  const std::vector<int>& action_counts() const { return counts_; }
  const std::vector<double>& mass() const { return mass_; }
  double operator[](std::int64_t flat) const { return mass_[flat]; }

 private:
  std::vector<int> counts_;
  std::vector<double> mass_;
};

// max_i max_{a'_i} E[u_i(a'_i, a_-i)] - E[u_i(a)]. <= 0 certifies a CCE.
double CheckCce(const DiscreteGame& game, const JointDistribution& dist);

// Quantity game with inverse demand P(Q) = intercept - slope * Q and linear
// costs; payoffs q_i * P(Q) - c_i q_i over the given quantity grid.
DiscreteGame CournotLinearGame(double intercept, double slope,
                               std::span<const double> costs,
                               std::span<const double> quantities);

}  // namespace collusion

#endif  // COLLUSION_EQUILIBRIUM_H_

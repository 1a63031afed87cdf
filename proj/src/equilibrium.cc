#include "collusion/equilibrium.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Dense>

namespace collusion {
namespace {

constexpr double kGoldenRatio = 0.6180339887498949;

const LogitDemand& RequireLogit(const MarketGame& game) {
  const auto* logit = std::get_if<LogitDemand>(&game.demand());
  if (logit == nullptr) {
    throw UnsupportedModel("operation requires logit demand");
  }
  return *logit;
}

double GoldenSectionMax(const std::function<double(double)>& f, double lo,
                        double hi, double xtol) {
  double a = lo, b = hi;
  double x1 = b - kGoldenRatio * (b - a);
  double x2 = a + kGoldenRatio * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > xtol) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kGoldenRatio * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kGoldenRatio * (b - a);
      f1 = f(x1);
    }
  }
  // The endpoints are candidates too: the bracket may have collapsed on one.
  double best = 0.5 * (a + b);
  double f_best = f(best);
  for (double x : {lo, hi}) {
    const double fx = f(x);
    if (fx > f_best) {
      best = x;
      f_best = fx;
    }
  }
  return best;
}

// Newton iteration on a first-order condition g(x) = 0 started from a
// bracketed estimate. Falls back to x0 if an iterate leaves [lo, hi].
double PolishRoot(const std::function<std::pair<double, double>(double)>& g,
                  double x0, double lo, double hi) {
  double x = x0;
  for (int it = 0; it < 100; ++it) {
    const auto [value, slope] = g(x);
    if (!(std::abs(slope) > 0.0) || !std::isfinite(value)) return x0;
    const double step = value / slope;
    const double next = x - step;
    if (!(next >= lo && next <= hi)) return x0;
    x = next;
    if (std::abs(step) <= 4 * std::numeric_limits<double>::epsilon() *
                              std::max(1.0, std::abs(x))) {
      break;
    }
  }
  return x;
}

// Golden-section bracket, then Newton polish unless the maximizer sits on the
// interval boundary.
double MaximizeOnInterval(
    const std::function<double(double)>& f,
    const std::function<std::pair<double, double>(double)>& foc, double lo,
    double hi) {
  const double xtol = 1e-9 * (hi - lo);
  const double x = GoldenSectionMax(f, lo, hi, xtol);
  if (x - lo <= 2 * xtol) return lo;
  if (hi - x <= 2 * xtol) return hi;
  // Profit is flat to rounding near the optimum, so compare FOC residuals.
  const double polished = PolishRoot(foc, x, lo, hi);
  return std::abs(foc(polished).first) <= std::abs(foc(x).first) ? polished
                                                                 : x;
}

double JointProfit(const MarketGame& game, std::span<const double> prices) {
  const MarketOutcome out = Payoff(game, prices);
  return std::accumulate(out.profits.begin(), out.profits.end(), 0.0);
}

// Maximizes joint profit over prices[firm], others fixed.
double MonopolyCoordinate(const MarketGame& game, std::vector<double> prices,
                          int firm) {
  const LogitDemand& logit = RequireLogit(game);
  const double mu = logit.differentiation;
  auto joint = [&](double p) {
    prices[firm] = p;
    return JointProfit(game, prices);
  };
  auto foc = [&](double p) -> std::pair<double, double> {
    prices[firm] = p;
    const std::vector<double> d = Demand(game, prices);
    double weighted = 0.0;
    for (int j = 0; j < game.num_firms(); ++j) {
      weighted += (prices[j] - game.cost(j)) * d[j];
    }
    const double markup = p - game.cost(firm);
    return {markup - weighted - mu,
            1.0 - d[firm] + d[firm] / mu * (markup - weighted)};
  };
  return MaximizeOnInterval(joint, foc, game.interval().lo,
                            game.interval().hi);
}

double CoordinateResidual(const MarketGame& game,
                          const std::vector<double>& prices) {
  double residual = 0.0;
  for (int i = 0; i < game.num_firms(); ++i) {
    residual = std::max(
        residual, std::abs(MonopolyCoordinate(game, prices, i) - prices[i]));
  }
  return residual;
}

}  // namespace

double BestResponseLogit(const MarketGame& game, int firm,
                         std::span<const double> prices, double /*tol*/) {
  const LogitDemand& logit = RequireLogit(game);
  Require(firm >= 0 && firm < game.num_firms(), "firm index out of range");
  Require(static_cast<int>(prices.size()) == game.num_firms(),
          "price profile length must equal the firm count");
  const double mu = logit.differentiation;
  const double cost = game.cost(firm);
  std::vector<double> profile(prices.begin(), prices.end());
  auto profit = [&](double p) {
    profile[firm] = p;
    return FirmProfit(game, profile, firm);
  };
  auto foc = [&](double p) -> std::pair<double, double> {
    profile[firm] = p;
    const double d = Demand(game, profile)[firm];
    return {(p - cost) * (1.0 - d) - mu,
            (1.0 - d) + (p - cost) * d * (1.0 - d) / mu};
  };
  return MaximizeOnInterval(profit, foc, game.interval().lo,
                            game.interval().hi);
}

double LogitNashFocResidual(const MarketGame& game,
                            std::span<const double> prices, int firm) {
  const LogitDemand& logit = RequireLogit(game);
  const double d = Demand(game, prices)[firm];
  return std::abs((prices[firm] - game.cost(firm)) * (1.0 - d) -
                  logit.differentiation);
}

double LogitMonopolyFocResidual(const MarketGame& game,
                                std::span<const double> prices) {
  const LogitDemand& logit = RequireLogit(game);
  const std::vector<double> d = Demand(game, prices);
  double weighted = 0.0;
  for (int j = 0; j < game.num_firms(); ++j) {
    weighted += (prices[j] - game.cost(j)) * d[j];
  }
  double residual = 0.0;
  for (int i = 0; i < game.num_firms(); ++i) {
    residual = std::max(residual, std::abs(prices[i] - game.cost(i) -
                                           weighted - logit.differentiation));
  }
  return residual;
}

EquilibriumResult SolveNashLogit(const MarketGame& game, double tol,
                                 int max_iter) {
  RequireLogit(game);
  const int n = game.num_firms();
  const double mid = 0.5 * (game.interval().lo + game.interval().hi);
  EquilibriumResult result;
  result.prices.assign(n, mid);
  std::vector<double> next(n);
  for (int it = 0; it <= max_iter; ++it) {
    result.residual = 0.0;
    for (int i = 0; i < n; ++i) {
      next[i] = BestResponseLogit(game, i, result.prices);
      result.residual =
          std::max(result.residual, std::abs(next[i] - result.prices[i]));
    }
    result.iterations = it;
    if (result.residual <= tol) {
      result.converged = true;
      break;
    }
    if (it == max_iter) break;
    result.prices = next;
  }
  result.foc_residual = 0.0;
  for (int i = 0; i < n; ++i) {
    result.foc_residual = std::max(
        result.foc_residual, LogitNashFocResidual(game, result.prices, i));
  }
  return result;
}

EquilibriumResult SolveMonopolyLogit(const MarketGame& game, double tol,
                                     int max_sweeps) {
  const LogitDemand& logit = RequireLogit(game);
  const int n = game.num_firms();
  const double lo = game.interval().lo, hi = game.interval().hi;
  EquilibriumResult result;

  if (game.is_symmetric()) {
    const double mu = logit.differentiation;
    const double cost = game.cost(0);
    std::vector<double> profile(n);
    auto joint = [&](double p) {
      std::fill(profile.begin(), profile.end(), p);
      return JointProfit(game, profile);
    };
    auto foc = [&](double p) -> std::pair<double, double> {
      std::fill(profile.begin(), profile.end(), p);
      const double d = Demand(game, profile)[0];
      const double outside = 1.0 - n * d;
      return {(p - cost) * outside - mu,
              outside + (p - cost) * n * d * outside / mu};
    };
    const double p = MaximizeOnInterval(joint, foc, lo, hi);
    result.prices.assign(n, p);
    result.iterations = 1;
  } else {
    result.prices.assign(n, 0.5 * (lo + hi));
    for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
      for (int i = 0; i < n; ++i) {
        result.prices[i] = MonopolyCoordinate(game, result.prices, i);
      }
      result.iterations = sweep;
      if (CoordinateResidual(game, result.prices) <= tol) break;
    }
  }
  result.residual = CoordinateResidual(game, result.prices);
  result.foc_residual = LogitMonopolyFocResidual(game, result.prices);
  result.converged = result.residual <= tol;
  return result;
}

std::vector<double> NashAllOrNothing(const MarketGame& game) {
  if (!game.is_all_or_nothing()) {
    throw UnsupportedModel("operation requires all-or-nothing demand");
  }
  std::vector<double> sorted = game.costs();
  std::sort(sorted.begin(), sorted.end());
  // With a tie at the lowest cost, sorted[1] is that common cost.
  return std::vector<double>(game.num_firms(), sorted[1]);
}

std::vector<double> MonopolyAllOrNothing(const MarketGame& game) {
  if (!game.is_all_or_nothing()) {
    throw UnsupportedModel("operation requires all-or-nothing demand");
  }
  const auto& costs = game.costs();
  const double mean_cost =
      std::accumulate(costs.begin(), costs.end(), 0.0) / costs.size();
  const double p = std::clamp(0.5 * (1.0 + mean_cost), game.interval().lo,
                              game.interval().hi);
  return std::vector<double>(game.num_firms(), p);
}

namespace {

const LinearDemand& RequireLinear(const MarketGame& game) {
  const auto* lin = std::get_if<LinearDemand>(&game.demand());
  if (lin == nullptr) {
    throw UnsupportedModel("operation requires linear demand");
  }
  return *lin;
}

std::vector<double> SolveLinearSystem(const Eigen::MatrixXd& a,
                                      const Eigen::VectorXd& b) {
  const Eigen::VectorXd x = a.partialPivLu().solve(b);
  return std::vector<double>(x.data(), x.data() + x.size());
}

double LinearBestResponse(const MarketGame& game, const LinearDemand& lin,
                          std::span<const double> prices, int firm) {
  double others = 0.0;
  for (int j = 0; j < game.num_firms(); ++j) {
    if (j != firm) others += prices[j];
  }
  const double p = (lin.intercept + lin.cross_slope * others +
                    lin.own_slope * game.cost(firm)) /
                   (2.0 * lin.own_slope);
  return std::clamp(p, game.interval().lo, game.interval().hi);
}

}  // namespace

EquilibriumResult SolveNashLinear(const MarketGame& game) {
  const LinearDemand& lin = RequireLinear(game);
  const int n = game.num_firms();
  Eigen::MatrixXd a = Eigen::MatrixXd::Constant(n, n, -lin.cross_slope);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    a(i, i) = 2.0 * lin.own_slope;
    b(i) = lin.intercept + lin.own_slope * game.cost(i);
  }
  EquilibriumResult result;
  result.prices = SolveLinearSystem(a, b);
  for (double& p : result.prices) {
    p = std::clamp(p, game.interval().lo, game.interval().hi);
  }
  for (int i = 0; i < n; ++i) {
    result.residual = std::max(
        result.residual,
        std::abs(LinearBestResponse(game, lin, result.prices, i) -
                 result.prices[i]));
  }
  result.foc_residual = result.residual;
  result.iterations = 1;
  result.converged = result.residual <= 1e-9;
  return result;
}

EquilibriumResult SolveMonopolyLinear(const MarketGame& game) {
  const LinearDemand& lin = RequireLinear(game);
  const int n = game.num_firms();
  const double total_cost =
      std::accumulate(game.costs().begin(), game.costs().end(), 0.0);
  Eigen::MatrixXd a = Eigen::MatrixXd::Constant(n, n, -2.0 * lin.cross_slope);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    a(i, i) = 2.0 * lin.own_slope;
    b(i) = lin.intercept + lin.own_slope * game.cost(i) -
           lin.cross_slope * (total_cost - game.cost(i));
  }
  EquilibriumResult result;
  result.prices = SolveLinearSystem(a, b);
  for (double& p : result.prices) {
    p = std::clamp(p, game.interval().lo, game.interval().hi);
  }
  result.iterations = 1;
  result.converged = true;
  return result;
}

Benchmarks ComputeBenchmarks(const MarketGame& game, double tol) {
  Benchmarks out;
  if (game.is_logit()) {
    const EquilibriumResult nash = SolveNashLogit(game, tol);
    const EquilibriumResult mono = SolveMonopolyLogit(game, tol);
    out.nash = nash.prices;
    out.monopoly = mono.prices;
    out.nash_residual = nash.residual;
    out.monopoly_residual = mono.residual;
    out.converged = nash.converged && mono.converged;
  } else if (game.is_all_or_nothing()) {
    out.nash = NashAllOrNothing(game);
    out.monopoly = MonopolyAllOrNothing(game);
  } else {
    const EquilibriumResult nash = SolveNashLinear(game);
    const EquilibriumResult mono = SolveMonopolyLinear(game);
    out.nash = nash.prices;
    out.monopoly = mono.prices;
    out.nash_residual = nash.residual;
    out.converged = nash.converged && mono.converged;
  }
  return out;
}

DiscreteGame::DiscreteGame(std::vector<int> action_counts,
                           std::vector<double> payoffs)
    : counts_(std::move(action_counts)), payoffs_(std::move(payoffs)) {
  Require(!counts_.empty(), "discrete game needs at least one player");
  strides_.resize(counts_.size());
  std::int64_t total = 1;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    Require(counts_[i] >= 1, "every player needs at least one action");
    strides_[i] = total;
    total *= counts_[i];
  }
  num_profiles_ = total;
  Require(static_cast<std::int64_t>(payoffs_.size()) ==
              total * static_cast<std::int64_t>(counts_.size()),
          "payoff tensor size does not match the action counts");
  for (double u : payoffs_) {
    Require(std::isfinite(u), "payoff tensor entries must be finite");
  }
}

DiscreteGame DiscreteGame::FromFunction(
    std::vector<int> action_counts,
    const std::function<std::vector<double>(std::span<const int>)>& payoff) {
  const int n = static_cast<int>(action_counts.size());
  std::int64_t total = 1;
  for (int c : action_counts) total *= c;
  std::vector<double> table(total * n);
  std::vector<int> actions(n, 0);
  for (std::int64_t flat = 0; flat < total; ++flat) {
    const std::vector<double> u = payoff(actions);
    Require(static_cast<int>(u.size()) == n,
            "payoff function must return one value per player");
    std::copy(u.begin(), u.end(), table.begin() + flat * n);
    for (int i = 0; i < n; ++i) {
      if (++actions[i] < action_counts[i]) break;
      actions[i] = 0;
    }
  }
  return DiscreteGame(std::move(action_counts), std::move(table));
}

std::int64_t DiscreteGame::Flatten(std::span<const int> actions) const {
  Require(static_cast<int>(actions.size()) == num_players(),
          "action profile length must equal the player count");
  std::int64_t flat = 0;
  for (int i = 0; i < num_players(); ++i) {
    Require(actions[i] >= 0 && actions[i] < counts_[i],
            "action index out of range");
    flat += actions[i] * strides_[i];
  }
  return flat;
}

void DiscreteGame::Unflatten(std::int64_t flat, std::span<int> actions) const {
  for (int i = 0; i < num_players(); ++i) {
    actions[i] = static_cast<int>(flat % counts_[i]);
    flat /= counts_[i];
  }
}

std::pair<double, double> DiscreteGame::PayoffRange(int player) const {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::int64_t flat = 0; flat < num_profiles_; ++flat) {
    lo = std::min(lo, payoff(flat, player));
    hi = std::max(hi, payoff(flat, player));
  }
  return {lo, hi};
}

DiscreteGame Discretize(const MarketGame& game, const ActionGrid& grid,
                        std::int64_t profile_cap) {
  const int n = game.num_firms();
  const double slack = 1e-12 * std::max(1.0, game.interval().width());
  Require(grid.lo() >= game.interval().lo - slack &&
              grid.hi() <= game.interval().hi + slack,
          "grid must lie within the game's price interval");
  std::int64_t profiles = 1;
  for (int i = 0; i < n; ++i) {
    profiles *= grid.size();
    if (profiles > profile_cap) {
      throw InvalidInput("payoff tensor exceeds the profile cap of " +
                         std::to_string(profile_cap));
    }
  }
  std::vector<double> prices(n);
  return DiscreteGame::FromFunction(
      std::vector<int>(n, grid.size()), [&](std::span<const int> actions) {
        for (int i = 0; i < n; ++i) prices[i] = grid[actions[i]];
        return Payoff(game, prices).profits;
      });
}

std::vector<std::vector<int>> BruteForceDiscreteNash(const DiscreteGame& game) {
  const int n = game.num_players();
  const std::int64_t total = game.num_profiles();
  // best[i][key]: player i's best payoff against the opponents' profile,
  // where key is the flat index with player i's coordinate removed.
  std::vector<std::vector<double>> best(n);
  for (int i = 0; i < n; ++i) {
    const std::int64_t stride = game.stride(i);
    const int m = game.num_actions(i);
    best[i].assign(total / m, -std::numeric_limits<double>::infinity());
    for (std::int64_t flat = 0; flat < total; ++flat) {
      const std::int64_t low = flat % stride;
      const std::int64_t high = flat / (stride * m);
      const std::int64_t key = high * stride + low;
      best[i][key] = std::max(best[i][key], game.payoff(flat, i));
    }
  }
  std::vector<std::vector<int>> equilibria;
  std::vector<int> actions(n);
  for (std::int64_t flat = 0; flat < total; ++flat) {
    bool stable = true;
    for (int i = 0; i < n && stable; ++i) {
      const std::int64_t stride = game.stride(i);
      const std::int64_t key =
          flat / (stride * game.num_actions(i)) * stride + flat % stride;
      stable = !(best[i][key] > game.payoff(flat, i));
    }
    if (stable) {
      game.Unflatten(flat, actions);
      equilibria.push_back(actions);
    }
  }
  return equilibria;
}

bool PricesAtOrAboveCost(const MarketGame& game, const ActionGrid& grid,
                         std::span<const int> actions) {
  Require(static_cast<int>(actions.size()) == game.num_firms(),
          "profile length must equal the firm count");
  for (int i = 0; i < game.num_firms(); ++i) {
    if (grid[actions[i]] < game.cost(i)) return false;
  }
  return true;
}

PotentialCheck CheckExactPotential(const DiscreteGame& game, double tol) {
  const int n = game.num_players();
  double defect = 0.0;
  std::vector<int> actions(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const std::int64_t si = game.stride(i), sj = game.stride(j);
      for (std::int64_t base = 0; base < game.num_profiles(); ++base) {
        game.Unflatten(base, actions);
        const int ai = actions[i], aj = actions[j];
        for (int bi = ai + 1; bi < game.num_actions(i); ++bi) {
          for (int bj = aj + 1; bj < game.num_actions(j); ++bj) {
            const std::int64_t p00 = base;
            const std::int64_t p10 = base + (bi - ai) * si;
            const std::int64_t p11 = p10 + (bj - aj) * sj;
            const std::int64_t p01 = base + (bj - aj) * sj;
            // Walk (a_i,a_j) -> (b_i,a_j) -> (b_i,b_j) -> (a_i,b_j) -> back,
            // summing the deviator's payoff change at each step.
            const double cycle =
                (game.payoff(p10, i) - game.payoff(p00, i)) +
                (game.payoff(p11, j) - game.payoff(p10, j)) +
                (game.payoff(p01, i) - game.payoff(p11, i)) +
                (game.payoff(p00, j) - game.payoff(p01, j));
            defect = std::max(defect, std::abs(cycle));
          }
        }
      }
    }
  }
  return {defect <= tol, defect};
}

std::vector<double> PseudoGradient(const MarketGame& game,
                                   std::span<const double> prices) {
  if (!game.is_differentiable()) {
    throw UnsupportedModel(
        "pseudo-gradient needs a differentiable demand model");
  }
  const int n = game.num_firms();
  const double h = 1e-6 * game.interval().width();
  std::vector<double> profile(prices.begin(), prices.end());
  std::vector<double> grad(n);
  for (int i = 0; i < n; ++i) {
    const double p = profile[i];
    profile[i] = p + h;
    const double up = FirmProfit(game, profile, i);
    profile[i] = p - h;
    const double down = FirmProfit(game, profile, i);
    profile[i] = p;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double MonotonicityInnerProduct(const MarketGame& game,
                                std::span<const double> x,
                                std::span<const double> y) {
  Require(x.size() == y.size(), "profiles must have equal length");
  const std::vector<double> gx = PseudoGradient(game, x);
  const std::vector<double> gy = PseudoGradient(game, y);
  double inner = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    inner += (gx[i] - gy[i]) * (x[i] - y[i]);
  }
  return inner;
}

MonotonicityCheck CheckMonotonicity(const MarketGame& game, int sample_pairs,
                                    Rng& rng, double tol) {
  if (!game.is_differentiable()) {
    throw UnsupportedModel(
        "monotonicity check needs a differentiable demand model");
  }
  Require(sample_pairs >= 1, "monotonicity check needs sample_pairs >= 1");
  const int n = game.num_firms();
  const double lo = game.interval().lo, width = game.interval().width();
  MonotonicityCheck out;
  out.monotone_on_sample = true;
  out.min_inner_product = std::numeric_limits<double>::infinity();
  out.min_normalized = std::numeric_limits<double>::infinity();
  std::vector<double> x(n), y(n);
  for (int k = 0; k < sample_pairs; ++k) {
    for (int i = 0; i < n; ++i) x[i] = lo + width * UniformUnit(rng);
    for (int i = 0; i < n; ++i) y[i] = lo + width * UniformUnit(rng);
    double dist2 = 0.0;
    for (int i = 0; i < n; ++i) dist2 += (x[i] - y[i]) * (x[i] - y[i]);
    if (dist2 == 0.0) continue;
    const double inner = MonotonicityInnerProduct(game, x, y);
    out.min_inner_product = std::min(out.min_inner_product, inner);
    out.min_normalized = std::min(out.min_normalized, inner / dist2);
    if (!(inner <= -tol * dist2)) out.monotone_on_sample = false;
    ++out.pairs;
  }
  if (out.pairs == 0) {
    out.min_inner_product = 0.0;
    out.min_normalized = 0.0;
    out.monotone_on_sample = false;
  }
  return out;
}

JointDistribution::JointDistribution(std::vector<int> action_counts,
                                     std::vector<double> mass)
    : counts_(std::move(action_counts)), mass_(std::move(mass)) {
  std::int64_t total = 1;
  for (int c : counts_) total *= c;
  Require(static_cast<std::int64_t>(mass_.size()) == total,
          "joint distribution size does not match the action counts");
  double sum = 0.0;
  for (double q : mass_) {
    Require(q >= 0.0 && std::isfinite(q),
            "joint distribution entries must be nonnegative");
    sum += q;
  }
  Require(std::abs(sum - 1.0) <= 1e-9, "joint distribution must sum to 1");
}

JointDistribution JointDistribution::PointMass(const DiscreteGame& game,
                                               std::span<const int> actions) {
  std::vector<double> mass(game.num_profiles(), 0.0);
  mass[game.Flatten(actions)] = 1.0;
  return JointDistribution(game.action_counts(), std::move(mass));
}

double CheckCce(const DiscreteGame& game, const JointDistribution& dist) {
  if (dist.action_counts() != game.action_counts()) {
    throw InvalidInput("distribution dimensions do not match the game");
  }
  const int n = game.num_players();
  double violation = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const int m = game.num_actions(i);
    const std::int64_t stride = game.stride(i);
    std::vector<double> deviation(m, 0.0);
    double realized = 0.0;
    for (std::int64_t flat = 0; flat < game.num_profiles(); ++flat) {
      const double q = dist[flat];
      if (q == 0.0) continue;
      realized += q * game.payoff(flat, i);
      const int own = static_cast<int>(flat / stride % m);
      const std::int64_t base = flat - own * stride;
      for (int a = 0; a < m; ++a) {
        deviation[a] += q * game.payoff(base + a * stride, i);
      }
    }
    for (int a = 0; a < m; ++a) {
      violation = std::max(violation, deviation[a] - realized);
    }
  }
  return violation;
}

DiscreteGame CournotLinearGame(double intercept, double slope,
                               std::span<const double> costs,
                               std::span<const double> quantities) {
  Require(slope > 0.0, "Cournot inverse demand slope must be > 0");
  Require(!quantities.empty(), "Cournot quantity grid is empty");
  const int n = static_cast<int>(costs.size());
  Require(n >= 1, "Cournot game needs at least one firm");
  return DiscreteGame::FromFunction(
      std::vector<int>(n, static_cast<int>(quantities.size())),
      [&](std::span<const int> actions) {
        double total = 0.0;
        for (int a : actions) total += quantities[a];
        const double price = intercept - slope * total;
        std::vector<double> u(n);
        for (int i = 0; i < n; ++i) {
          const double q = quantities[actions[i]];
          u[i] = q * price - costs[i] * q;
        }
        return u;
      });
}

}  // namespace collusion

#ifndef COLLUSION_MARKET_H_
#define COLLUSION_MARKET_H_

#include <span>
#include <utility>
#include <variant>
#include <vector>

namespace collusion {

// Homogeneous good; the cheapest firms split D * (1 - a_min), clamped at 0.
struct AllOrNothingDemand {
  double max_demand = 1.0;
};

// Multinomial logit shares with an outside good.
struct LogitDemand {
  std::vector<double> quality;  // alpha_i, one per firm
  double outside_quality = 0.0;
  double differentiation = 0.25;  // mu
};

// d_i = max(0, intercept - own_slope * a_i + cross_slope * sum_{j != i} a_j).
struct LinearDemand {
  double intercept = 1.0;
  double own_slope = 1.0;
  double cross_slope = 0.0;
};

using DemandModel = std::variant<AllOrNothingDemand, LogitDemand, LinearDemand>;

struct PriceInterval {
  double lo = 0.0;
  double hi = 1.0;
  double width() const { return hi - lo; }
};

// Oligopoly stage game. Immutable after construction; the constructor
// enforces every parameter invariant.
class MarketGame {
 public:
  MarketGame(std::vector<double> costs, DemandModel demand,
             PriceInterval interval);

  int num_firms() const { return static_cast<int>(costs_.size()); }
  const std::vector<double>& costs() const { return costs_; }
  double cost(int firm) const { return costs_[firm]; }
  const DemandModel& demand() const { return demand_; }
  const PriceInterval& interval() const { return interval_; }

  bool is_logit() const { return std::holds_alternative<LogitDemand>(demand_); }
  bool is_all_or_nothing() const {
    return std::holds_alternative<AllOrNothingDemand>(demand_);
  }
  bool is_linear() const {
    return std::holds_alternative<LinearDemand>(demand_);
  }
  // Logit and linear payoffs are differentiable in own price.
  bool is_differentiable() const { return !is_all_or_nothing(); }

  // Symmetric when all costs (and logit qualities) coincide.
  bool is_symmetric() const;

 private:
  std::vector<double> costs_;
  DemandModel demand_;
  PriceInterval interval_;
};

struct MarketOutcome {
  std::vector<double> demands;
  std::vector<double> profits;
};

std::vector<double> Demand(const MarketGame& game,
                           std::span<const double> prices);

// u_i = d_i(a) * (a_i - c_i).
MarketOutcome Payoff(const MarketGame& game, std::span<const double> prices);

// Profit of a single firm; same arithmetic as Payoff(...).profits[firm].
double FirmProfit(const MarketGame& game, std::span<const double> prices,
                  int firm);

class ActionGrid {
 public:
  ActionGrid() = default;
  explicit ActionGrid(std::vector<double> points);

  int size() const { return static_cast<int>(points_.size()); }
  double operator[](int index) const { return points_[index]; }
  const std::vector<double>& points() const { return points_; }
  double lo() const { return points_.front(); }
  double hi() const { return points_.back(); }
  double step() const { return (hi() - lo()) / (size() - 1); }

  // Index of the grid point nearest to price.
  int Nearest(double price) const;

 private:
  std::vector<double> points_;
};

// m equally spaced points on [lo, hi], endpoints included exactly.
ActionGrid MakeGrid(double lo, double hi, int m);

// (pN - xi (pM - pN), pM + xi (pM - pN)).
std::pair<double, double> BoundGridToEquilibria(double nash, double monopoly,
                                                double xi);

}  // namespace collusion

#endif  // COLLUSION_MARKET_H_

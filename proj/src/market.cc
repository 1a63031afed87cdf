#include "collusion/market.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "collusion/common.h"

namespace collusion {
namespace {

// Relative tolerance that defines a price tie for off-grid profiles. Grid
// points are never this close, so on grids this is exact equality.
constexpr double kTieTolerance = 1e-12;

void CheckProfile(const MarketGame& game, std::span<const double> prices) {
  if (static_cast<int>(prices.size()) != game.num_firms()) {
    throw InvalidInput("price profile has " + std::to_string(prices.size()) +
                       " entries, game has " +
                       std::to_string(game.num_firms()) + " firms");
  }
  for (double p : prices) {
    if (!std::isfinite(p)) throw InvalidInput("price profile is not finite");
  }
}

std::vector<double> AllOrNothingShares(const AllOrNothingDemand& model,
                                       std::span<const double> prices) {
  const int n = static_cast<int>(prices.size());
  const double a_min = *std::min_element(prices.begin(), prices.end());
  const double slack = kTieTolerance * std::max(1.0, std::abs(a_min));
  int n_min = 0;
  for (double p : prices) {
    if (p - a_min <= slack) ++n_min;
  }
  std::vector<double> d(n, 0.0);
  if (a_min >= 1.0) return d;
  for (int i = 0; i < n; ++i) {
    if (prices[i] - a_min <= slack) {
      d[i] = model.max_demand / n_min * (1.0 - a_min);
    }
  }
  return d;
}

std::vector<double> LogitShares(const LogitDemand& model,
                                std::span<const double> prices) {
  const int n = static_cast<int>(prices.size());
  const double mu = model.differentiation;
  std::vector<double> x(n);
  double top = model.outside_quality / mu;
  for (int i = 0; i < n; ++i) {
    x[i] = (model.quality[i] - prices[i]) / mu;
    top = std::max(top, x[i]);
  }
  // Shift by the largest exponent; the ratio is unchanged.
  double denom = std::exp(model.outside_quality / mu - top);
  for (int i = 0; i < n; ++i) {
    x[i] = std::exp(x[i] - top);
    denom += x[i];
  }
  for (int i = 0; i < n; ++i) x[i] /= denom;
  return x;
}

std::vector<double> LinearQuantities(const LinearDemand& model,
                                     std::span<const double> prices) {
  const int n = static_cast<int>(prices.size());
  double total = 0.0;
  for (double p : prices) total += p;
  std::vector<double> d(n);
  for (int i = 0; i < n; ++i) {
    const double others = total - prices[i];
    d[i] = std::max(0.0, model.intercept - model.own_slope * prices[i] +
                             model.cross_slope * others);
  }
  return d;
}

}  // namespace

MarketGame::MarketGame(std::vector<double> costs, DemandModel demand,
                       PriceInterval interval)
    : costs_(std::move(costs)), demand_(std::move(demand)),
      interval_(interval) {
  const int n = num_firms();
  Require(n >= 1, "market game needs at least one firm");
  for (double c : costs_) {
    Require(std::isfinite(c) && c >= 0.0, "marginal costs must be >= 0");
  }
  Require(std::isfinite(interval_.lo) && std::isfinite(interval_.hi),
          "price interval must be finite");
  Require(interval_.lo < interval_.hi, "price interval needs lo < hi");

  if (const auto* aon = std::get_if<AllOrNothingDemand>(&demand_)) {
    Require(aon->max_demand > 0.0, "all-or-nothing D must be > 0");
    Require(n >= 2, "all-or-nothing demand needs at least two firms");
  } else if (const auto* logit = std::get_if<LogitDemand>(&demand_)) {
    Require(static_cast<int>(logit->quality.size()) == n,
            "logit quality vector length must equal the firm count");
    for (double a : logit->quality) {
      Require(std::isfinite(a) && a > 0.0, "logit qualities must be > 0");
    }
    Require(std::isfinite(logit->outside_quality),
            "logit outside quality must be finite");
    Require(logit->differentiation > 0.0, "logit mu must be > 0");
  } else {
    const auto& lin = std::get<LinearDemand>(demand_);
    Require(lin.intercept > 0.0, "linear intercept must be > 0");
    Require(lin.own_slope > 0.0, "linear own_slope must be > 0");
    Require(lin.cross_slope >= 0.0, "linear cross_slope must be >= 0");
    Require(lin.cross_slope * (n - 1) < lin.own_slope,
            "linear demand needs cross_slope * (n - 1) < own_slope");
  }
}

bool MarketGame::is_symmetric() const {
  const auto equal_all = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(),
                       [&](double x) { return x == v.front(); });
  };
  if (!equal_all(costs_)) return false;
  if (const auto* logit = std::get_if<LogitDemand>(&demand_)) {
    return equal_all(logit->quality);
  }
  return true;
}

std::vector<double> Demand(const MarketGame& game,
                           std::span<const double> prices) {
  CheckProfile(game, prices);
  return std::visit(
      [&](const auto& model) -> std::vector<double> {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, AllOrNothingDemand>) {
          return AllOrNothingShares(model, prices);
        } else if constexpr (std::is_same_v<T, LogitDemand>) {
          return LogitShares(model, prices);
        } else {
          return LinearQuantities(model, prices);
        }
      },
      game.demand());
}

MarketOutcome Payoff(const MarketGame& game, std::span<const double> prices) {
  MarketOutcome out;
  out.demands = Demand(game, prices);
  out.profits.resize(out.demands.size());
  for (std::size_t i = 0; i < out.demands.size(); ++i) {
    out.profits[i] = out.demands[i] * (prices[i] - game.cost(i));
  }
  return out;
}

double FirmProfit(const MarketGame& game, std::span<const double> prices,
                  int firm) {
  const std::vector<double> d = Demand(game, prices);
  return d[firm] * (prices[firm] - game.cost(firm));
}

ActionGrid::ActionGrid(std::vector<double> points) : points_(std::move(points)) {
  Require(points_.size() >= 2, "action grid needs at least two points");
  for (std::size_t k = 1; k < points_.size(); ++k) {
    Require(points_[k - 1] < points_[k], "action grid must be increasing");
  }
}

int ActionGrid::Nearest(double price) const {
  auto it = std::lower_bound(points_.begin(), points_.end(), price);
  if (it == points_.begin()) return 0;
  if (it == points_.end()) return size() - 1;
  const int hi = static_cast<int>(it - points_.begin());
  return (points_[hi] - price < price - points_[hi - 1]) ? hi : hi - 1;
}

ActionGrid MakeGrid(double lo, double hi, int m) {
  Require(m >= 2, "grid needs m >= 2");
  Require(std::isfinite(lo) && std::isfinite(hi) && lo < hi,
          "grid needs a finite interval with lo < hi");
  std::vector<double> points(m);
  for (int k = 0; k < m; ++k) {
    points[k] = lo + (hi - lo) * static_cast<double>(k) / (m - 1);
  }
  points.front() = lo;
  points.back() = hi;
  return ActionGrid(std::move(points));
}

std::pair<double, double> BoundGridToEquilibria(double nash, double monopoly,
                                                double xi) {
  Require(nash < monopoly, "grid bounds need nash price < monopoly price");
  Require(xi >= 0.0, "grid extension xi must be >= 0");
  const double gap = monopoly - nash;
  return {nash - xi * gap, monopoly + xi * gap};
}

}  // namespace collusion

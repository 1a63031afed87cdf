#ifndef COLLUSION_TESTS_TEST_GAMES_H_
#define COLLUSION_TESTS_TEST_GAMES_H_

#include <cmath>
#include <vector>

#include "collusion/equilibrium.h"
#include "collusion/market.h"

namespace collusion::testing {

// alpha = (2, 2), alpha0 = 0, mu = 0.25, c = (1, 1).
inline MarketGame LogitDuopoly(double lo = 1.0, double hi = 2.5) {
  return MarketGame({1.0, 1.0}, LogitDemand{{2.0, 2.0}, 0.0, 0.25}, {lo, hi});
}

inline MarketGame AllOrNothingDuopoly(double c0, double c1) {
  return MarketGame({c0, c1}, AllOrNothingDemand{1.0}, {0.0, 1.0});
}

// Textbook logit share evaluated without the max-shift, in long double.
inline long double LogitShareOracle(const std::vector<double>& alpha,
                                    double alpha0, double mu,
                                    const std::vector<double>& prices,
                                    int firm) {
  long double denom = std::exp(static_cast<long double>(alpha0) / mu);
  for (std::size_t j = 0; j < prices.size(); ++j) {
    denom += std::exp(static_cast<long double>(alpha[j] - prices[j]) / mu);
  }
  return std::exp(static_cast<long double>(alpha[firm] - prices[firm]) / mu) /
         denom;
}

// Brute-force maximizer of f over `points` equally spaced samples.
template <class F>
double GridArgmax(F f, double lo, double hi, int points) {
  double best_x = lo, best_f = f(lo);
  for (int k = 1; k < points; ++k) {
    const double x = lo + (hi - lo) * k / (points - 1);
    const double v = f(x);
    if (v > best_f) {
      best_f = v;
      best_x = x;
    }
  }
  return best_x;
}

// Matching pennies with the given win/lose payoffs for player 0.
inline DiscreteGame MatchingPennies(double win = 1.0, double lose = -1.0) {
  // profile order: (0,0), (1,0), (0,1), (1,1)
  return DiscreteGame({2, 2}, {win, lose, lose, win, lose, win, win, lose});
}

// Action 0 = cooperate, 1 = defect.
inline DiscreteGame PrisonersDilemma() {
  // (C,C)=(3,3), (D,C)=(5,0), (C,D)=(0,5), (D,D)=(1,1)
  return DiscreteGame({2, 2}, {3, 3, 5, 0, 0, 5, 1, 1});
}

}  // namespace collusion::testing

#endif  // COLLUSION_TESTS_TEST_GAMES_H_

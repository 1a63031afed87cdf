#include <cmath>
#include <cstring>
#include <random>

#include "collusion/market.h"
#include "doctest.h"
#include "test_games.h"

namespace collusion {
namespace {

using testing::AllOrNothingDuopoly;
using testing::LogitDuopoly;
using testing::LogitShareOracle;

TEST_CASE("all-or-nothing demand goes to the unique cheapest firm") {
  const MarketGame game = AllOrNothingDuopoly(0.0, 0.0);
  const std::vector<double> d = Demand(game, std::vector<double>{0.5, 0.6});
  CHECK(d[0] == 0.5);
  CHECK(d[1] == 0.0);
  const MarketOutcome out = Payoff(game, std::vector<double>{0.5, 0.6});
  CHECK(out.profits[0] == 0.25);
  CHECK(out.profits[1] == 0.0);
}

TEST_CASE("all-or-nothing ties split the market equally") {
  const MarketGame game = AllOrNothingDuopoly(0.0, 0.0);
  const std::vector<double> d = Demand(game, std::vector<double>{0.5, 0.5});
  CHECK(d[0] == 0.25);
  CHECK(d[1] == 0.25);
}

TEST_CASE("all-or-nothing demand is clamped above a price of one") {
  const MarketGame game(std::vector<double>{0.0, 0.0}, AllOrNothingDemand{2.0},
                        {0.0, 2.0});
  const std::vector<double> d = Demand(game, std::vector<double>{1.5, 1.7});
  CHECK(d[0] == 0.0);
  CHECK(d[1] == 0.0);
}

TEST_CASE("all-or-nothing: off-grid near-ties use a relative tolerance") {
  const MarketGame game = AllOrNothingDuopoly(0.0, 0.0);
  const std::vector<double> d =
      Demand(game, std::vector<double>{0.5, 0.5 + 1e-14});
  CHECK(d[0] == d[1]);
  const std::vector<double> e =
      Demand(game, std::vector<double>{0.5, 0.5 + 1e-9});
  CHECK(e[1] == 0.0);
}

TEST_CASE("all-or-nothing total served demand is D (1 - a_min)") {
  const MarketGame game(std::vector<double>{0.1, 0.1, 0.1},
                        AllOrNothingDemand{3.0}, {0.0, 1.0});
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> pick(0, 10);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(3);
    for (double& x : p) x = pick(rng) / 10.0;
    const std::vector<double> d = Demand(game, p);
    const double a_min = *std::min_element(p.begin(), p.end());
    double total = 0.0;
    for (int i = 0; i < 3; ++i) {
      if (p[i] != a_min) CHECK(d[i] == 0.0);
      total += d[i];
    }
    CHECK(total == doctest::Approx(3.0 * (1.0 - a_min)).epsilon(1e-14));
  }
}

TEST_CASE("logit demand matches a high-precision evaluation") {
  const MarketGame game = LogitDuopoly();
  const std::vector<double> p{1.5, 1.5};
  const std::vector<double> d = Demand(game, p);
  const long double oracle = LogitShareOracle({2, 2}, 0.0, 0.25, p, 0);
  CHECK(std::abs(d[0] - static_cast<double>(oracle)) < 1e-15);
  CHECK(d[0] == doctest::Approx(0.4683).epsilon(1e-4));
  CHECK(d[0] == d[1]);

  const MarketOutcome out = Payoff(game, p);
  CHECK(out.profits[0] ==
        doctest::Approx(static_cast<double>(oracle) * 0.5).epsilon(1e-14));
  CHECK(out.profits[0] == doctest::Approx(0.23415).epsilon(1e-4));
}

TEST_CASE("logit shares leave the outside good a positive share") {
  const MarketGame game = LogitDuopoly(0.0, 3.0);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::vector<double> p{u(rng), u(rng)};
    const std::vector<double> d = Demand(game, p);
    CHECK(d[0] > 0.0);
    CHECK(d[1] > 0.0);
    CHECK(d[0] + d[1] < 1.0);
    const long double o0 = LogitShareOracle({2, 2}, 0.0, 0.25, p, 0);
    CHECK(std::abs(d[0] - static_cast<double>(o0)) < 1e-14);
  }
}

TEST_CASE("logit limit: mu -> 0 sends inside demand to the cheapest firm") {
  const MarketGame game({1.0, 1.0}, LogitDemand{{2.0, 2.0}, 0.0, 1e-3},
                        {1.0, 2.5});
  const std::vector<double> d = Demand(game, std::vector<double>{1.49, 1.5});
  CHECK(d[0] / (d[0] + d[1]) > 0.999);
}

TEST_CASE("logit monotonicity in own and rival prices") {
  const MarketGame game({1.0, 1.0, 1.0},
                        LogitDemand{{2.0, 1.5, 2.5}, 0.3, 0.4}, {0.5, 3.0});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.5, 2.9);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> p{u(rng), u(rng), u(rng)};
    const int i = trial % 3;
    const std::vector<double> before = Demand(game, p);
    p[i] += 0.05;
    const std::vector<double> after = Demand(game, p);
    for (int j = 0; j < 3; ++j) {
      if (j == i) {
        CHECK(after[j] < before[j]);
      } else {
        CHECK(after[j] > before[j]);
      }
    }
  }
}

TEST_CASE("linear demand is clamped at zero") {
  const MarketGame game({0.0, 0.0}, LinearDemand{1.0, 1.0, 0.5}, {0.0, 3.0});
  const std::vector<double> d = Demand(game, std::vector<double>{0.4, 0.2});
  CHECK(d[0] == doctest::Approx(1.0 - 0.4 + 0.5 * 0.2));
  CHECK(d[1] == doctest::Approx(1.0 - 0.2 + 0.5 * 0.4));
  const std::vector<double> z = Demand(game, std::vector<double>{2.9, 0.0});
  CHECK(z[0] == 0.0);
}

TEST_CASE("payoff at marginal cost is zero") {
  const MarketGame logit({1.0, 1.2}, LogitDemand{{2.0, 2.0}, 0.0, 0.25},
                         {0.5, 3.0});
  const MarketOutcome out = Payoff(logit, std::vector<double>{1.0, 1.2});
  CHECK(out.profits[0] == 0.0);
  CHECK(out.profits[1] == 0.0);
}

TEST_CASE("payoff is a pure function") {
  const MarketGame game = LogitDuopoly();
  const std::vector<double> p{1.61, 1.83};
  const MarketOutcome a = Payoff(game, p);
  const MarketOutcome b = Payoff(game, p);
  CHECK(std::memcmp(a.profits.data(), b.profits.data(), 2 * sizeof(double)) ==
        0);
  CHECK(FirmProfit(game, p, 1) == a.profits[1]);
}

TEST_CASE("invalid games and profiles are rejected") {
  CHECK_THROWS_AS(Demand(LogitDuopoly(), std::vector<double>{1.5}),
                  InvalidInput);
  CHECK_THROWS_AS(MarketGame({1.0, 1.0}, LogitDemand{{2.0}, 0.0, 0.25},
                             {1.0, 2.0}),
                  InvalidInput);
  CHECK_THROWS_AS(MarketGame({1.0, 1.0}, LogitDemand{{2.0, 2.0}, 0.0, 0.0},
                             {1.0, 2.0}),
                  InvalidInput);
  CHECK_THROWS_AS(
      MarketGame({0.0, 0.0}, AllOrNothingDemand{0.0}, {0.0, 1.0}),
      InvalidInput);
  CHECK_THROWS_AS(MarketGame({0.0, 0.0, 0.0}, LinearDemand{1.0, 1.0, 0.5},
                             {0.0, 1.0}),
                  InvalidInput);
  CHECK_THROWS_AS(MarketGame({0.0, 0.0}, AllOrNothingDemand{1.0}, {1.0, 0.5}),
                  InvalidInput);
}

TEST_CASE("make_grid spaces points evenly with exact endpoints") {
  const ActionGrid two = MakeGrid(0.0, 1.0, 2);
  CHECK(two.points() == std::vector<double>{0.0, 1.0});
  const ActionGrid five = MakeGrid(0.0, 1.0, 5);
  CHECK(five.points() == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  const ActionGrid fifteen = MakeGrid(1.43, 1.97, 15);
  CHECK(fifteen.size() == 15);
  CHECK(fifteen[0] == 1.43);
  CHECK(fifteen[14] == 1.97);
  CHECK(fifteen.step() == doctest::Approx(0.0385714285714).epsilon(1e-10));
  for (int k = 1; k < 15; ++k) CHECK(fifteen[k] > fifteen[k - 1]);
  CHECK_THROWS_AS(MakeGrid(0.0, 1.0, 1), InvalidInput);
  CHECK_THROWS_AS(MakeGrid(1.0, 0.0, 3), InvalidInput);
}

TEST_CASE("grid bounds bracket both benchmarks") {
  auto [lo0, hi0] = BoundGridToEquilibria(1.0, 2.0, 0.0);
  CHECK(lo0 == 1.0);
  CHECK(hi0 == 2.0);
  auto [lo1, hi1] = BoundGridToEquilibria(1.0, 2.0, 0.1);
  CHECK(lo1 == doctest::Approx(0.9));
  CHECK(hi1 == doctest::Approx(2.1));
  auto [lo2, hi2] = BoundGridToEquilibria(1.473, 1.925, 0.1);
  CHECK(lo2 == doctest::Approx(1.4278).epsilon(1e-12));
  CHECK(hi2 == doctest::Approx(1.9702).epsilon(1e-12));
  CHECK_THROWS_AS(BoundGridToEquilibria(2.0, 1.0, 0.1), InvalidInput);
  CHECK_THROWS_AS(BoundGridToEquilibria(1.0, 1.0, 0.1), InvalidInput);
}

}  // namespace
}  // namespace collusion

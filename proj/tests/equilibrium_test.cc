#include <algorithm>
#include <cmath>
#include <random>

#include "collusion/equilibrium.h"
#include "doctest.h"
#include "test_games.h"

namespace collusion {
namespace {

using testing::AllOrNothingDuopoly;
using testing::LogitDuopoly;
using testing::GridArgmax;
using testing::MatchingPennies;
using testing::PrisonersDilemma;

// Frozen from an independent bracketed root solve of the first-order
// conditions; the grid-search oracles below confirm them to a grid step.
constexpr double kCalvanoNash = 1.4729266600306226;
constexpr double kCalvanoMonopoly = 1.9249809190177618;

TEST_CASE("logit best response is a fixed point at the Nash price") {
  const MarketGame game = LogitDuopoly();
  const std::vector<double> p{0.0, 1.473};
  const double br = BestResponseLogit(game, 0, p);
  // Oracle: brute-force 10^4-point grid search on own profit.
  const double oracle = GridArgmax(
      [&](double x) { return FirmProfit(game, std::vector<double>{x, 1.473}, 0); },
      1.0, 2.5, 10000);
  CHECK(std::abs(br - oracle) <= 1.5 / 9999);
  CHECK(br == doctest::Approx(1.473).epsilon(1e-3));
  std::vector<double> at{br, 1.473};
  CHECK(LogitNashFocResidual(game, at, 0) < 1e-12);
}

TEST_CASE("logit best response to an absent rival is the one-firm optimum") {
  const MarketGame game = LogitDuopoly(1.0, 30.0);
  const double br = BestResponseLogit(game, 0, std::vector<double>{0.0, 30.0});
  const MarketGame alone({1.0}, LogitDemand{{2.0}, 0.0, 0.25}, {1.0, 2.5});
  const double oracle = GridArgmax(
      [&](double x) { return FirmProfit(alone, std::vector<double>{x}, 0); },
      1.0, 2.5, 10000);
  CHECK(std::abs(br - oracle) <= 1.5 / 9999);
}

TEST_CASE("logit best response rejects other demand models") {
  CHECK_THROWS_AS(
      BestResponseLogit(AllOrNothingDuopoly(0, 0), 0, std::vector<double>{0, 0}),
      UnsupportedModel);
  CHECK_THROWS_AS(SolveNashLogit(AllOrNothingDuopoly(0, 0)), UnsupportedModel);
}

TEST_CASE("Nash solver on the symmetric logit duopoly") {
  const MarketGame game = LogitDuopoly();
  const EquilibriumResult r = SolveNashLogit(game, 1e-12);
  REQUIRE(r.converged);
  CHECK(r.residual <= 1e-12);
  CHECK(r.foc_residual < 1e-8);
  CHECK(r.prices[0] == r.prices[1]);
  CHECK(r.prices[0] == doctest::Approx(kCalvanoNash).epsilon(1e-10));
}

TEST_CASE("Nash prices agree with brute-force discrete Nash on a fine grid") {
  const MarketGame game = LogitDuopoly();
  const EquilibriumResult r = SolveNashLogit(game);
  const ActionGrid grid = MakeGrid(1.0, 2.5, 1000);
  const auto equilibria = BruteForceDiscreteNash(Discretize(game, grid));
  REQUIRE(!equilibria.empty());
  for (const auto& eq : equilibria) {
    for (int i = 0; i < 2; ++i) {
      CHECK(std::abs(grid[eq[i]] - r.prices[i]) <= grid.step() * (1 + 1e-9));
    }
  }
  // And the other direction: the grid point nearest the solver output is an
  // equilibrium or adjacent to one.
  const int k = grid.Nearest(r.prices[0]);
  const bool near = std::any_of(equilibria.begin(), equilibria.end(),
                                [&](const std::vector<int>& eq) {
                                  return std::abs(eq[0] - k) <= 1 &&
                                         std::abs(eq[1] - k) <= 1;
                                });
  CHECK(near);
}

TEST_CASE("Nash prices shift one-for-one under a joint cost/quality shift") {
  const EquilibriumResult base = SolveNashLogit(LogitDuopoly(), 1e-12);
  const MarketGame shifted({1.5, 1.5}, LogitDemand{{2.5, 2.5}, 0.0, 0.25},
                           {1.5, 3.0});
  const EquilibriumResult moved = SolveNashLogit(shifted, 1e-12);
  REQUIRE(moved.converged);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(moved.prices[i] - base.prices[i] - 0.5) < 1e-8);
  }
}

TEST_CASE("Nash solver on an asymmetric logit triopoly") {
  const MarketGame game({1.0, 0.8, 1.2}, LogitDemand{{2.0, 1.8, 2.4}, 0.2, 0.3},
                        {0.5, 4.0});
  const EquilibriumResult r = SolveNashLogit(game, 1e-11);
  REQUIRE(r.converged);
  CHECK(r.foc_residual < 1e-8);
  for (int i = 0; i < 3; ++i) {
    const double oracle = GridArgmax(
        [&](double x) {
          std::vector<double> p = r.prices;
          p[i] = x;
          return FirmProfit(game, p, i);
        },
        0.5, 4.0, 20000);
    CHECK(std::abs(oracle - r.prices[i]) <= 3.5 / 19999);
  }
}

TEST_CASE("non-convergence is reported, not thrown") {
  const EquilibriumResult r = SolveNashLogit(LogitDuopoly(), 1e-14, 1);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 1);
}

TEST_CASE("monopoly solver on the symmetric logit duopoly") {
  const MarketGame game = LogitDuopoly();
  const EquilibriumResult r = SolveMonopolyLogit(game, 1e-12);
  REQUIRE(r.converged);
  CHECK(r.foc_residual < 1e-8);
  CHECK(r.prices[0] == r.prices[1]);
  const double oracle = GridArgmax(
      [&](double x) {
        const MarketOutcome o = Payoff(game, std::vector<double>{x, x});
        return o.profits[0] + o.profits[1];
      },
      1.0, 2.5, 10000);
  CHECK(std::abs(r.prices[0] - oracle) <= 1.5 / 9999);
  CHECK(r.prices[0] == doctest::Approx(kCalvanoMonopoly).epsilon(1e-10));
  const EquilibriumResult nash = SolveNashLogit(game);
  CHECK(r.prices[0] > nash.prices[0]);
  CHECK(r.prices[1] > nash.prices[1]);
}

TEST_CASE("asymmetric logit monopoly equalizes markups") {
  // Interior joint-profit optimum under logit has a common markup; that is
  // an independent check on coordinate ascent.
  const MarketGame game({1.0, 1.3}, LogitDemand{{2.0, 2.6}, 0.0, 0.25},
                        {0.5, 5.0});
  const EquilibriumResult r = SolveMonopolyLogit(game, 1e-11);
  REQUIRE(r.converged);
  CHECK(r.foc_residual < 1e-8);
  CHECK(std::abs((r.prices[0] - 1.0) - (r.prices[1] - 1.3)) < 1e-8);
}

TEST_CASE("single-firm monopoly coincides with single-firm Nash") {
  const MarketGame game({1.0}, LogitDemand{{2.0}, 0.0, 0.25}, {1.0, 2.5});
  const EquilibriumResult nash = SolveNashLogit(game, 1e-12);
  const EquilibriumResult mono = SolveMonopolyLogit(game, 1e-12);
  CHECK(std::abs(nash.prices[0] - mono.prices[0]) < 1e-10);
}

TEST_CASE("solvers are deterministic") {
  const MarketGame game = LogitDuopoly();
  CHECK(SolveNashLogit(game).prices == SolveNashLogit(game).prices);
  CHECK(SolveMonopolyLogit(game).prices == SolveMonopolyLogit(game).prices);
}

TEST_CASE("all-or-nothing Nash benchmarks") {
  CHECK(NashAllOrNothing(AllOrNothingDuopoly(0.3, 0.3)) ==
        std::vector<double>{0.3, 0.3});
  CHECK(NashAllOrNothing(AllOrNothingDuopoly(0.2, 0.5)) ==
        std::vector<double>{0.5, 0.5});
  const MarketGame three({0.1, 0.4, 0.9}, AllOrNothingDemand{1.0}, {0.0, 1.0});
  CHECK(NashAllOrNothing(three) == std::vector<double>{0.4, 0.4, 0.4});
  CHECK_THROWS_AS(NashAllOrNothing(LogitDuopoly()), UnsupportedModel);
}

TEST_CASE("all-or-nothing triopoly: the low-cost firm serves at most at 0.4") {
  const MarketGame three({0.1, 0.4, 0.9}, AllOrNothingDemand{1.0}, {0.0, 1.0});
  const ActionGrid grid = MakeGrid(0.0, 1.0, 101);
  const auto equilibria = BruteForceDiscreteNash(Discretize(three, grid));
  REQUIRE(!equilibria.empty());
  // Weakly dominated below-cost prices by the idle firms create many
  // equilibria; in all of them firm 0 alone serves, priced no higher than
  // the second-lowest cost.
  for (const auto& eq : equilibria) {
    CHECK(eq[0] < eq[1]);
    CHECK(eq[0] < eq[2]);
    CHECK(grid[eq[0]] <= 0.4 + 1e-12);
  }
  // The limit-pricing profile one step below the rival's cost is among them.
  const bool limit = std::any_of(
      equilibria.begin(), equilibria.end(), [&](const std::vector<int>& eq) {
        return eq[0] == grid.Nearest(0.39) && eq[1] == grid.Nearest(0.4);
      });
  CHECK(limit);
}

TEST_CASE("linear demand benchmarks satisfy their first-order conditions") {
  const MarketGame game({0.2, 0.2}, LinearDemand{1.0, 1.0, 0.5}, {0.0, 2.0});
  const EquilibriumResult nash = SolveNashLinear(game);
  const EquilibriumResult mono = SolveMonopolyLinear(game);
  CHECK(nash.converged);
  for (int i = 0; i < 2; ++i) {
    const double oracle = GridArgmax(
        [&](double x) {
          std::vector<double> p = nash.prices;
          p[i] = x;
          return FirmProfit(game, p, i);
        },
        0.0, 2.0, 20001);
    CHECK(std::abs(oracle - nash.prices[i]) <= 1e-4 + 1e-12);
  }
  const double joint = GridArgmax(
      [&](double x) {
        const MarketOutcome o = Payoff(game, std::vector<double>{x, x});
        return o.profits[0] + o.profits[1];
      },
      0.0, 2.0, 20001);
  CHECK(std::abs(joint - mono.prices[0]) <= 1e-4 + 1e-12);
  CHECK(mono.prices[0] > nash.prices[0]);
}

TEST_CASE("discretize tabulates payoffs at every grid profile") {
  const MarketGame game = AllOrNothingDuopoly(0.0, 0.0);
  const ActionGrid grid(std::vector<double>{0.4, 0.6});
  const DiscreteGame dg = Discretize(game, grid);
  CHECK(dg.num_profiles() == 4);
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const MarketOutcome o =
          Payoff(game, std::vector<double>{grid[a], grid[b]});
      const std::vector<int> idx{a, b};
      CHECK(dg.payoff(idx, 0) == o.profits[0]);
      CHECK(dg.payoff(idx, 1) == o.profits[1]);
    }
  }
  CHECK(dg.payoff(std::vector<int>{1, 1}, 0) == doctest::Approx(0.12));
  CHECK(dg.payoff(std::vector<int>{1, 1}, 1) == doctest::Approx(0.12));
  CHECK_THROWS_AS(Discretize(game, MakeGrid(0.0, 1.0, 100), 1000),
                  InvalidInput);
  CHECK_THROWS_AS(Discretize(game, MakeGrid(0.0, 2.0, 3)), InvalidInput);
}

TEST_CASE("brute-force Nash on textbook games") {
  const auto pd = BruteForceDiscreteNash(PrisonersDilemma());
  REQUIRE(pd.size() == 1);
  CHECK(pd[0] == std::vector<int>{1, 1});
  CHECK(BruteForceDiscreteNash(MatchingPennies()).empty());
}

TEST_CASE("exact potential: identical interest and matching pennies") {
  const DiscreteGame common({2, 3},
                            {1, 1, 4, 4, -2, -2, 0, 0, 7, 7, 3, 3});
  const PotentialCheck c = CheckExactPotential(common);
  CHECK(c.is_potential);
  CHECK(c.max_defect == 0.0);

  // Each leg of the single four-cycle changes the deviator's payoff by 2.
  const PotentialCheck pennies = CheckExactPotential(MatchingPennies(1, -1));
  CHECK_FALSE(pennies.is_potential);
  CHECK(pennies.max_defect == 8.0);
  const PotentialCheck win_lose = CheckExactPotential(MatchingPennies(1, 0));
  CHECK_FALSE(win_lose.is_potential);
  CHECK(win_lose.max_defect == 4.0);
}

TEST_CASE("exact potential: linear Cournot duopoly passes") {
  std::vector<double> q(21);
  for (int k = 0; k < 21; ++k) q[k] = 0.05 * k;
  const std::vector<double> costs{0.1, 0.25};
  const PotentialCheck c =
      CheckExactPotential(CournotLinearGame(2.0, 1.0, costs, q));
  CHECK(c.is_potential);
  CHECK(c.max_defect < 1e-9);
}

TEST_CASE("potential defect is invariant to per-player payoff constants") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> pay(3 * 3 * 2);
    for (double& x : pay) x = std::round(u(rng) * 8) / 8;
    const DiscreteGame g({3, 3}, pay);
    const double k = std::round(u(rng) * 4) / 4;
    for (std::size_t j = 1; j < pay.size(); j += 2) pay[j] += k;
    const DiscreteGame h({3, 3}, pay);
    CHECK(CheckExactPotential(g).max_defect ==
          doctest::Approx(CheckExactPotential(h).max_defect).epsilon(1e-12));
  }
}

TEST_CASE("monotonicity: degenerate pairs are excluded") {
  const MarketGame game = LogitDuopoly();
  const std::vector<double> x{1.6, 1.7};
  CHECK(MonotonicityInnerProduct(game, x, x) == 0.0);
  std::mt19937_64 rng(1);
  const MonotonicityCheck m = CheckMonotonicity(game, 50, rng);
  CHECK(m.pairs == 50);
}

TEST_CASE("monotonicity: single-firm logit on its concave range") {
  const MarketGame game({1.0}, LogitDemand{{2.0}, 0.0, 0.25}, {1.0, 2.1});
  std::mt19937_64 rng(2);
  const MonotonicityCheck m = CheckMonotonicity(game, 500, rng);
  CHECK(m.monotone_on_sample);
  CHECK(m.min_inner_product < 0.0);
  // Finite-difference oracle: second derivative is negative on the range.
  for (double p = 1.05; p < 2.1; p += 0.05) {
    const double h = 1e-4;
    auto u = [&](double x) { return FirmProfit(game, std::vector<double>{x}, 0); };
    CHECK((u(p + h) - 2 * u(p) + u(p - h)) / (h * h) < 0.0);
  }
}

TEST_CASE("monotonicity: independent linear markets are monotone") {
  const MarketGame game({0.0, 0.0}, LinearDemand{1.0, 1.0, 0.0}, {0.0, 1.0});
  std::mt19937_64 rng(3);
  const MonotonicityCheck m = CheckMonotonicity(game, 500, rng);
  CHECK(m.monotone_on_sample);
  // Analytic: each own-payoff is concave with second derivative -2 own_slope.
  CHECK(m.min_normalized == doctest::Approx(-2.0).epsilon(1e-4));
  CHECK_THROWS_AS(CheckMonotonicity(AllOrNothingDuopoly(0, 0), 5, rng),
                  UnsupportedModel);
}

TEST_CASE("CCE violation of textbook distributions") {
  const DiscreteGame pd = PrisonersDilemma();
  CHECK(CheckCce(pd, JointDistribution::PointMass(pd, std::vector<int>{1, 1})) <=
        0.0);
  CHECK(CheckCce(pd, JointDistribution::PointMass(pd, std::vector<int>{0, 0})) ==
        2.0);
  const DiscreteGame mp = MatchingPennies();
  const JointDistribution uniform({2, 2}, {0.25, 0.25, 0.25, 0.25});
  CHECK(CheckCce(mp, uniform) == 0.0);
  CHECK_THROWS_AS(CheckCce(mp, JointDistribution({2, 3}, {1, 0, 0, 0, 0, 0})),
                  InvalidInput);
  CHECK_THROWS_AS(JointDistribution({2, 2}, {0.5, 0.5, 0.5, 0.0}),
                  InvalidInput);
}

TEST_CASE("point masses on pure equilibria are CCEs") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> u(-4, 4);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> pay(3 * 4 * 2);
    for (double& x : pay) x = u(rng);
    const DiscreteGame g({3, 4}, pay);
    for (const auto& eq : BruteForceDiscreteNash(g)) {
      CHECK(CheckCce(g, JointDistribution::PointMass(g, eq)) <= 0.0);
      ++checked;
    }
  }
  CHECK(checked > 0);
}

}  // namespace
}  // namespace collusion

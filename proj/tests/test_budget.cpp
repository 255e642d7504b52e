#include <catch2/catch_amalgamated.hpp>

#include "coinpop/budget.hpp"
#include "support/oracles.hpp"

using namespace coinpop;
using oracles::BudgetedSystem;
using oracles::Rational;

TEST_CASE("run_until_budget: single unit-cost outcome fills the budget") {
  RngStream rng(50, 0);
  auto sampler = [](RngStream&) { return Outcome{{0, 0}, 1}; };
  auto tally = run_until_budget(sampler, 5, rng);
  REQUIRE(tally.counts[{0, 0}] == 5);
  REQUIRE(tally.consumed == 5);
  REQUIRE(!tally.discarded.has_value());
}

TEST_CASE("run_until_budget: zero budget yields an empty tally") {
  RngStream rng(50, 1);
  auto sampler = [](RngStream&) { return Outcome{{0, 0}, 1}; };
  auto tally = run_until_budget(sampler, 0, rng);
  REQUIRE(tally.total_count() == 0);
  REQUIRE(frequency_estimate(tally).empty);
}

TEST_CASE("run_until_budget: over-budget outcome is discarded and recorded") {
  RngStream rng(50, 2);
  auto sampler = [](RngStream&) { return Outcome{{1, 1}, 3}; };
  auto tally = run_until_budget(sampler, 7, rng);
  REQUIRE(tally.counts[{1, 1}] == 2);
  REQUIRE(tally.consumed == 6);
  REQUIRE(tally.discarded.has_value());
  // consumed plus the discarded outcome's cost overshoots the budget
  REQUIRE(tally.consumed + 3 > tally.budget);
}

TEST_CASE("frequency_estimate: plain ratios") {
  OutcomeTally tally;
  tally.counts[{0, 0}] = 3;
  tally.counts[{1, 1}] = 1;
  auto fe = frequency_estimate(tally);
  REQUIRE(fe.freq[{0, 0}] == Catch::Approx(0.75));
  REQUIRE(fe.freq[{1, 1}] == Catch::Approx(0.25));
}

TEST_CASE("budgeted frequencies are exactly unbiased (enumeration)") {
  // Exact rational enumeration over every outcome system with <= 3 classes,
  // costs <= 3 and budgets <= 12 used here.
  struct Case {
    BudgetedSystem sys;
    int budget;
  };
  std::vector<Case> cases = {
      {{{Rational(1, 2), Rational(1, 2)}, {1, 2}}, 3},
      {{{Rational(1, 2), Rational(1, 2)}, {1, 2}}, 12},
      {{{Rational(1, 3), Rational(2, 3)}, {2, 3}}, 11},
      {{{Rational(1, 6), Rational(1, 3), Rational(1, 2)}, {1, 2, 3}}, 9},
      {{{Rational(2, 5), Rational(2, 5), Rational(1, 5)}, {3, 1, 2}}, 12},
  };
  for (const auto& c : cases) {
    for (std::size_t target = 0; target < c.sys.probs.size(); ++target) {
      Rational e = oracles::budget_expectation(c.sys, c.budget, int(target));
      Rational diff = e - c.sys.probs[target];
      REQUIRE(std::abs(diff.to_double()) <= 1e-12);
    }
  }
}

TEST_CASE("library tally reproduces the enumeration distribution") {
  // Monte-Carlo sanity: empirical E[i_k / sum] near p_k for a mixed-cost
  // system under the library implementation.
  BudgetedSystem sys{{Rational(1, 2), Rational(1, 2)}, {1, 2}};
  const int runs = 200000;
  double acc = 0.0;
  for (int r = 0; r < runs; ++r) {
    RngStream rng(51, r);
    auto sampler = [&](RngStream& g) {
      return g.bernoulli(0.5) ? Outcome{{0, 0}, 1} : Outcome{{1, 0}, 2};
    };
    auto tally = run_until_budget(sampler, 3, rng);
    auto fe = frequency_estimate(tally);
    if (!fe.empty && fe.freq.count({0, 0})) acc += fe.freq[{0, 0}];
  }
  REQUIRE(std::abs(acc / runs - 0.5) <= 0.005);
}

TEST_CASE("pooling two budgeted executions is biased") {
  // Averaging raw counts across two independent budgets shifts the
  // expectation away from p_k; the per-budget averages stay exact.
  BudgetedSystem sys{{Rational(1, 2), Rational(1, 2)}, {1, 2}};
  double pooled = oracles::pooled_expectation(sys, 3, 0);
  Rational single = oracles::budget_expectation(sys, 3, 0);
  REQUIRE(std::abs(single.to_double() - 0.5) <= 1e-12);
  REQUIRE(std::abs(pooled - 0.5) > 1e-3);
}

TEST_CASE("budgeted_twalk: deterministic coins, exact unbiasedness scale") {
  // gap 1/2 world: a positive coin always survives to depth 3 (payout 1),
  // a negative one stops after a single tails flip (payout 0). Costs are 3
  // and 1, so the budgeted tally is enumerable.
  CoinPopulation pop = two_point_population(0.3, 0.5);
  SingleCoinEstimatorSpec spec = SingleCoinEstimatorSpec::with_default_values(3);
  const int runs = 150000;
  double acc = 0.0;
  int nonempty = 0;
  for (int r = 0; r < runs; ++r) {
    auto rep = budgeted_twalk(pop, spec, 7, RngStream(52, r));
    if (rep.status == RunStatus::ok) {
      acc += rep.estimate;
      ++nonempty;
    } else {
      ++nonempty;  // empty counts as estimate 0 in the average
    }
  }
  // oracle: exact expectation of freq(corner) over the two-outcome system
  BudgetedSystem sys{{Rational(3, 10), Rational(7, 10)}, {3, 1}};
  double expect = oracles::budget_expectation(sys, 7, 0).to_double();
  REQUIRE(std::abs(expect - 0.3) <= 1e-12);
  double se = std::sqrt(0.25 / runs) * 3.0;
  REQUIRE(std::abs(acc / nonempty - 0.3) <= 5 * se + 0.004);
}

TEST_CASE("budgeted_twalk: T = 1 with a tails-first coin") {
  CoinPopulation pop = two_point_population(0.0, 0.5);  // all negative
  auto spec = SingleCoinEstimatorSpec::with_default_values(3);
  auto rep = budgeted_twalk(pop, spec, 1, RngStream(53, 0));
  REQUIRE(rep.status == RunStatus::ok);
  REQUIRE(rep.coins_used == 1);
  REQUIRE(rep.estimate == 0.0);
}

TEST_CASE("budgeted_twalk converges to the exact mixture mean") {
  CoinPopulation pop = two_point_population(0.1, 0.3);
  auto spec = SingleCoinEstimatorSpec::with_default_values(15);
  // exact mean: dot of termination distribution with payouts per coin type
  double mean = 0.1 * expected_output(spec, 0.8) +
                0.9 * expected_output(spec, 0.2);
  auto rep = budgeted_twalk(pop, spec, 2000000, RngStream(54, 0));
  REQUIRE(rep.status == RunStatus::ok);
  REQUIRE(std::abs(rep.estimate - mean) <= 0.003);
}

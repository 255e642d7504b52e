#include <catch2/catch_amalgamated.hpp>

#include "coinpop/estimators.hpp"
#include "coinpop/walk.hpp"
#include "support/oracles.hpp"

using namespace coinpop;

namespace {

StoppingRule stop_at_depth(int d) {
  StoppingRule r;
  r.n_max = d;
  r.gamma = TriArray<double>(d, 0.0);
  for (int k = 0; k <= d; ++k) r.gamma.at(d, k) = 1.0;
  return r;
}

}  // namespace

TEST_CASE("derive_coefficients: sure stop at depth 1") {
  auto c = derive_coefficients(stop_at_depth(1));
  REQUIRE(c.alpha.at(1, 0) == 1.0);
  REQUIRE(c.alpha.at(1, 1) == 1.0);
  REQUIRE(c.eta.at(1, 0) == 0.0);
  REQUIRE(c.eta.at(1, 1) == 0.0);
}

TEST_CASE("derive_coefficients: hand-unrolled recurrence") {
  StoppingRule r = stop_at_depth(2);
  r.gamma.at(1, 0) = 1.0;
  r.gamma.at(1, 1) = 0.5;
  auto c = derive_coefficients(r);
  REQUIRE(c.beta.at(2, 2) == Catch::Approx(0.5));
  REQUIRE(c.beta.at(2, 1) == Catch::Approx(0.5));
  REQUIRE(c.beta.at(2, 0) == 0.0);
}

TEST_CASE("derive_coefficients rejects rules that may never stop") {
  StoppingRule r = stop_at_depth(2);
  r.gamma.at(2, 1) = 0.5;
  REQUIRE_THROWS(derive_coefficients(r));
}

TEST_CASE("alpha normalization identity at p = 0.3 and on a grid") {
  RngStream rng(17, 0);
  for (int trial = 0; trial < 20; ++trial) {
    auto rule = oracles::random_rule(rng, 3 + int(rng.below(60)));
    auto c = derive_coefficients(rule);
    for (int i = 0; i <= 20; ++i) {
      double p = double(i) / 20.0;
      double total = 0.0;
      for (int n = 0; n <= rule.n_max; ++n)
        for (int k = 0; k <= n; ++k)
          total += c.alpha.at(n, k) * bias_monomial(n, k, p);
      REQUIRE(std::abs(total - 1.0) <= 1e-10);
    }
  }
}

TEST_CASE("alpha + eta = beta with nonnegative entries") {
  RngStream rng(18, 0);
  for (int trial = 0; trial < 20; ++trial) {
    auto rule = oracles::random_rule(rng, 2 + int(rng.below(12)));
    auto c = derive_coefficients(rule);
    for (int n = 0; n <= rule.n_max; ++n)
      for (int k = 0; k <= n; ++k) {
        REQUIRE(c.alpha.at(n, k) >= 0.0);
        REQUIRE(c.eta.at(n, k) >= 0.0);
        REQUIRE(c.alpha.at(n, k) + c.eta.at(n, k) ==
                Catch::Approx(c.beta.at(n, k)).margin(1e-15));
      }
  }
}

TEST_CASE("termination distribution: deterministic coin goes to the corner") {
  auto spec = SingleCoinEstimatorSpec::with_default_values(7);
  auto rule = as_stopping_rule(spec);
  auto dist = termination_distribution(rule, 1.0);
  REQUIRE(dist.probs.at(7, 7) == Catch::Approx(1.0));
  REQUIRE(dist.total() == Catch::Approx(1.0));
}

TEST_CASE("termination distribution: p = 0 stops on the tails spine") {
  auto spec = SingleCoinEstimatorSpec::with_default_values(7);
  auto dist = termination_distribution(as_stopping_rule(spec), 0.0);
  REQUIRE(dist.probs.at(1, 0) == Catch::Approx(1.0));
}

TEST_CASE("termination distribution equals sequence enumeration, "
          "deterministic rules") {
  RngStream rng(19, 0);
  for (int trial = 0; trial < 30; ++trial) {
    int N = 2 + int(rng.below(5));  // <= 6
    StoppingRule rule = stop_at_depth(N);
    for (int n = 1; n < N; ++n)
      for (int k = 0; k <= n; ++k)
        rule.gamma.at(n, k) = rng.next_double() < 0.3 ? 1.0 : 0.0;
    double p = 0.05 + 0.9 * rng.next_double();
    auto oracle = oracles::enumerate_termination(rule, p);
    auto dist = termination_distribution(rule, p);
    for (int n = 0; n <= N; ++n)
      for (int k = 0; k <= n; ++k) {
        double expect = 0.0;
        auto it = oracle.find({n, k});
        if (it != oracle.end()) expect = it->second;
        REQUIRE(dist.probs.at(n, k) == Catch::Approx(expect).margin(1e-12));
      }
  }
}

TEST_CASE("termination distribution equals prefix enumeration, "
          "randomized rules") {
  RngStream rng(20, 0);
  for (int trial = 0; trial < 10; ++trial) {
    auto rule = oracles::random_rule(rng, 2 + int(rng.below(5)));
    double p = rng.next_double();
    std::map<std::pair<int, int>, double> oracle;
    oracles::enumerate_prefixes(rule, p, 0, 0, 1.0, oracle);
    auto dist = termination_distribution(rule, p);
    for (const auto& [key, v] : oracle)
      REQUIRE(dist.probs.at(key.first, key.second) ==
              Catch::Approx(v).margin(1e-12));
  }
}

TEST_CASE("run_walk trivial rules") {
  StoppingRule immediate = stop_at_depth(3);
  immediate.gamma.at(0, 0) = 1.0;
  CoinSpec coin{0.7, CoinLabel::positive};
  RngStream rng(22, 0);
  for (int i = 0; i < 50; ++i) {
    auto w = run_walk(immediate, coin, rng);
    REQUIRE(w.n == 0);
    REQUIRE(w.k == 0);
  }
  StoppingRule depth1 = stop_at_depth(1);
  CoinSpec sure{1.0, CoinLabel::positive};
  auto w = run_walk(depth1, sure, rng);
  REQUIRE(w.n == 1);
  REQUIRE(w.k == 1);
}

TEST_CASE("run_walk matches the exact distribution (chi-square)") {
  auto spec = SingleCoinEstimatorSpec::with_default_values(15);
  auto rule = as_stopping_rule(spec);
  double p = 0.8;
  auto dist = termination_distribution(rule, p);
  const int runs = 100000;
  std::map<std::pair<int, int>, int> counts;
  RngStream rng(23, 0);
  for (int i = 0; i < runs; ++i) {
    RngStream walk_rng = rng.derive(i);
    CoinSpec coin{p, CoinLabel::positive};
    CoinView view(coin, walk_rng.derive(0));
    RngStream stops = walk_rng.derive(1);
    auto w = run_walk(rule, view, stops);
    counts[{w.n, w.k}] += 1;
  }
  // Pool cells with expected count below 5 into one bucket.
  double chi2 = 0.0;
  double pooled_expect = 0.0;
  int pooled_count = 0;
  int cells = 0;
  for (int n = 0; n <= rule.n_max; ++n)
    for (int k = 0; k <= n; ++k) {
      double e = dist.probs.at(n, k) * runs;
      if (e <= 0.0) continue;
      int c = counts.count({n, k}) ? counts[{n, k}] : 0;
      if (e < 5.0) {
        pooled_expect += e;
        pooled_count += c;
        continue;
      }
      chi2 += (c - e) * (c - e) / e;
      ++cells;
    }
  if (pooled_expect > 0.0) {
    chi2 += (pooled_count - pooled_expect) * (pooled_count - pooled_expect) /
            pooled_expect;
    ++cells;
  }
  // 1e-4 level: z = 3.719
  REQUIRE(chi2 <= oracles::chi_square_quantile(cells - 1, 3.719));
}

TEST_CASE("ballot survival formula") {
  REQUIRE(ballot_survival(3, 3) == Catch::Approx(1.0));
  REQUIRE(ballot_survival(4, 3) == Catch::Approx(0.5));
  REQUIRE(ballot_survival(15, 9) == Catch::Approx(0.2));
  REQUIRE_THROWS(ballot_survival(4, 2));
}

TEST_CASE("ballot survival equals prefix-check enumeration up to n = 14") {
  for (int n = 1; n <= 14; ++n)
    for (int k = n / 2 + 1; k <= n; ++k) {
      auto [good, total] = oracles::ballot_count(n, k);
      REQUIRE(double(good) / double(total) ==
              Catch::Approx(ballot_survival(n, k)).margin(1e-12));
    }
}

TEST_CASE("survival polynomial") {
  REQUIRE(survival_polynomial(2, 0.75) == Catch::Approx(9.0 / 16.0));
  for (int d : {1, 2, 5, 10}) {
    REQUIRE(survival_polynomial(d, 1.0) == Catch::Approx(1.0));
    REQUIRE(survival_polynomial(d, 0.0) == Catch::Approx(0.0).margin(1e-15));
  }
}

TEST_CASE("power-of-two-only rules validate and reject stray stops") {
  StoppingRule rule;
  rule.n_max = 8;
  rule.gamma = TriArray<double>(8, 0.0);
  rule.powers_of_two_only = true;
  for (int k = 0; k <= 8; ++k) rule.gamma.at(8, k) = 1.0;
  for (int n : {1, 2, 4})
    for (int k = 0; k <= n; ++k) rule.gamma.at(n, k) = 0.5;
  REQUIRE_NOTHROW(rule.validate());
  rule.gamma.at(3, 1) = 0.2;  // 3 is not a power of two
  REQUIRE_THROWS(rule.validate());
}

TEST_CASE("rule json round trip with values") {
  auto spec = SingleCoinEstimatorSpec::with_default_values(5);
  auto rule = as_stopping_rule(spec);
  auto values = value_triangle(spec);
  auto j = rule_to_json(rule, &values);
  RuleFile rf = rule_from_json(j);
  REQUIRE(rf.rule.n_max == 5);
  REQUIRE(rf.values.has_value());
  for (int k = 0; k <= 5; ++k)
    REQUIRE(rf.values->at(5, k) == values.at(5, k));
}

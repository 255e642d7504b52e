#pragma once
// Test-side oracles, independent of the library code paths they check:
// exact rational arithmetic, brute-force enumerations, binomial tail sums,
// and the random-instance generators shared across suites.
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "coinpop/analysis.hpp"
#include "coinpop/coin_model.hpp"
#include "coinpop/rng.hpp"
#include "coinpop/walk.hpp"

namespace oracles {

// Exact rational on __int128 with eager reduction; plenty of headroom for
// the enumeration instances used here (denominators up to ~6^12 * lcm(1..12)).
struct Rational {
  __int128 num = 0;
  __int128 den = 1;

  Rational() = default;
  Rational(long long n) : num(n), den(1) {}
  Rational(long long n, long long d) : num(n), den(d) { reduce(); }

  static __int128 gcd(__int128 a, __int128 b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b) {
      __int128 t = a % b;
      a = b;
      b = t;
    }
    return a;
  }

  void reduce() {
    if (den < 0) {
      num = -num;
      den = -den;
    }
    __int128 g = gcd(num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }

  Rational operator+(const Rational& o) const {
    Rational r;
    r.num = num * o.den + o.num * den;
    r.den = den * o.den;
    r.reduce();
    return r;
  }
  Rational operator-(const Rational& o) const {
    Rational r;
    r.num = num * o.den - o.num * den;
    r.den = den * o.den;
    r.reduce();
    return r;
  }
  Rational operator*(const Rational& o) const {
    Rational r;
    r.num = num * o.num;
    r.den = den * o.den;
    r.reduce();
    return r;
  }
  Rational operator/(const Rational& o) const {
    Rational r;
    r.num = num * o.den;
    r.den = den * o.num;
    r.reduce();
    return r;
  }
  double to_double() const { return double(num) / double(den); }
};

// Exact binomial upper tail P(Bin(n,p) >= k), summed from the small side.
inline double binomial_upper_tail(int n, double p, int k) {
  double total = 0.0;
  for (int i = k; i <= n; ++i) total += coinpop::binomial_pmf(n, p, i);
  return std::min(1.0, total);
}

// Chi-square quantile via the Wilson-Hilferty cube approximation; good to a
// few percent which is plenty for goodness-of-fit gating at extreme levels.
inline double chi_square_quantile(int df, double z_upper) {
  double d = double(df);
  double t = 1.0 - 2.0 / (9.0 * d) + z_upper * std::sqrt(2.0 / (9.0 * d));
  return d * t * t * t;
}

// Brute-force terminal distribution of a stopping rule by enumerating all
// 2^n_max flip sequences. Each sequence carries its full-length probability
// (so the completions of a stopped prefix sum back to the prefix mass) and
// credits the state where the rule (deterministic gamma) first stops.
inline std::map<std::pair<int, int>, double> enumerate_termination(
    const coinpop::StoppingRule& rule, double p) {
  const int N = rule.n_max;
  if (N > 20) throw std::invalid_argument("enumeration oracle: depth too big");
  std::map<std::pair<int, int>, double> out;
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << N); ++bits) {
    double w = 1.0;
    for (int i = 0; i < N; ++i)
      w *= ((bits >> i) & 1) ? p : (1.0 - p);
    int n = 0, k = 0;
    for (int i = 0; i <= N; ++i) {
      double g = rule.gamma.at(n, k);
      if (g >= 1.0) break;
      if (g != 0.0)
        throw std::invalid_argument("enumeration oracle: gamma not 0/1");
      if (i == N) break;
      int heads = (bits >> i) & 1;
      k += heads;
      ++n;
    }
    out[{n, k}] += w;
  }
  return out;
}

// Same via prefix recursion, marginalizing randomized stops analytically;
// works for fractional gamma and serves as the second independent route.
inline void enumerate_prefixes(const coinpop::StoppingRule& rule, double p,
                               int n, int k, double weight,
                               std::map<std::pair<int, int>, double>& out) {
  double g = rule.gamma.at(n, k);
  if (g > 0.0) out[{n, k}] += weight * g;
  if (n == rule.n_max) return;
  double cont = weight * (1.0 - g);
  if (cont <= 0.0) return;
  enumerate_prefixes(rule, p, n + 1, k, cont * (1.0 - p), out);
  enumerate_prefixes(rule, p, n + 1, k + 1, cont * p, out);
}

// Count arrangements of k heads among n flips where every prefix keeps a
// strict heads majority.
inline std::pair<long long, long long> ballot_count(int n, int k) {
  long long good = 0, total = 0;
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
    int heads = 0;
    for (int i = 0; i < n; ++i) heads += (bits >> i) & 1;
    if (heads != k) continue;
    ++total;
    int h = 0;
    bool ok = true;
    for (int i = 0; i < n; ++i) {
      h += (bits >> i) & 1;
      if (2 * h <= i + 1) {
        ok = false;
        break;
      }
    }
    if (ok) ++good;
  }
  return {good, total};
}

// Exact E[i_k / sum_j i_j] for the budgeted drawing process: outcomes with
// rational probabilities and integer costs, budget T. Sequences are
// enumerated exactly; a draw whose cost exceeds the remaining budget ends
// the run (discarded), as does exact exhaustion.
struct BudgetedSystem {
  std::vector<Rational> probs;
  std::vector<int> costs;
};

inline void budget_expectation_walk(const BudgetedSystem& sys, int remaining,
                                    std::vector<int>& counts, Rational weight,
                                    int target,
                                    Rational& acc) {
  if (remaining == 0) {
    int total = std::accumulate(counts.begin(), counts.end(), 0);
    if (total > 0)
      acc = acc + weight * Rational(counts[target], total);
    return;
  }
  for (std::size_t j = 0; j < sys.probs.size(); ++j) {
    Rational w = weight * sys.probs[j];
    if (sys.costs[j] > remaining) {
      // discarded draw ends the run
      int total = std::accumulate(counts.begin(), counts.end(), 0);
      if (total > 0)
        acc = acc + w * Rational(counts[target], total);
      continue;
    }
    counts[j] += 1;
    budget_expectation_walk(sys, remaining - sys.costs[j], counts, w, target,
                            acc);
    counts[j] -= 1;
  }
}

inline Rational budget_expectation(const BudgetedSystem& sys, int budget,
                                   int target) {
  std::vector<int> counts(sys.probs.size(), 0);
  Rational acc(0);
  budget_expectation_walk(sys, budget, counts, Rational(1), target, acc);
  return acc;
}

// Pooled-counts expectation over two independent budgeted runs: exact
// E[(i_k + i'_k)/(S + S')], the estimator the per-budget contract forbids.
inline double pooled_expectation(const BudgetedSystem& sys, int budget,
                                 int target) {
  // Enumerate terminal (counts, prob) pairs of one run, then combine.
  std::vector<std::pair<std::vector<int>, Rational>> terminals;
  std::vector<int> counts(sys.probs.size(), 0);
  std::function<void(int, Rational)> walk = [&](int remaining, Rational w) {
    if (remaining == 0) {
      terminals.push_back({counts, w});
      return;
    }
    for (std::size_t j = 0; j < sys.probs.size(); ++j) {
      Rational wj = w * sys.probs[j];
      if (sys.costs[j] > remaining) {
        terminals.push_back({counts, wj});
        continue;
      }
      counts[j] += 1;
      walk(remaining - sys.costs[j], wj);
      counts[j] -= 1;
    }
  };
  walk(budget, Rational(1));
  double acc = 0.0;
  for (const auto& [c1, w1] : terminals)
    for (const auto& [c2, w2] : terminals) {
      int top = c1[target] + c2[target];
      int bot = std::accumulate(c1.begin(), c1.end(), 0) +
                std::accumulate(c2.begin(), c2.end(), 0);
      if (bot > 0)
        acc += (w1 * w2).to_double() * double(top) / double(bot);
    }
  return acc;
}

// --- random instance generators -------------------------------------------

inline coinpop::DecisionTree random_tree(coinpop::RngStream& rng,
                                         int num_coins, int max_depth) {
  coinpop::DecisionTree tree;
  tree.num_coins = num_coins;
  std::vector<coinpop::DecisionTree::Node> nodes;
  std::function<int(int)> grow = [&](int depth) -> int {
    if (depth >= max_depth || rng.next_double() < 0.3) return -1;
    int idx = static_cast<int>(nodes.size());
    nodes.push_back({static_cast<int>(rng.below(num_coins)), -1, -1});
    int h = grow(depth + 1);
    int t = grow(depth + 1);
    nodes[idx].heads = h;
    nodes[idx].tails = t;
    return idx;
  };
  if (grow(0) == -1) nodes.push_back({0, -1, -1});
  tree.nodes = nodes;
  return tree;
}

inline coinpop::BiasDistribution random_dist(coinpop::RngStream& rng) {
  int atoms = 1 + static_cast<int>(rng.below(3));
  coinpop::BiasDistribution d;
  double total = 0.0;
  std::vector<double> w(atoms);
  for (int i = 0; i < atoms; ++i) {
    w[i] = rng.next_double() + 0.05;
    total += w[i];
  }
  for (int i = 0; i < atoms; ++i)
    d.support.push_back({0.1 * double(1 + rng.below(9)), w[i] / total});
  return d;
}

inline coinpop::StoppingRule random_rule(coinpop::RngStream& rng, int n_max,
                                         double gamma_scale = 0.5) {
  coinpop::StoppingRule rule;
  rule.n_max = n_max;
  rule.gamma = coinpop::TriArray<double>(n_max, 0.0);
  for (int n = 1; n < n_max; ++n)
    for (int k = 0; k <= n; ++k)
      rule.gamma.at(n, k) = gamma_scale * rng.next_double();
  for (int k = 0; k <= n_max; ++k) rule.gamma.at(n_max, k) = 1.0;
  return rule;
}

}  // namespace oracles

#pragma once
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "coinpop/coin_model.hpp"
#include "coinpop/moments.hpp"
#include "coinpop/walk.hpp"

namespace coinpop {

// Distribution over a fixed finite outcome set; outcomes are identified by
// index, so two distributions are comparable only at equal size.
struct FiniteDistribution {
  std::vector<double> probs;

  void validate(double tol = 1e-12) const {
    double s = 0.0;
    for (double p : probs) {
      if (p < 0.0) throw std::invalid_argument("FiniteDistribution: p < 0");
      s += p;
    }
    if (std::abs(s - 1.0) > tol)
      throw std::invalid_argument("FiniteDistribution: not normalized");
  }
};

// Squared Hellinger distance 1 - sum sqrt(p q), via the cancellation-free
// form sum (p-q)^2 / (sqrt(p)+sqrt(q))^2 / 2. Clamped to [0,1].
inline double hellinger_sq(const FiniteDistribution& P,
                           const FiniteDistribution& Q) {
  if (P.probs.size() != Q.probs.size())
    throw std::invalid_argument("hellinger_sq: outcome sets differ");
  double s = 0.0;
  for (std::size_t i = 0; i < P.probs.size(); ++i) {
    double p = P.probs[i], q = Q.probs[i];
    double r = std::sqrt(p) + std::sqrt(q);
    if (r > 0.0) {
      double d = p - q;
      s += d * d / (r * r);
    }
  }
  s *= 0.5;
  return std::min(1.0, std::max(0.0, s));
}

// KL divergence sum p ln(p/q), natural log; +inf when q vanishes under
// positive p mass.
inline double kl_div(const FiniteDistribution& P,
                     const FiniteDistribution& Q) {
  if (P.probs.size() != Q.probs.size())
    throw std::invalid_argument("kl_div: outcome sets differ");
  double s = 0.0;
  for (std::size_t i = 0; i < P.probs.size(); ++i) {
    double p = P.probs[i], q = Q.probs[i];
    if (p == 0.0) continue;
    if (q == 0.0) return std::numeric_limits<double>::infinity();
    s += p * std::log1p((p - q) / q);
  }
  return std::max(0.0, s);
}

inline double l1_distance(const FiniteDistribution& P,
                          const FiniteDistribution& Q) {
  if (P.probs.size() != Q.probs.size())
    throw std::invalid_argument("l1_distance: outcome sets differ");
  double s = 0.0;
  for (std::size_t i = 0; i < P.probs.size(); ++i)
    s += std::abs(P.probs[i] - Q.probs[i]);
  return s;
}

// Deterministic fully-adaptive multi-coin algorithm as a decision tree.
// Internal nodes flip a named coin and branch on the result; child index -1
// marks a leaf. Randomized algorithms are mixtures of these.
struct DecisionTree {
  struct Node {
    int coin = 0;
    int heads = -1;
    int tails = -1;
  };
  std::vector<Node> nodes;  // empty tree = a single leaf
  int num_coins = 1;

  int depth() const { return depth_from(nodes.empty() ? -1 : 0); }

  int depth_from(int idx) const {
    if (idx < 0) return 0;
    return 1 + std::max(depth_from(nodes[idx].heads),
                        depth_from(nodes[idx].tails));
  }

  // Per-leaf (heads, tails) exponent pairs for every coin, in a fixed
  // traversal order that defines the leaf indexing.
  std::vector<std::vector<std::pair<int, int>>> leaf_profiles() const {
    std::vector<std::vector<std::pair<int, int>>> out;
    std::vector<std::pair<int, int>> counts(num_coins, {0, 0});
    walk(nodes.empty() ? -1 : 0, counts, out);
    return out;
  }

 private:
  void walk(int idx, std::vector<std::pair<int, int>>& counts,
            std::vector<std::vector<std::pair<int, int>>>& out) const {
    if (idx < 0) {
      out.push_back(counts);
      return;
    }
    const Node& nd = nodes[idx];
    counts[nd.coin].first += 1;
    walk(nd.heads, counts, out);
    counts[nd.coin].first -= 1;
    counts[nd.coin].second += 1;
    walk(nd.tails, counts, out);
    counts[nd.coin].second -= 1;
  }
};

// Leaf distribution of a tree when coin j is drawn fresh from coin_dists[j]:
// each leaf probability factors into one moment per coin.
inline FiniteDistribution transcript_distribution(
    const DecisionTree& tree, const std::vector<BiasDistribution>& coin_dists) {
  if (static_cast<int>(coin_dists.size()) != tree.num_coins)
    throw std::invalid_argument("transcript_distribution: one dist per coin");
  FiniteDistribution out;
  for (const auto& profile : tree.leaf_profiles()) {
    double p = 1.0;
    for (int j = 0; j < tree.num_coins; ++j)
      p *= coin_dists[j].moment(profile[j].first, profile[j].second);
    out.probs.push_back(p);
  }
  return out;
}

inline BiasDistribution mix_distributions(const BiasDistribution& A, double wa,
                                          const BiasDistribution& B,
                                          double wb) {
  BiasDistribution m;
  for (const auto& a : A.support) m.support.push_back({a.bias, a.weight * wa});
  for (const auto& b : B.support) m.support.push_back({b.bias, b.weight * wb});
  return m;
}

struct ReductionCheck {
  double full_sq = 0.0;
  std::vector<double> per_coin_sq;

  double per_coin_total() const {
    double s = 0.0;
    for (double v : per_coin_sq) s += v;
    return s;
  }
};

// Direct-sum decomposition check: squared Hellinger between running the tree
// with every coin from A versus every coin from B, against the per-coin
// distances where only coin i is real and the rest are simulated from the
// half-half mixture. The full distance never exceeds the per-coin sum.
inline ReductionCheck verify_reduction(const DecisionTree& tree,
                                       const BiasDistribution& A,
                                       const BiasDistribution& B) {
  A.validate();
  B.validate();
  ReductionCheck out;
  std::vector<BiasDistribution> all_a(tree.num_coins, A);
  std::vector<BiasDistribution> all_b(tree.num_coins, B);
  out.full_sq = hellinger_sq(transcript_distribution(tree, all_a),
                             transcript_distribution(tree, all_b));
  BiasDistribution mix = mix_distributions(A, 0.5, B, 0.5);
  for (int i = 0; i < tree.num_coins; ++i) {
    std::vector<BiasDistribution> da(tree.num_coins, mix);
    std::vector<BiasDistribution> db(tree.num_coins, mix);
    da[i] = A;
    db[i] = B;
    out.per_coin_sq.push_back(hellinger_sq(transcript_distribution(tree, da),
                                           transcript_distribution(tree, db)));
  }
  return out;
}

struct ReductionKlCheck {
  double kl_full = 0.0;
  std::vector<double> per_coin_sq;
  double ratio = 0.0;  // kl_full / sum(per_coin_sq)

  double per_coin_total() const {
    double s = 0.0;
    for (double v : per_coin_sq) s += v;
    return s;
  }
};

// KL variant: the full transcript divergence between the rho- and
// (rho+eps)-mixtures is a constant times the per-coin sum, where coin i is
// real and the others are simulated from the rho-mixture. The per-coin terms
// here use the decomposition form sum (sqrt p - sqrt q)^2, i.e. twice the
// normalized squared Hellinger distance; with that normalization the ratio
// tends to 2 as eps/rho -> 0.
inline ReductionKlCheck verify_reduction_kl(const DecisionTree& tree,
                                            const BiasDistribution& A,
                                            const BiasDistribution& B,
                                            double rho, double eps) {
  if (!(eps > 0.0 && eps < rho))
    throw std::invalid_argument("verify_reduction_kl: requires 0 < eps < rho");
  if (!(rho + eps <= 1.0))
    throw std::invalid_argument("verify_reduction_kl: rho + eps > 1");
  A.validate();
  B.validate();
  ReductionKlCheck out;
  BiasDistribution lo = mix_distributions(A, rho, B, 1.0 - rho);
  BiasDistribution hi = mix_distributions(A, rho + eps, B, 1.0 - rho - eps);
  std::vector<BiasDistribution> all_lo(tree.num_coins, lo);
  std::vector<BiasDistribution> all_hi(tree.num_coins, hi);
  out.kl_full = kl_div(transcript_distribution(tree, all_lo),
                       transcript_distribution(tree, all_hi));
  for (int i = 0; i < tree.num_coins; ++i) {
    std::vector<BiasDistribution> da(tree.num_coins, lo);
    std::vector<BiasDistribution> db(tree.num_coins, lo);
    db[i] = hi;
    out.per_coin_sq.push_back(
        2.0 * hellinger_sq(transcript_distribution(tree, da),
                           transcript_distribution(tree, db)));
  }
  double denom = out.per_coin_total();
  out.ratio = denom > 0.0 ? out.kl_full / denom : 0.0;
  return out;
}

// Terminal distribution of a rule under the two-point world at biases
// 1/2 +- delta mixed with weight w on the positive coin.
inline FiniteDistribution rule_mixture_distribution(const StoppingRule& rule,
                                                    double w, double delta) {
  auto plus = termination_distribution(rule, 0.5 + delta);
  auto minus = termination_distribution(rule, 0.5 - delta);
  FiniteDistribution out;
  for (int n = 0; n <= rule.n_max; ++n)
    for (int k = 0; k <= n; ++k)
      out.probs.push_back(w * plus.probs.at(n, k) +
                          (1.0 - w) * minus.probs.at(n, k));
  return out;
}

// Exact squared Hellinger distance between one run of a rule on the rho
// versus rho+eps two-point mixtures.
inline double rule_hellinger_exact(const StoppingRule& rule, double rho,
                                   double eps, double delta) {
  if (!(eps >= 0.0 && rho + eps <= 1.0))
    throw std::invalid_argument("rule_hellinger_exact: bad rho/eps");
  return hellinger_sq(rule_mixture_distribution(rule, rho, delta),
                      rule_mixture_distribution(rule, rho + eps, delta));
}

// The eps^2-free linear functional that approximates the distance above to
// within constant factors for eps << rho. Identical to the LP objective.
inline double rule_hellinger_linear_functional(const StoppingRule& rule,
                                               const MomentTable& hplus,
                                               const MomentTable& hminus,
                                               double rho) {
  auto coeffs = derive_coefficients(rule);
  return discrimination_functional(coeffs.alpha, hplus, hminus, rho);
}

// Two-line advice form for two-point worlds: interior rows carry the squared
// discrepancy weight, the forced last row the advice weight (h+/rho + h-),
// both against the rho+eps/2 stop mass. Returns the eps^2-free bracket.
inline double hellinger_form_with_advice(const StoppingRule& rule, double rho,
                                         double eps, double delta) {
  rule.validate();
  auto coeffs = derive_coefficients(rule);
  const int N = rule.n_max;
  double interior = 0.0, last = 0.0;
  for (int n = 0; n <= N; ++n)
    for (int k = 0; k <= n; ++k) {
      double a = coeffs.alpha.at(n, k);
      if (a <= 0.0) continue;
      double hp = bias_monomial(n, k, 0.5 + delta);
      double hm = bias_monomial(n, k, 0.5 - delta);
      double mid = (rho + eps / 2) * hp + (1.0 - rho - eps / 2) * hm;
      double den = rho * hp + (1.0 - rho) * hm;
      if (den <= 0.0) continue;
      if (n < N) {
        double d = hp - hm;
        interior += a * mid * d * d / (den * den);
      } else {
        last += a * mid * (hp / rho + hm) / den;
      }
    }
  return interior + last;
}

// Exact squared Hellinger between the advice-augmented terminal
// distributions: last-row outcomes are split by the revealed coin type.
inline double rule_hellinger_exact_with_advice(const StoppingRule& rule,
                                               double rho, double eps,
                                               double delta) {
  auto plus = termination_distribution(rule, 0.5 + delta);
  auto minus = termination_distribution(rule, 0.5 - delta);
  auto build = [&](double w) {
    FiniteDistribution out;
    for (int n = 0; n <= rule.n_max; ++n)
      for (int k = 0; k <= n; ++k) {
        if (n < rule.n_max) {
          out.probs.push_back(w * plus.probs.at(n, k) +
                              (1.0 - w) * minus.probs.at(n, k));
        } else {
          out.probs.push_back(w * plus.probs.at(n, k));
          out.probs.push_back((1.0 - w) * minus.probs.at(n, k));
        }
      }
    return out;
  };
  return hellinger_sq(build(rho), build(rho + eps));
}

// Mutual information per flip between the scenario bit (rho versus rho+eps,
// uniform) and n flips of one coin from the matching two-point mixture.
inline double mutual_info_per_sample(int n, double rho, double eps,
                                     double delta) {
  if (n < 1) throw std::invalid_argument("mutual_info_per_sample: n < 1");
  double total = 0.0;
  for (int k = 0; k <= n; ++k) {
    double bp = binomial_pmf(n, 0.5 + delta, k);
    double bm = binomial_pmf(n, 0.5 - delta, k);
    double x = rho * bp + (1.0 - rho) * bm;
    double y = (rho + eps) * bp + (1.0 - rho - eps) * bm;
    double m = 0.5 * (x + y);
    if (x > 0.0) total += 0.5 * x * std::log(x / m);
    if (y > 0.0) total += 0.5 * y * std::log(y / m);
  }
  return std::max(0.0, total) / double(n);
}

// Closed-form bound the per-sample information never exceeds:
// (2 min(1/rho, ((1+12 delta^2)/(1-4 delta^2))^n) + 2) eps^2 / n.
inline double mutual_info_upper_bound(int n, double rho, double eps,
                                      double delta) {
  double ratio = (1.0 + 12.0 * delta * delta) / (1.0 - 4.0 * delta * delta);
  double cap = std::min(1.0 / rho, std::pow(ratio, n));
  return (2.0 * cap + 2.0) * eps * eps / double(n);
}

}  // namespace coinpop

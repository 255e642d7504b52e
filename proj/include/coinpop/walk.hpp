#pragma once
#include <cmath>
#include <concepts>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "coinpop/coin_model.hpp"
#include "coinpop/rng.hpp"
#include "coinpop/triangle.hpp"

namespace coinpop {

// A single-coin adaptive algorithm in canonical form: a walk over states
// (n flips, k heads) that terminates at (n, k) with probability gamma[n][k].
// The last row must stop surely so the walk always terminates.
struct StoppingRule {
  int n_max = 0;
  TriArray<double> gamma;
  bool powers_of_two_only = false;

  void validate() const {
    if (n_max < 0 || gamma.n_max() != n_max)
      throw std::invalid_argument("StoppingRule: shape mismatch");
    for (int n = 0; n <= n_max; ++n)
      for (int k = 0; k <= n; ++k) {
        double g = gamma.at(n, k);
        if (!(g >= 0.0 && g <= 1.0))
          throw std::invalid_argument("StoppingRule: gamma outside [0,1]");
        if (powers_of_two_only && n < n_max && (n & (n - 1)) != 0 && g != 0.0)
          throw std::invalid_argument(
              "StoppingRule: non-power-of-two stop in restricted rule");
      }
    for (int k = 0; k <= n_max; ++k)
      if (gamma.at(n_max, k) != 1.0)
        throw std::invalid_argument("StoppingRule: last row must stop surely");
  }
};

// alpha[n][k] * p^k (1-p)^(n-k) = P(terminate at (n,k)),
// beta * (same monomial)       = P(reach (n,k)),
// eta = beta - alpha           = reach-and-continue.
struct DerivedCoefficients {
  TriArray<double> alpha, beta, eta;
};

inline DerivedCoefficients derive_coefficients(const StoppingRule& rule) {
  rule.validate();
  const int N = rule.n_max;
  DerivedCoefficients c{TriArray<double>(N), TriArray<double>(N),
                        TriArray<double>(N)};
  c.beta.at(0, 0) = 1.0;
  for (int n = 0; n < N; ++n)
    for (int k = 0; k <= n; ++k) {
      double cont = c.beta.at(n, k) * (1.0 - rule.gamma.at(n, k));
      c.beta.at(n + 1, k) += cont;      // tails edge
      c.beta.at(n + 1, k + 1) += cont;  // heads edge
    }
  for (int n = 0; n <= N; ++n)
    for (int k = 0; k <= n; ++k) {
      c.alpha.at(n, k) = c.beta.at(n, k) * rule.gamma.at(n, k);
      c.eta.at(n, k) = c.beta.at(n, k) - c.alpha.at(n, k);
    }
  return c;
}

struct WalkOutcome {
  int n = 0;
  int k = 0;
};

struct TerminationDistribution {
  int n_max = 0;
  TriArray<double> probs;

  double total() const {
    double s = 0.0;
    for (double v : probs.flat()) s += v;
    return s;
  }
  double expected_flips() const {
    double s = 0.0;
    for (int n = 0; n <= n_max; ++n)
      for (int k = 0; k <= n; ++k) s += double(n) * probs.at(n, k);
    return s;
  }
};

// Exact distribution over terminal states for a coin of bias p. Forward DP
// on reach probabilities, so no underflow from forming p^k (1-p)^(n-k)
// explicitly at large n.
inline TerminationDistribution termination_distribution(
    const StoppingRule& rule, double p) {
  rule.validate();
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("termination_distribution: p outside [0,1]");
  const int N = rule.n_max;
  TriArray<double> reach(N), stop(N);
  reach.at(0, 0) = 1.0;
  for (int n = 0; n <= N; ++n)
    for (int k = 0; k <= n; ++k) {
      double m = reach.at(n, k);
      if (m == 0.0) continue;
      double s = m * rule.gamma.at(n, k);
      stop.at(n, k) += s;
      if (n < N) {
        double cont = m - s;
        reach.at(n + 1, k) += cont * (1.0 - p);
        reach.at(n + 1, k + 1) += cont * p;
      }
    }
  return TerminationDistribution{N, std::move(stop)};
}

// p^k (1-p)^(n-k), evaluated in log space once n is large enough for the
// direct product to risk underflow.
inline double bias_monomial(int n, int k, double p) {
  if (p == 0.0) return k == 0 ? 1.0 : 0.0;
  if (p == 1.0) return k == n ? 1.0 : 0.0;
  if (n <= 50) return std::pow(p, k) * std::pow(1.0 - p, n - k);
  return std::exp(double(k) * std::log(p) +
                  double(n - k) * std::log1p(-p));
}

// P(terminate at (n,k)) from the coefficient form.
inline double termination_probability(const DerivedCoefficients& coeffs,
                                      int n, int k, double p) {
  return coeffs.alpha.at(n, k) * bias_monomial(n, k, p);
}

template <typename FlipSource>
  requires requires(FlipSource& s) { { s.flip() } -> std::convertible_to<int>; }
inline WalkOutcome run_walk(const StoppingRule& rule, FlipSource& coin,
                            RngStream& rng) {
  int n = 0, k = 0;
  while (true) {
    double g = rule.gamma.at(n, k);
    if (g >= 1.0 || (g > 0.0 && rng.next_double() < g))
      return WalkOutcome{n, k};
    k += coin.flip();
    ++n;
  }
}

inline WalkOutcome run_walk(const StoppingRule& rule, const CoinSpec& coin,
                            RngStream& rng) {
  CoinView view(coin, rng.derive(1));
  RngStream stops = rng.derive(2);
  return run_walk(rule, view, stops);
}

// Fraction of arrangements of k heads among n flips whose every prefix has a
// strict heads majority: (2k - n) / n.
inline double ballot_survival(int n, int k) {
  if (n < 1 || k < 0 || k > n)
    throw std::invalid_argument("ballot_survival: bad (n,k)");
  if (2 * k <= n)
    throw std::invalid_argument("ballot_survival: requires 2k > n");
  return double(2 * k - n) / double(n);
}

inline double log_choose(int n, int k) {
  return std::lgamma(double(n) + 1.0) - std::lgamma(double(k) + 1.0) -
         std::lgamma(double(n - k) + 1.0);
}

inline double binomial_pmf(int n, double p, int k) {
  if (k < 0 || k > n) return 0.0;
  if (p == 0.0) return k == 0 ? 1.0 : 0.0;
  if (p == 1.0) return k == n ? 1.0 : 0.0;
  return std::exp(log_choose(n, k) + double(k) * std::log(p) +
                  double(n - k) * std::log1p(-p));
}

// S_d(p): probability that d flips of a bias-p coin keep a strict heads
// majority at every prefix (ties count as losing the majority).
inline double survival_polynomial(int d, double p) {
  if (d < 1) throw std::invalid_argument("survival_polynomial: d < 1");
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("survival_polynomial: p outside [0,1]");
  double s = 0.0;
  for (int k = d / 2 + 1; k <= d; ++k)
    s += ballot_survival(d, k) * binomial_pmf(d, p, k);
  return s;
}

// --- stopping-rule file format --------------------------------------------
// {"n_max":N, "gamma":[[row0],[row1],...], "v":[[...],...]} with "v" an
// optional triangle of terminal output values.

struct RuleFile {
  StoppingRule rule;
  std::optional<TriArray<double>> values;
};

inline TriArray<double> triangle_from_json(const nlohmann::json& rows,
                                           int n_max) {
  if (static_cast<int>(rows.size()) != n_max + 1)
    throw std::invalid_argument("triangle: wrong number of rows");
  TriArray<double> t(n_max);
  for (int n = 0; n <= n_max; ++n) {
    const auto& row = rows.at(n);
    if (static_cast<int>(row.size()) != n + 1)
      throw std::invalid_argument("triangle: row length mismatch");
    for (int k = 0; k <= n; ++k) t.at(n, k) = row.at(k).get<double>();
  }
  return t;
}

inline nlohmann::json triangle_to_json(const TriArray<double>& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (int n = 0; n <= t.n_max(); ++n) {
    nlohmann::json row = nlohmann::json::array();
    for (int k = 0; k <= n; ++k) row.push_back(t.at(n, k));
    rows.push_back(row);
  }
  return rows;
}

inline RuleFile rule_from_json(const nlohmann::json& j) {
  RuleFile rf;
  rf.rule.n_max = j.at("n_max").get<int>();
  rf.rule.gamma = triangle_from_json(j.at("gamma"), rf.rule.n_max);
  if (j.contains("powers_of_two_only"))
    rf.rule.powers_of_two_only = j.at("powers_of_two_only").get<bool>();
  rf.rule.validate();
  if (j.contains("v"))
    rf.values = triangle_from_json(j.at("v"), rf.rule.n_max);
  return rf;
}

inline nlohmann::json rule_to_json(const StoppingRule& rule,
                                   const TriArray<double>* values = nullptr) {
  nlohmann::json j{{"n_max", rule.n_max},
                   {"gamma", triangle_to_json(rule.gamma)}};
  if (rule.powers_of_two_only) j["powers_of_two_only"] = true;
  if (values) j["v"] = triangle_to_json(*values);
  return j;
}

inline RuleFile load_rule(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open rule file: " + path);
  nlohmann::json j;
  in >> j;
  return rule_from_json(j);
}

inline void save_rule(const StoppingRule& rule, const std::string& path,
                      const TriArray<double>* values = nullptr) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write rule file: " + path);
  out << rule_to_json(rule, values).dump(2) << "\n";
}

}  // namespace coinpop

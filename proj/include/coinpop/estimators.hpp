#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "coinpop/coin_model.hpp"
#include "coinpop/rng.hpp"
#include "coinpop/walk.hpp"

namespace coinpop {

enum class RunStatus { ok, empty, failed };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::ok: return "ok";
    case RunStatus::empty: return "empty";
    default: return "failed";
  }
}

struct StageDiagnostics {
  int stage_reached = 0;
  double rho_hat = 0.0;
  std::uint64_t stage_flips[3] = {0, 0, 0};
};

struct RunReport {
  double estimate = 0.0;
  std::uint64_t flips_used = 0;
  std::uint64_t coins_used = 0;
  std::vector<double> group_means;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::string generator = kRngName;
  RunStatus status = RunStatus::ok;
  StageDiagnostics stages;
};

// Single-coin walk of maximum depth n_max (odd): stop with output 0 as soon
// as tails reach a majority, and pay out values[k] if the walk survives to
// depth n_max with k heads. The default payouts min(4, n/(2k-n)) invert the
// ballot survival odds so surviving positive coins average out to 1.
struct SingleCoinEstimatorSpec {
  int n_max = 0;
  std::vector<double> values;  // index k = 0..n_max; zero where 2k <= n_max

  void validate() const {
    if (n_max < 1 || n_max % 2 == 0)
      throw std::invalid_argument("SingleCoinEstimatorSpec: n_max must be odd");
    if (static_cast<int>(values.size()) != n_max + 1)
      throw std::invalid_argument("SingleCoinEstimatorSpec: values size");
    for (int k = 0; 2 * k <= n_max; ++k)
      if (values[k] != 0.0)
        throw std::invalid_argument(
            "SingleCoinEstimatorSpec: tail-majority cells must pay 0");
  }

  static SingleCoinEstimatorSpec with_default_values(int n_max) {
    SingleCoinEstimatorSpec s;
    s.n_max = n_max;
    s.values.assign(n_max + 1, 0.0);
    for (int k = 0; k <= n_max; ++k)
      if (2 * k > n_max)
        s.values[k] = std::min(4.0, double(n_max) / double(2 * k - n_max));
    s.validate();
    return s;
  }

  // Depth grows like c ln(1/eps), forced odd. The default c = 24 is the
  // smallest round constant for which the exact expected output stays within
  // eps/2 of its target on both sides of the gap (checked by the test
  // suite, not by a Chernoff constant).
  static constexpr double kDefaultDepthConstant = 24.0;

  static int depth_for_epsilon(double eps, double c = kDefaultDepthConstant) {
    if (!(eps > 0.0 && eps < 1.0))
      throw std::invalid_argument("depth_for_epsilon: eps outside (0,1)");
    int n = static_cast<int>(std::ceil(c * std::log(1.0 / eps)));
    if (n % 2 == 0) ++n;
    return std::max(n, 1);
  }

  static SingleCoinEstimatorSpec for_epsilon(double eps,
                                             double c = kDefaultDepthConstant) {
    return with_default_values(depth_for_epsilon(eps, c));
  }
};

// The walk above expressed as a stopping rule, for exact DP analysis.
inline StoppingRule as_stopping_rule(const SingleCoinEstimatorSpec& spec) {
  spec.validate();
  StoppingRule rule;
  rule.n_max = spec.n_max;
  rule.gamma = TriArray<double>(spec.n_max, 0.0);
  for (int n = 1; n <= spec.n_max; ++n)
    for (int k = 0; k <= n; ++k)
      if (2 * k <= n || n == spec.n_max) rule.gamma.at(n, k) = 1.0;
  return rule;
}

// Terminal payout triangle matching as_stopping_rule.
inline TriArray<double> value_triangle(const SingleCoinEstimatorSpec& spec) {
  TriArray<double> v(spec.n_max, 0.0);
  for (int k = 0; k <= spec.n_max; ++k)
    v.at(spec.n_max, k) = spec.values[k];
  return v;
}

struct EstimateResult {
  double value = 0.0;
  std::uint64_t real_flips = 0;
  int virtual_flips = 0;
};

template <typename FlipSource>
inline EstimateResult single_coin_estimate(FlipSource& coin,
                                           const SingleCoinEstimatorSpec& spec) {
  std::uint64_t before =  coin.real_flips();
  int n = 0, k = 0;
  while (true) {
    k += coin.flip();
    ++n;
    if (2 * k <= n)
      return {0.0, coin.real_flips() - before, n};
    if (n == spec.n_max)
      return {spec.values[k], coin.real_flips() - before, n};
  }
}

// Exact E[output] for a coin of bias p: dot product of the termination
// distribution with the payout triangle.
inline double expected_output(const SingleCoinEstimatorSpec& spec, double p) {
  auto dist = termination_distribution(as_stopping_rule(spec), p);
  double s = 0.0;
  for (int k = 0; k <= spec.n_max; ++k)
    s += dist.probs.at(spec.n_max, k) * spec.values[k];
  return s;
}

inline double output_second_moment(const SingleCoinEstimatorSpec& spec,
                                   double p) {
  auto dist = termination_distribution(as_stopping_rule(spec), p);
  double s = 0.0;
  for (int k = 0; k <= spec.n_max; ++k)
    s += dist.probs.at(spec.n_max, k) * spec.values[k] * spec.values[k];
  return s;
}

inline double expected_walk_length(const SingleCoinEstimatorSpec& spec,
                                   double p) {
  return termination_distribution(as_stopping_rule(spec), p).expected_flips();
}

struct MedianOfMeansConfig {
  int groups = 1;
  std::uint64_t coins_per_group = 1;

  // groups: smallest odd >= 18 ln(1/delta); per-group size from Chebyshev
  // against the O(rho) output variance.
  static MedianOfMeansConfig from(double delta_fail, double eps,
                                  double rho_guess = 1.0) {
    MedianOfMeansConfig c;
    int g = static_cast<int>(std::ceil(18.0 * std::log(1.0 / delta_fail)));
    if (g < 1) g = 1;
    if (g % 2 == 0) ++g;
    c.groups = g;
    c.coins_per_group = static_cast<std::uint64_t>(
        std::ceil(36.0 * std::max(rho_guess, eps) / (eps * eps)));
    if (c.coins_per_group < 1) c.coins_per_group = 1;
    return c;
  }

  std::uint64_t total_coins() const {
    return static_cast<std::uint64_t>(groups) * coins_per_group;
  }
};

inline double median_of(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

namespace detail {

// Thrown by CappedCoinView when the next flip would cross the budget; the
// caller abandons the walk in progress and settles with what completed.
struct FlipBudgetExhausted {};

// Flip source that refuses to start a flip the remaining budget cannot pay
// for. Spent flips (including the aborted walk's) stay visible through
// spent().
class CappedCoinView {
 public:
  CappedCoinView(CoinView& inner, std::uint64_t remaining)
      : inner_(inner), remaining_(remaining) {}

  int flip() {
    std::uint64_t cost = static_cast<std::uint64_t>(inner_.block_size());
    if (cost > remaining_) throw FlipBudgetExhausted{};
    remaining_ -= cost;
    spent_ += cost;
    return inner_.flip();
  }

  std::uint64_t real_flips() const { return inner_.real_flips(); }
  std::uint64_t spent() const { return spent_; }
  int block_size() const { return inner_.block_size(); }

 private:
  CoinView& inner_;
  std::uint64_t remaining_;
  std::uint64_t spent_ = 0;
};

// Partition coins 0..t-1 into g groups in order; remainder coins go to the
// last group. Returns per-group [begin, end).
inline std::vector<std::pair<std::uint64_t, std::uint64_t>> group_ranges(
    std::uint64_t t, int g) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> r;
  std::uint64_t q = g > 0 ? t / static_cast<std::uint64_t>(g) : 0;
  std::uint64_t pos = 0;
  for (int i = 0; i < g; ++i) {
    std::uint64_t len = (i == g - 1) ? t - pos : q;
    r.push_back({pos, pos + len});
    pos += len;
  }
  return r;
}

}  // namespace detail

struct TwalkOptions {
  int groups = 0;            // 0: derive from delta_fail
  double rho_guess = 1.0;    // sizing hint only
  std::uint64_t flip_cap = 0;  // 0: unlimited; else stop once exceeded
};

// Median-of-means over single-coin walk estimates on t fresh coins, each fed
// through the majority-vote virtual coin when the gap needs boosting.
// Returns status empty (estimate 0) when any group ends up without a coin.
// With a flip cap, stops early and reports failed once the cap is crossed.
inline RunReport triangular_walk_estimate(const CoinPopulation& pop,
                                          std::uint64_t t, double eps,
                                          double delta_fail, RngStream rng,
                                          TwalkOptions opts = {}) {
  pop.validate();
  RunReport rep;
  rep.seed = rng.seed();
  rep.stream_id = rng.stream_id();
  int g = opts.groups > 0
              ? opts.groups
              : MedianOfMeansConfig::from(delta_fail, eps).groups;
  auto spec = SingleCoinEstimatorSpec::for_epsilon(eps);
  auto ranges = detail::group_ranges(t, g);
  std::vector<double> sums(g, 0.0);
  std::vector<std::uint64_t> counts(g, 0);
  for (int gi = 0; gi < g; ++gi) {
    for (std::uint64_t i = ranges[gi].first; i < ranges[gi].second; ++i) {
      RngStream coin_rng = rng.derive(i);
      CoinSpec coin = draw_coin(pop, coin_rng);
      CoinView view(coin, pop.delta, coin_rng.derive(1));
      double value = 0.0;
      if (opts.flip_cap > 0) {
        detail::CappedCoinView capped(view, opts.flip_cap - rep.flips_used);
        try {
          value = single_coin_estimate(capped, spec).value;
        } catch (const detail::FlipBudgetExhausted&) {
          rep.flips_used += capped.spent();
          rep.status = RunStatus::failed;  // cap reached mid-walk
          return rep;
        }
        rep.flips_used += capped.spent();
      } else {
        auto res = single_coin_estimate(view, spec);
        value = res.value;
        rep.flips_used += res.real_flips;
      }
      sums[gi] += value;
      counts[gi] += 1;
      rep.coins_used += 1;
    }
  }
  bool any_empty = false;
  for (int gi = 0; gi < g; ++gi) {
    if (counts[gi] == 0) {
      any_empty = true;
      rep.group_means.push_back(0.0);
    } else {
      rep.group_means.push_back(sums[gi] / double(counts[gi]));
    }
  }
  if (any_empty) {
    rep.estimate = 0.0;
    rep.status = RunStatus::empty;
    return rep;
  }
  rep.estimate = median_of(rep.group_means);
  return rep;
}

// Budget-first variant: run walks on fresh coins until the real-flip budget
// runs out, discard the walk in progress, and average the completed outputs.
// Unbiased by the outcome-frequency argument in budget.hpp.
inline RunReport anytime_estimate(const CoinPopulation& pop, double eps,
                                  std::uint64_t flip_budget, RngStream rng) {
  pop.validate();
  if (flip_budget < 1)
    throw std::invalid_argument("anytime_estimate: flip_budget < 1");
  RunReport rep;
  rep.seed = rng.seed();
  rep.stream_id = rng.stream_id();
  auto spec = SingleCoinEstimatorSpec::for_epsilon(eps);
  double sum = 0.0;
  std::uint64_t completed = 0, spent = 0, coin_index = 0;
  while (true) {
    RngStream coin_rng = rng.derive(coin_index++);
    CoinSpec coin = draw_coin(pop, coin_rng);
    CoinView view(coin, pop.delta, coin_rng.derive(1));
    auto res = single_coin_estimate(view, spec);
    if (spent + res.real_flips > flip_budget) break;  // over budget: discard
    spent += res.real_flips;
    sum += res.value;
    ++completed;
    if (spent == flip_budget) break;
  }
  rep.flips_used = spent;
  rep.coins_used = completed;
  if (completed == 0) {
    rep.status = RunStatus::empty;
    rep.estimate = 0.0;
  } else {
    rep.estimate = sum / double(completed);
  }
  return rep;
}

// Baseline: classify m sampled coins by the majority of a fixed odd number
// of flips each and report the positive fraction.
inline RunReport majority_vote_estimate(const CoinPopulation& pop,
                                        std::uint64_t m, int flips_per_coin,
                                        RngStream rng) {
  pop.validate();
  if (flips_per_coin < 1 || flips_per_coin % 2 == 0)
    throw std::invalid_argument("majority_vote_estimate: flips must be odd");
  RunReport rep;
  rep.seed = rng.seed();
  rep.stream_id = rng.stream_id();
  if (m == 0) {
    rep.status = RunStatus::empty;
    return rep;
  }
  std::uint64_t positive = 0;
  for (std::uint64_t i = 0; i < m; ++i) {
    RngStream coin_rng = rng.derive(i);
    CoinSpec coin = draw_coin(pop, coin_rng);
    int heads = 0;
    for (int f = 0; f < flips_per_coin; ++f) heads += flip(coin, coin_rng);
    if (2 * heads > flips_per_coin) ++positive;
    rep.flips_used += static_cast<std::uint64_t>(flips_per_coin);
    rep.coins_used += 1;
  }
  rep.estimate = double(positive) / double(m);
  return rep;
}

// Coordinate descent on the payout values: minimize the worst |E[output]-1|
// over grid biases at least 1/2 + delta_floor, one golden-section line
// search per coordinate, cycling until no sweep improves. Deterministic
// given the grid. Cells with a tails majority stay pinned at 0, and so do
// heads-majority cells whose seed payout is exactly 0 (a zero seed marks the
// cell as disabled).
inline SingleCoinEstimatorSpec tune_output_values(
    const SingleCoinEstimatorSpec& spec, double delta_floor,
    const std::vector<double>& grid) {
  spec.validate();
  if (!(delta_floor >= 0.25))
    throw std::invalid_argument("tune_output_values: delta_floor < 1/4");
  std::vector<double> ps;
  for (double p : grid)
    if (p >= 0.5 + delta_floor - 1e-12 && p <= 1.0) ps.push_back(p);
  if (ps.empty())
    throw std::invalid_argument("tune_output_values: empty effective grid");

  // Last-row stop mass per k at each grid bias; E[output](p) is linear in the
  // payouts with these weights.
  auto rule = as_stopping_rule(spec);
  std::vector<int> free_k;
  for (int k = 0; k <= spec.n_max; ++k)
    if (2 * k > spec.n_max && spec.values[k] != 0.0) free_k.push_back(k);
  if (free_k.empty())
    throw std::invalid_argument("tune_output_values: no free payout cells");
  std::vector<std::vector<double>> w(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    auto dist = termination_distribution(rule, ps[i]);
    for (int k : free_k) w[i].push_back(dist.probs.at(spec.n_max, k));
  }

  std::vector<double> v;
  for (int k : free_k) v.push_back(spec.values[k]);
  auto objective = [&]() {
    double worst = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      double e = 0.0;
      for (std::size_t j = 0; j < v.size(); ++j) e += w[i][j] * v[j];
      worst = std::max(worst, std::abs(e - 1.0));
    }
    return worst;
  };

  const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
  auto line_min = [&](std::size_t j) {
    double a = 0.0, b = 16.0;
    auto f = [&](double x) {
      double old = v[j];
      v[j] = x;
      double r = objective();
      v[j] = old;
      return r;
    };
    double c = b - golden * (b - a), d = a + golden * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 80; ++it) {
      if (fc < fd) {
        b = d; d = c; fd = fc;
        c = b - golden * (b - a); fc = f(c);
      } else {
        a = c; c = d; fc = fd;
        d = a + golden * (b - a); fd = f(d);
      }
    }
    v[j] = 0.5 * (a + b);
  };

  double cur = objective();
  for (int sweep = 0; sweep < 500; ++sweep) {
    double prev = cur;
    for (std::size_t j = 0; j < v.size(); ++j) line_min(j);
    cur = objective();
    if (prev - cur < 1e-13) break;
  }

  SingleCoinEstimatorSpec out = spec;
  for (std::size_t j = 0; j < free_k.size(); ++j) out.values[free_k[j]] = v[j];
  return out;
}

inline double max_grid_bias(const SingleCoinEstimatorSpec& spec,
                            double delta_floor,
                            const std::vector<double>& grid) {
  double worst = 0.0;
  for (double p : grid)
    if (p >= 0.5 + delta_floor - 1e-12 && p <= 1.0)
      worst = std::max(worst, std::abs(expected_output(spec, p) - 1.0));
  return worst;
}

}  // namespace coinpop

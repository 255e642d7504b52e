#pragma once
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "coinpop/coin_model.hpp"
#include "coinpop/estimators.hpp"
#include "coinpop/rng.hpp"
#include "coinpop/walk.hpp"

namespace coinpop {

// Depth law for refined sampling: P(n = 2^i) proportional to 2^(-1.5 i),
// normalizer (sqrt(8)-1)/sqrt(8). Depths are capped at 2^15; the geometric
// tail (mass 2^-22.5) is folded into the deepest level, which shifts the
// estimator's expectation from f(p) to the depth-2^15 binomial smoothing of
// f, a perturbation of order f''/2^15.
struct DepthLaw {
  static constexpr int kMaxLevel = 15;

  static double normalizer() { return (std::sqrt(8.0) - 1.0) / std::sqrt(8.0); }

  static double level_probability(int level) {
    if (level < 0 || level > kMaxLevel)
      throw std::invalid_argument("DepthLaw: bad level");
    if (level == kMaxLevel)
      return std::pow(2.0, -1.5 * kMaxLevel);  // own mass plus folded tail
    return normalizer() * std::pow(2.0, -1.5 * level);
  }

  // Reciprocal of level_probability; keeps per-level contributions to the
  // expectation telescoping exactly.
  static double multiplier(int level) { return 1.0 / level_probability(level); }

  static int sample_level(RngStream& rng) {
    double u = rng.next_double();
    double acc = 0.0;
    for (int i = 0; i < kMaxLevel; ++i) {
      acc += level_probability(i);
      if (u < acc) return i;
    }
    return kMaxLevel;
  }

  static double exact_mean_depth() {
    double m = 0.0;
    for (int i = 0; i <= kMaxLevel; ++i)
      m += level_probability(i) * std::pow(2.0, i);
    return m;
  }
};

inline int sample_depth(RngStream& rng) {
  return 1 << DepthLaw::sample_level(rng);
}

// P(i heads land in a uniformly random half of a sequence with k heads among
// n flips): C(n/2,i) C(n/2,k-i) / C(n,k).
inline double half_split_pmf(int n, int k, int i) {
  int h = n / 2;
  if (i < 0 || i > h || k - i < 0 || k - i > h) return 0.0;
  return std::exp(log_choose(h, i) + log_choose(h, k - i) - log_choose(n, k));
}

// One refined sample of f(p): random power-of-two depth, then the payout
// f(k/n) minus the half-depth hypergeometric smoothing of f, scaled by the
// reciprocal depth probability. Contributions telescope across depths, so
// the expectation is the deepest-level binomial smoothing of f; the sum is
// omitted at n = 1 where no half depth exists.
template <typename F, typename FlipSource>
inline EstimateResult refined_sample(FlipSource& coin, const F& f,
                                     RngStream& rng) {
  std::uint64_t before = coin.real_flips();
  int level = DepthLaw::sample_level(rng);
  int n = 1 << level;
  int k = 0;
  for (int i = 0; i < n; ++i) k += coin.flip();
  double correction = 0.0;
  if (n > 1) {
    int h = n / 2;
    int lo = std::max(0, k - h), hi = std::min(h, k);
    for (int i = lo; i <= hi; ++i)
      correction += f(double(i) / double(h)) * half_split_pmf(n, k, i);
  }
  double value =
      DepthLaw::multiplier(level) * (f(double(k) / double(n)) - correction);
  return {value, coin.real_flips() - before, n};
}

// Target function for filtered estimation at depth d: zero on [0,1/4],
// reciprocal ballot survival on [3/4,1], and the unique quintic joining the
// two pieces with matching value and first two derivatives at both knots.
class TargetFunction {
 public:
  explicit TargetFunction(int d) : d_(d) {
    if (d < 1) throw std::invalid_argument("TargetFunction: d < 1");
    double s = survival_polynomial(d, 0.75);
    double sp = survival_derivative(d, 0.75);
    double spp = survival_second_derivative(d, 0.75);
    double g0 = 1.0 / s;
    double g1 = -sp / (s * s);
    double g2 = (2.0 * sp * sp - s * spp) / (s * s * s);
    right_[0] = g0;
    right_[1] = g1 * kWidth;
    right_[2] = g2 * kWidth * kWidth;
  }

  int depth() const { return d_; }

  double operator()(double p) const {
    if (p <= 0.25) return 0.0;
    if (p >= 0.75) return 1.0 / survival_polynomial(d_, p);
    double t = (p - 0.25) / kWidth;
    double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
    // Quintic Hermite basis; left end has value and both derivatives zero.
    double h3 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    double h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    double h5 = 0.5 * t3 - t4 + 0.5 * t5;
    return right_[0] * h3 + right_[1] * h4 + right_[2] * h5;
  }

  static double survival_derivative(int d, double p) {
    double s = 0.0;
    for (int k = d / 2 + 1; k <= d; ++k) {
      double c = ballot_survival(d, k) * std::exp(log_choose(d, k));
      double t = 0.0;
      if (k >= 1) t += k * std::pow(p, k - 1) * std::pow(1 - p, d - k);
      if (d - k >= 1) t -= (d - k) * std::pow(p, k) * std::pow(1 - p, d - k - 1);
      s += c * t;
    }
    return s;
  }

  static double survival_second_derivative(int d, double p) {
    double s = 0.0;
    for (int k = d / 2 + 1; k <= d; ++k) {
      double c = ballot_survival(d, k) * std::exp(log_choose(d, k));
      double t = 0.0;
      if (k >= 2) t += double(k) * (k - 1) * std::pow(p, k - 2) * std::pow(1 - p, d - k);
      if (k >= 1 && d - k >= 1)
        t -= 2.0 * k * (d - k) * std::pow(p, k - 1) * std::pow(1 - p, d - k - 1);
      if (d - k >= 2)
        t += double(d - k) * (d - k - 1) * std::pow(p, k) * std::pow(1 - p, d - k - 2);
      s += c * t;
    }
    return s;
  }

 private:
  static constexpr double kWidth = 0.5;
  int d_;
  std::array<double, 3> right_{};
};

inline TargetFunction build_target_function(int d) { return TargetFunction(d); }

// Filter depth so the survival odds of a worst-case negative virtual coin
// (bias 1/4) drop below rho_hat / 2: smallest d with exp(-d/8) <= rho_hat/2.
inline int filter_depth_for(double rho_hat) {
  if (!(rho_hat > 0.0 && rho_hat < 1.0))
    throw std::invalid_argument("filter_depth_for: rho_hat outside (0,1)");
  int d = static_cast<int>(std::ceil(8.0 * std::log(2.0 / rho_hat)));
  return std::max(d, 1);
}

struct BudgetedPlan {
  std::uint64_t budget = 0;
  std::uint64_t coins = 0;
  int filter_depth = 1;
  double rho_hat = 0.5;

  void validate() const {
    if (coins < 1) throw std::invalid_argument("BudgetedPlan: coins < 1");
    if (filter_depth < 1) throw std::invalid_argument("BudgetedPlan: depth < 1");
    if (!(rho_hat > 0.0 && rho_hat < 1.0))
      throw std::invalid_argument("BudgetedPlan: rho_hat outside (0,1)");
  }
};

// coins = ceil(coin_factor * delta^2 * budget), at least 1.
inline BudgetedPlan make_plan(double delta, std::uint64_t budget,
                              double rho_hat, double coin_factor = 0.25) {
  BudgetedPlan plan;
  plan.budget = budget;
  plan.rho_hat = rho_hat;
  plan.filter_depth = filter_depth_for(rho_hat);
  double t = std::ceil(coin_factor * delta * delta * double(budget));
  plan.coins = t < 1.0 ? 1 : static_cast<std::uint64_t>(t);
  return plan;
}

// Filter-then-estimate: walk each virtual coin up to filter_depth flips,
// abandoning as soon as tails reach a majority (ties abandon); survivors are
// handed to refined sampling with the depth-matched target function, whose
// values average 1/survival for positive coins. The sum over survivors,
// divided by the number of coins processed, estimates rho. Processing stops
// early if the flip budget runs out mid-coin; the partial average over
// completed coins keeps the same expectation.
inline RunReport filter_then_estimate(const CoinPopulation& pop,
                                      const BudgetedPlan& plan,
                                      RngStream rng) {
  pop.validate();
  plan.validate();
  TargetFunction f(plan.filter_depth);
  RunReport rep;
  rep.seed = rng.seed();
  rep.stream_id = rng.stream_id();
  double sum = 0.0;
  std::uint64_t completed = 0;
  for (std::uint64_t i = 0; i < plan.coins; ++i) {
    RngStream coin_rng = rng.derive(i);
    CoinSpec coin = draw_coin(pop, coin_rng);
    CoinView view(coin, pop.delta, coin_rng.derive(1));
    detail::CappedCoinView capped(view, plan.budget - rep.flips_used);
    RngStream aux = coin_rng.derive(2);
    double value = 0.0;
    bool whole_coin = true;
    try {
      int n = 0, k = 0;
      bool survived = true;
      while (n < plan.filter_depth) {
        k += capped.flip();
        ++n;
        if (2 * k <= n) {
          survived = false;
          break;
        }
      }
      if (survived) value = refined_sample(capped, f, aux).value;
    } catch (const detail::FlipBudgetExhausted&) {
      whole_coin = false;  // budget ran out mid-coin: discard, stop
    }
    rep.flips_used += capped.spent();
    if (!whole_coin) break;
    sum += value;
    ++completed;
    rep.coins_used = completed;
  }
  if (completed == 0) {
    rep.status = RunStatus::empty;
    return rep;
  }
  rep.estimate = sum / double(completed);
  return rep;
}

// Stage constants for the budgeted optimal estimator. The walk-depth floor
// and the epsilon constant keep the stage-1 early exit reachable at small
// budgets while still forcing the handoff to stages 2-3 when the budget is
// large relative to rho.
struct OptimalConfig {
  double stage1_coin_factor = 0.125;   // t1 = ceil(delta^2 B / 8)
  double stage2_coin_factor = 1.0;     // t2 = ceil(sqrt(delta^2 B))
  double stage3_coin_factor = 0.25;    // via make_plan on budget B/2
  double eps_budget_constant = 64.0;   // eps2 = 64 / (delta^2 B)
  double group_delta = 0.9;            // constant-failure grouping (3 groups)
  int min_walk_depth = 15;
};

namespace detail {

inline double stage_epsilon(double delta, std::uint64_t budget,
                            const OptimalConfig& cfg) {
  double d2b = delta * delta * double(budget);
  double eps = cfg.eps_budget_constant / std::max(d2b, 1.0);
  // Clamp so depth_for_epsilon is defined and floored at min_walk_depth.
  double floor_eps = std::exp(-double(cfg.min_walk_depth) / 24.0);
  return std::min(std::max(eps, 1e-12), floor_eps);
}

}  // namespace detail

// Budget-driven estimator: try the triangular walk on a small slice of the
// budget and return its answer if it finishes cheaply (small-rho worlds make
// it cheap); otherwise spend another slice on a coarse factor-2 guess of rho
// and finish with filter_then_estimate on the remaining half. Total real
// flips never exceed the budget.
inline RunReport optimal_estimate(const CoinPopulation& pop,
                                  std::uint64_t budget, RngStream rng,
                                  const OptimalConfig& cfg = {}) {
  pop.validate();
  if (budget < 1) throw std::invalid_argument("optimal_estimate: budget < 1");
  RunReport rep;
  rep.seed = rng.seed();
  rep.stream_id = rng.stream_id();
  double d2b = pop.delta * pop.delta * double(budget);
  double eps2 = detail::stage_epsilon(pop.delta, budget, cfg);
  std::uint64_t cap = budget / 4;

  // Stage 1: full triangular-walk estimate; exit if it fits in budget/4.
  std::uint64_t t1 = static_cast<std::uint64_t>(
      std::max(1.0, std::ceil(cfg.stage1_coin_factor * d2b)));
  TwalkOptions opts1;
  opts1.flip_cap = cap;
  RunReport s1 = triangular_walk_estimate(pop, t1, eps2, cfg.group_delta,
                                          rng.derive(1), opts1);
  rep.stages.stage_reached = 1;
  rep.stages.stage_flips[0] = s1.flips_used;
  rep.flips_used += s1.flips_used;
  rep.coins_used += s1.coins_used;
  if (s1.status != RunStatus::failed) {
    rep.estimate = s1.estimate;
    rep.status = s1.status;
    rep.group_means = s1.group_means;
    return rep;
  }

  // Stage 2: fresh coins for a coarse rho estimate; hard failure if even
  // this slice cannot finish.
  std::uint64_t t2 = static_cast<std::uint64_t>(
      std::max(1.0, std::ceil(cfg.stage2_coin_factor * std::sqrt(d2b))));
  TwalkOptions opts2;
  opts2.flip_cap = cap;
  RunReport s2 = triangular_walk_estimate(pop, t2, eps2, cfg.group_delta,
                                          rng.derive(2), opts2);
  rep.stages.stage_reached = 2;
  rep.stages.stage_flips[1] = s2.flips_used;
  rep.flips_used += s2.flips_used;
  rep.coins_used += s2.coins_used;
  if (s2.status == RunStatus::failed) {
    rep.status = RunStatus::failed;
    return rep;
  }
  // A usable filter depth needs rho_hat strictly inside (0,1); estimates at
  // or below the resolution of t2 coins are clamped to it.
  double floor = 1.0 / double(std::max<std::uint64_t>(t2, 2));
  double rho_hat = std::min(std::max(s2.estimate, floor), 0.5);
  rep.stages.rho_hat = rho_hat;

  // Stage 3: filtered refined sampling on the back half of the budget.
  BudgetedPlan plan =
      make_plan(pop.delta, budget / 2, rho_hat, cfg.stage3_coin_factor);
  RunReport s3 = filter_then_estimate(pop, plan, rng.derive(3));
  rep.stages.stage_reached = 3;
  rep.stages.stage_flips[2] = s3.flips_used;
  rep.flips_used += s3.flips_used;
  rep.coins_used += s3.coins_used;
  if (s3.status == RunStatus::empty) {
    rep.status = RunStatus::failed;
    return rep;
  }
  rep.estimate = s3.estimate;
  return rep;
}

// Median over independent repetitions, ignoring failed runs; smallest odd
// repetition count that is at least ln(1/delta_fail), never below 3.
inline RunReport optimal_estimate_boosted(const CoinPopulation& pop,
                                          std::uint64_t budget,
                                          double delta_fail, RngStream rng,
                                          const OptimalConfig& cfg = {}) {
  if (!(delta_fail > 0.0 && delta_fail < 1.0))
    throw std::invalid_argument("optimal_estimate_boosted: bad delta_fail");
  int reps = static_cast<int>(std::ceil(std::log(1.0 / delta_fail)));
  if (reps < 3) reps = 3;
  if (reps % 2 == 0) ++reps;
  RunReport rep;
  rep.seed = rng.seed();
  rep.stream_id = rng.stream_id();
  std::vector<double> estimates;
  for (int r = 0; r < reps; ++r) {
    RunReport one = optimal_estimate(pop, budget, rng.derive(r), cfg);
    rep.flips_used += one.flips_used;
    rep.coins_used += one.coins_used;
    if (one.status == RunStatus::ok) estimates.push_back(one.estimate);
  }
  if (estimates.empty()) {
    rep.status = RunStatus::failed;
    return rep;
  }
  rep.estimate = median_of(estimates);
  rep.group_means = estimates;
  return rep;
}

inline int boosted_repetitions(double delta_fail) {
  int reps = static_cast<int>(std::ceil(std::log(1.0 / delta_fail)));
  if (reps < 3) reps = 3;
  if (reps % 2 == 0) ++reps;
  return reps;
}

}  // namespace coinpop

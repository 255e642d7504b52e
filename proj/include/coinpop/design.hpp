#pragma once
#include <cmath>
#include <stdexcept>
#include <vector>

#include "coinpop/moments.hpp"
#include "coinpop/simplex.hpp"
#include "coinpop/triangle.hpp"
#include "coinpop/walk.hpp"

namespace coinpop {

// A stopping rule with terminal payouts whose population mean estimates rho:
// expected output 1 on a random positive coin and 0 on a random negative
// coin, with the smallest variance achievable for the given rule.
struct LinearEstimator {
  StoppingRule rule;
  TriArray<double> values;
  double variance = 0.0;        // of the estimator under the rho-mixture
  double expected_flips = 0.0;  // per run under the rho-mixture
  double functional = 0.0;      // discrimination_functional of the rule
};

// Closed-form minimum-variance payouts for a fixed rule. The centered
// payouts are proportional to (h+ - h-)/(rho h+ + (1-rho) h-); adding rho
// back shifts the two unbiasedness constraints onto (1, 0).
inline LinearEstimator optimal_values(const StoppingRule& rule,
                                      const MomentTable& hplus,
                                      const MomentTable& hminus, double rho) {
  rule.validate();
  if (!(rho > 0.0 && rho < 1.0))
    throw std::invalid_argument("optimal_values: rho outside (0,1)");
  if (hplus.n_max() < rule.n_max || hminus.n_max() < rule.n_max)
    throw std::invalid_argument("optimal_values: moment tables too shallow");
  auto coeffs = derive_coefficients(rule);
  double U = discrimination_functional(coeffs.alpha, hplus, hminus, rho);
  if (U <= 0.0)
    throw std::domain_error(
        "optimal_values: rule cannot distinguish the populations (all stop "
        "mass has h+ = h-)");
  LinearEstimator est;
  est.rule = rule;
  est.functional = U;
  est.variance = 1.0 / U;
  est.values = TriArray<double>(rule.n_max, 0.0);
  for (int n = 0; n <= rule.n_max; ++n)
    for (int k = 0; k <= n; ++k) {
      if (coeffs.alpha.at(n, k) <= 0.0) continue;
      double hp = hplus.at(n, k), hm = hminus.at(n, k);
      double den = rho * hp + (1.0 - rho) * hm;
      if (den <= 0.0) continue;
      est.values.at(n, k) = ((hp - hm) / den) / U + rho;
    }
  est.expected_flips =
      expected_flips_per_run(coeffs.alpha, hplus, hminus, rho);
  return est;
}

struct LpSolution {
  enum class Status { optimal, infeasible };
  Status status = Status::optimal;
  double objective = 0.0;  // U
  TriArray<double> alpha, beta;
  int n_max = 0;
};

namespace detail {

inline int tri_cells(int n_max) { return (n_max + 1) * (n_max + 2) / 2; }
inline int tri_index(int n, int k) { return n * (n + 1) / 2 + k; }

}  // namespace detail

// Best stopping rule for known conditional bias distributions, as a linear
// program over reach/stop coefficients: maximize the discrimination
// functional subject to the walk recurrence, stop-at-most-reach, sure
// stopping on the last row, and unit expected flips. Scale-invariance of the
// ratio objective means the unit-cost normalization loses nothing.
inline LpSolution solve_stopping_lp(const MomentTable& hplus,
                                    const MomentTable& hminus, double rho,
                                    int n_max) {
  if (n_max < 1) throw std::invalid_argument("solve_stopping_lp: n_max < 1");
  if (!(rho > 0.0 && rho < 1.0))
    throw std::invalid_argument("solve_stopping_lp: rho outside (0,1)");
  if (hplus.n_max() < n_max || hminus.n_max() < n_max)
    throw std::invalid_argument("solve_stopping_lp: moment tables too shallow");

  const int cells = detail::tri_cells(n_max);
  LpProblem lp;
  lp.num_vars = 2 * cells;  // alpha block, then beta block
  auto a_var = [&](int n, int k) { return detail::tri_index(n, k); };
  auto b_var = [&](int n, int k) { return cells + detail::tri_index(n, k); };

  lp.objective.assign(lp.num_vars, 0.0);
  for (int n = 0; n <= n_max; ++n)
    for (int k = 0; k <= n; ++k) {
      double hp = hplus.at(n, k), hm = hminus.at(n, k);
      double den = rho * hp + (1.0 - rho) * hm;
      if (den > 0.0) {
        double d = hp - hm;
        lp.objective[a_var(n, k)] = d * d / den;
      }
    }

  // Reach recurrence: beta[n+1][j] = sum of (beta - alpha) over parents.
  for (int n = 0; n < n_max; ++n)
    for (int j = 0; j <= n + 1; ++j) {
      std::vector<double> row(lp.num_vars, 0.0);
      row[b_var(n + 1, j)] = 1.0;
      if (j <= n) {
        row[b_var(n, j)] -= 1.0;
        row[a_var(n, j)] += 1.0;
      }
      if (j >= 1) {
        row[b_var(n, j - 1)] -= 1.0;
        row[a_var(n, j - 1)] += 1.0;
      }
      lp.eq_rows.push_back(std::move(row));
      lp.eq_rhs.push_back(0.0);
    }
  // Sure stop at the maximum depth: alpha = beta on the last row.
  for (int k = 0; k <= n_max; ++k) {
    std::vector<double> row(lp.num_vars, 0.0);
    row[a_var(n_max, k)] = 1.0;
    row[b_var(n_max, k)] = -1.0;
    lp.eq_rows.push_back(std::move(row));
    lp.eq_rhs.push_back(0.0);
  }
  // Stop mass cannot exceed reach mass before the last row.
  for (int n = 0; n < n_max; ++n)
    for (int k = 0; k <= n; ++k) {
      std::vector<double> row(lp.num_vars, 0.0);
      row[a_var(n, k)] = 1.0;
      row[b_var(n, k)] = -1.0;
      lp.ub_rows.push_back(std::move(row));
      lp.ub_rhs.push_back(0.0);
    }
  // Unit expected sample cost.
  {
    std::vector<double> row(lp.num_vars, 0.0);
    for (int n = 0; n <= n_max; ++n)
      for (int k = 0; k <= n; ++k) {
        double den = rho * hplus.at(n, k) + (1.0 - rho) * hminus.at(n, k);
        row[a_var(n, k)] = double(n) * den;
      }
    lp.ub_rows.push_back(std::move(row));
    lp.ub_rhs.push_back(1.0);
  }

  LpResult res = solve_lp(lp);
  LpSolution sol;
  sol.n_max = n_max;
  if (res.status != LpResult::Status::optimal) {
    sol.status = LpSolution::Status::infeasible;
    return sol;
  }
  sol.objective = res.objective;
  sol.alpha = TriArray<double>(n_max, 0.0);
  sol.beta = TriArray<double>(n_max, 0.0);
  for (int n = 0; n <= n_max; ++n)
    for (int k = 0; k <= n; ++k) {
      sol.alpha.at(n, k) = std::max(0.0, res.x[a_var(n, k)]);
      sol.beta.at(n, k) = std::max(0.0, res.x[b_var(n, k)]);
    }
  return sol;
}

// Largest violation over all LP constraints at a candidate solution;
// independent of the solver path.
inline double lp_constraint_residual(const LpSolution& sol,
                                     const MomentTable& hplus,
                                     const MomentTable& hminus, double rho) {
  double worst = 0.0;
  int n_max = sol.n_max;
  for (int n = 0; n < n_max; ++n)
    for (int j = 0; j <= n + 1; ++j) {
      double rhs = 0.0;
      if (j <= n) rhs += sol.beta.at(n, j) - sol.alpha.at(n, j);
      if (j >= 1) rhs += sol.beta.at(n, j - 1) - sol.alpha.at(n, j - 1);
      worst = std::max(worst, std::abs(sol.beta.at(n + 1, j) - rhs));
    }
  for (int k = 0; k <= n_max; ++k)
    worst = std::max(worst,
                     std::abs(sol.alpha.at(n_max, k) - sol.beta.at(n_max, k)));
  for (int n = 0; n < n_max; ++n)
    for (int k = 0; k <= n; ++k)
      worst = std::max(worst, sol.alpha.at(n, k) - sol.beta.at(n, k));
  double cost = 0.0;
  for (int n = 0; n <= n_max; ++n)
    for (int k = 0; k <= n; ++k) {
      double den = rho * hplus.at(n, k) + (1.0 - rho) * hminus.at(n, k);
      cost += double(n) * sol.alpha.at(n, k) * den;
      worst = std::max(worst, -sol.alpha.at(n, k));
      worst = std::max(worst, -sol.beta.at(n, k));
    }
  worst = std::max(worst, cost - 1.0);
  return worst;
}

// Full pipeline: solve the LP, rescale so the root reach coefficient is 1,
// read off gamma = alpha/beta (0 on unreached cells), and attach the
// closed-form payouts. The median-of-means cost to reach additive error eps
// is O(1/(U eps^2) log(1/delta)) runs' worth of flips, with U the LP value.
inline LinearEstimator design_estimator(const MomentTable& hplus,
                                        const MomentTable& hminus, double rho,
                                        int n_max) {
  LpSolution sol = solve_stopping_lp(hplus, hminus, rho, n_max);
  if (sol.status != LpSolution::Status::optimal)
    throw std::runtime_error("design_estimator: LP infeasible");
  double scale = sol.beta.at(0, 0);
  if (scale <= 0.0)
    throw std::runtime_error("design_estimator: degenerate LP solution");
  StoppingRule rule;
  rule.n_max = n_max;
  rule.gamma = TriArray<double>(n_max, 0.0);
  for (int n = 0; n < n_max; ++n)
    for (int k = 0; k <= n; ++k) {
      double b = sol.beta.at(n, k);
      double g = b > 1e-12 * scale ? sol.alpha.at(n, k) / b : 0.0;
      rule.gamma.at(n, k) = std::min(1.0, std::max(0.0, g));
    }
  for (int k = 0; k <= n_max; ++k) rule.gamma.at(n_max, k) = 1.0;
  return optimal_values(rule, hplus, hminus, rho);
}

}  // namespace coinpop

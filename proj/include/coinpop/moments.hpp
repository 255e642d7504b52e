#pragma once
#include "coinpop/coin_model.hpp"
#include "coinpop/triangle.hpp"

namespace coinpop {

// h[n][k] = E[p^k (1-p)^(n-k)] over a bias distribution. Satisfies the
// Pascal split h[n][k] = h[n+1][k+1] + h[n+1][k] exactly.
struct MomentTable {
  TriArray<double> h;

  double at(int n, int k) const { return h.at(n, k); }
  int n_max() const { return h.n_max(); }
};

inline MomentTable moment_table(const BiasDistribution& dist, int n_max) {
  dist.validate();
  MomentTable t{TriArray<double>(n_max)};
  for (const auto& atom : dist.support) {
    // Powers built incrementally per atom.
    std::vector<double> pk(n_max + 1), qk(n_max + 1);
    pk[0] = qk[0] = 1.0;
    for (int i = 1; i <= n_max; ++i) {
      pk[i] = pk[i - 1] * atom.bias;
      qk[i] = qk[i - 1] * (1.0 - atom.bias);
    }
    for (int n = 0; n <= n_max; ++n)
      for (int k = 0; k <= n; ++k)
        t.h.at(n, k) += atom.weight * pk[k] * qk[n - k];
  }
  return t;
}

// Sum over cells of alpha * (h+ - h-)^2 / (rho h+ + (1-rho) h-). This is the
// distinguishing power of a stopping rule per run: the LP objective, the
// reciprocal of the best linear-estimator variance, and the epsilon^2-free
// squared-Hellinger functional are all this one sum.
inline double discrimination_functional(const TriArray<double>& alpha,
                                        const MomentTable& hplus,
                                        const MomentTable& hminus,
                                        double rho) {
  double total = 0.0;
  for (int n = 0; n <= alpha.n_max(); ++n)
    for (int k = 0; k <= n; ++k) {
      double a = alpha.at(n, k);
      if (a <= 0.0) continue;
      double hp = hplus.at(n, k), hm = hminus.at(n, k);
      double den = rho * hp + (1.0 - rho) * hm;
      if (den <= 0.0) continue;  // unreachable cell, h+ = h- = 0
      double d = hp - hm;
      total += a * d * d / den;
    }
  return total;
}

// Expected flips per run of a rule with terminal coefficients alpha over the
// rho-mixture of the two bias distributions.
inline double expected_flips_per_run(const TriArray<double>& alpha,
                                     const MomentTable& hplus,
                                     const MomentTable& hminus, double rho) {
  double total = 0.0;
  for (int n = 0; n <= alpha.n_max(); ++n)
    for (int k = 0; k <= n; ++k) {
      double den = rho * hplus.at(n, k) + (1.0 - rho) * hminus.at(n, k);
      total += double(n) * alpha.at(n, k) * den;
    }
  return total;
}

}  // namespace coinpop

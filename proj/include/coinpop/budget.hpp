#pragma once
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <utility>

#include "coinpop/coin_model.hpp"
#include "coinpop/estimators.hpp"
#include "coinpop/rng.hpp"
#include "coinpop/walk.hpp"

namespace coinpop {

// Terminal class of one walk plus its flip cost.
struct Outcome {
  std::pair<int, int> key;  // (n, k)
  std::uint64_t cost = 1;
};

struct OutcomeTally {
  std::map<std::pair<int, int>, std::uint64_t> counts;
  std::optional<std::pair<int, int>> discarded;
  std::uint64_t budget = 0;
  std::uint64_t consumed = 0;  // by counted outcomes only

  std::uint64_t total_count() const {
    std::uint64_t t = 0;
    for (const auto& [key, c] : counts) t += c;
    return t;
  }
};

// Draw outcomes until the budget is exhausted. An outcome whose cost exceeds
// the remaining budget is discarded (not counted) and ends the run; hitting
// the budget exactly also ends it. Counting frequencies over the kept
// outcomes is an unbiased estimate of the outcome distribution.
template <typename Sampler>
inline OutcomeTally run_until_budget(Sampler&& sampler, std::uint64_t budget,
                                     RngStream& rng) {
  OutcomeTally tally;
  tally.budget = budget;
  std::uint64_t remaining = budget;
  while (remaining > 0) {
    Outcome o = sampler(rng);
    if (o.cost < 1)
      throw std::invalid_argument("run_until_budget: outcome cost < 1");
    if (o.cost > remaining) {
      tally.discarded = o.key;
      break;
    }
    remaining -= o.cost;
    tally.consumed += o.cost;
    tally.counts[o.key] += 1;
  }
  return tally;
}

struct FrequencyEstimate {
  std::map<std::pair<int, int>, double> freq;
  bool empty = false;
};

inline FrequencyEstimate frequency_estimate(const OutcomeTally& tally) {
  FrequencyEstimate fe;
  std::uint64_t total = tally.total_count();
  if (total == 0) {
    fe.empty = true;
    return fe;
  }
  for (const auto& [key, c] : tally.counts)
    fe.freq[key] = double(c) / double(total);
  return fe;
}

// Budgeted run of a walk-with-payouts estimator over fresh coins from the
// population: frequency-estimate the terminal (n,k) classes, then dot with
// the payout triangle. Costs are real flips (majority blocks included).
inline RunReport budgeted_linear(const CoinPopulation& pop,
                                 const StoppingRule& rule,
                                 const TriArray<double>& values,
                                 std::uint64_t budget, RngStream rng) {
  pop.validate();
  rule.validate();
  RunReport rep;
  rep.seed = rng.seed();
  rep.stream_id = rng.stream_id();
  std::uint64_t coin_index = 0;
  auto sampler = [&](RngStream&) -> Outcome {
    RngStream coin_rng = rng.derive(coin_index++);
    CoinSpec coin = draw_coin(pop, coin_rng);
    CoinView view(coin, pop.delta, coin_rng.derive(1));
    RngStream stops = coin_rng.derive(2);
    WalkOutcome w = run_walk(rule, view, stops);
    return Outcome{{w.n, w.k}, view.real_flips()};
  };
  OutcomeTally tally = run_until_budget(sampler, budget, rng);
  rep.flips_used = tally.consumed;
  rep.coins_used = tally.total_count();
  FrequencyEstimate fe = frequency_estimate(tally);
  if (fe.empty) {
    rep.status = RunStatus::empty;
    return rep;
  }
  double est = 0.0;
  for (const auto& [key, f] : fe.freq)
    est += f * values.at(key.first, key.second);
  rep.estimate = est;
  return rep;
}

inline RunReport budgeted_twalk(const CoinPopulation& pop,
                                const SingleCoinEstimatorSpec& spec,
                                std::uint64_t budget, RngStream rng) {
  return budgeted_linear(pop, as_stopping_rule(spec), value_triangle(spec),
                         budget, rng);
}

}  // namespace coinpop

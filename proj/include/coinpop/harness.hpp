#pragma once
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "coinpop/budget.hpp"
#include "coinpop/coin_model.hpp"
#include "coinpop/estimators.hpp"

namespace coinpop {

// Walk depth and pre-tuned payout values for the gap >= 0.3 regime; payouts
// were searched once to flatten the expected output near 1 over that range
// and are reusable whenever the gap assumption holds.
inline constexpr int kTwalkDepth = 15;
inline const std::vector<double> kTwalk15TunedValues = {
    0, 0, 0, 0, 0, 0, 0, 0, 0.0, 6.913, 5.032, 2.101, 0.636, 1.965, 1.016,
    1.009};

inline SingleCoinEstimatorSpec twalk15_spec(bool tuned) {
  if (!tuned) return SingleCoinEstimatorSpec::with_default_values(kTwalkDepth);
  SingleCoinEstimatorSpec s;
  s.n_max = kTwalkDepth;
  s.values = kTwalk15TunedValues;
  s.validate();
  return s;
}

struct ExperimentPoint {
  double rho;
  double delta;
};

struct ExperimentConfig {
  std::vector<ExperimentPoint> points;
  std::vector<std::string> methods;  // "twalk", "vote"
  std::vector<std::uint64_t> budgets;
  int trials = 10;
  std::uint64_t seed = 0;
  bool tuned_values = true;
  int vote_flips_per_coin = kTwalkDepth;  // same per-coin depth as the walk

  void validate() const {
    if (points.empty() || methods.empty() || budgets.empty() || trials < 1)
      throw std::invalid_argument("ExperimentConfig: empty dimension");
    for (std::size_t i = 1; i < budgets.size(); ++i)
      if (budgets[i] <= budgets[i - 1])
        throw std::invalid_argument(
            "ExperimentConfig: budgets must be strictly increasing");
    for (const auto& m : methods)
      if (m != "twalk" && m != "vote")
        throw std::invalid_argument("ExperimentConfig: unknown method " + m);
  }
};

// The convergence-experiment grid: two-point worlds over rho in
// {0.005, 0.01, 0.03, 0.1} and gap 0.3 or 0.4, both methods, ten trials.
inline ExperimentConfig preset_soda(std::uint64_t seed = 20240601) {
  ExperimentConfig cfg;
  for (double delta : {0.3, 0.4})
    for (double rho : {0.005, 0.01, 0.03, 0.1})
      cfg.points.push_back({rho, delta});
  cfg.methods = {"twalk", "vote"};
  cfg.budgets = {2000, 5000, 10000, 20000, 50000, 100000};
  cfg.trials = 10;
  cfg.seed = seed;
  cfg.tuned_values = true;
  return cfg;
}

struct ResultRow {
  std::string method;
  double rho;
  double delta;
  std::uint64_t budget;
  int trial;
  std::uint64_t seed;
  double estimate;
  std::uint64_t flips_used;
  bool empty = false;
};

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline int experiment_threads() {
  if (const char* env = std::getenv("COINPOP_THREADS")) {
    int t = std::atoi(env);
    if (t >= 1) return t;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// One budgeted run: walks under the flip budget for "twalk" (incomplete walk
// discarded), fixed-shape majority voting for "vote".
inline ResultRow run_cell(const ExperimentConfig& cfg, const std::string& method,
                          const ExperimentPoint& pt, std::uint64_t budget,
                          int trial, std::uint64_t stream_id) {
  CoinPopulation pop = two_point_population(pt.rho, pt.delta);
  RngStream rng(cfg.seed, stream_id);
  ResultRow row{method, pt.rho,    pt.delta, budget,
                trial,  cfg.seed, 0.0,      0,      false};
  if (method == "twalk") {
    RunReport rep = budgeted_twalk(pop, twalk15_spec(cfg.tuned_values),
                                   budget, rng);
    row.estimate = rep.estimate;
    row.flips_used = rep.flips_used;
    row.empty = rep.status == RunStatus::empty;
  } else {
    std::uint64_t coins = budget / std::uint64_t(cfg.vote_flips_per_coin);
    RunReport rep =
        majority_vote_estimate(pop, coins, cfg.vote_flips_per_coin, rng);
    row.estimate = rep.estimate;
    row.flips_used = rep.flips_used;
    row.empty = rep.status == RunStatus::empty;
  }
  if (row.flips_used > budget)
    throw std::logic_error("run_cell: budget exceeded");
  return row;
}

// All cells in deterministic (point, method, budget, trial) order; trials
// run on worker threads but every cell derives its own stream from the
// config seed, so thread count never changes the results.
inline std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  struct Cell {
    std::size_t pi, mi, bi;
    int trial;
    std::uint64_t stream;
  };
  std::vector<Cell> cells;
  std::uint64_t stream = 0;
  for (std::size_t pi = 0; pi < cfg.points.size(); ++pi)
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi)
      for (std::size_t bi = 0; bi < cfg.budgets.size(); ++bi)
        for (int t = 0; t < cfg.trials; ++t)
          cells.push_back({pi, mi, bi, t, stream++});

  std::vector<ResultRow> rows(cells.size());
  int workers = std::min<int>(experiment_threads(),
                              static_cast<int>(cells.size()));
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) break;
      const Cell& c = cells[i];
      rows[i] = run_cell(cfg, cfg.methods[c.mi], cfg.points[c.pi],
                         cfg.budgets[c.bi], c.trial, c.stream);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return rows;
}

inline void write_rows_csv(const std::vector<ResultRow>& rows,
                           std::ostream& out) {
  out << "method,rho,delta,budget,trial,seed,estimate,flips_used\n";
  for (const auto& r : rows)
    out << r.method << ',' << format_double(r.rho) << ','
        << format_double(r.delta) << ',' << r.budget << ',' << r.trial << ','
        << r.seed << ',' << format_double(r.estimate) << ',' << r.flips_used
        << '\n';
}

inline void write_rows_csv(const std::vector<ResultRow>& rows,
                           const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write csv: " + path);
  write_rows_csv(rows, out);
}

struct SummaryRow {
  std::string method;
  double rho;
  double delta;
  std::uint64_t budget;
  int trials;
  double mean;
  double stddev;
  double bias;
};

// Per-(method, point, budget) mean / sample std / mean bias, in first-seen
// row order.
inline std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("summarize: no rows");
  std::vector<SummaryRow> out;
  std::map<std::tuple<std::string, double, double, std::uint64_t>, std::size_t>
      index;
  std::vector<std::vector<double>> samples;
  for (const auto& r : rows) {
    auto key = std::make_tuple(r.method, r.rho, r.delta, r.budget);
    auto it = index.find(key);
    if (it == index.end()) {
      index[key] = out.size();
      out.push_back({r.method, r.rho, r.delta, r.budget, 0, 0.0, 0.0, 0.0});
      samples.push_back({});
      it = index.find(key);
    }
    samples[it->second].push_back(r.estimate);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& xs = samples[i];
    double n = double(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var = xs.size() > 1 ? var / (n - 1.0) : 0.0;
    out[i].trials = static_cast<int>(xs.size());
    out[i].mean = mean;
    out[i].stddev = std::sqrt(var);
    out[i].bias = mean - out[i].rho;
  }
  return out;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  for (const auto& p : j.at("points"))
    cfg.points.push_back({p.at("rho").get<double>(),
                          p.at("delta").get<double>()});
  cfg.methods = j.at("methods").get<std::vector<std::string>>();
  cfg.budgets = j.at("budgets").get<std::vector<std::uint64_t>>();
  cfg.trials = j.value("trials", 10);
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.tuned_values = j.value("tuned_values", true);
  cfg.vote_flips_per_coin = j.value("vote_flips_per_coin", kTwalkDepth);
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  nlohmann::json j;
  in >> j;
  return config_from_json(j);
}

}  // namespace coinpop

// Command-line front end: estimate rho from a population file, run the
// budgeted optimal estimator, design an estimator for known conditional
// distributions, run the verification suites, or drive the convergence
// experiments.
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coinpop/analysis.hpp"
#include "coinpop/budget.hpp"
#include "coinpop/coin_model.hpp"
#include "coinpop/design.hpp"
#include "coinpop/estimators.hpp"
#include "coinpop/harness.hpp"
#include "coinpop/refined.hpp"

namespace cp = coinpop;

namespace {

std::ostream& open_or_stdout(std::ofstream& file, const std::string& path) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write: " + path);
  return file;
}

int cmd_estimate(const std::string& pop_path, const std::string& method,
                 double eps, double delta_fail, std::uint64_t budget,
                 std::uint64_t seed, int trials, const std::string& out_path) {
  cp::CoinPopulation pop = cp::load_population(pop_path);
  std::ofstream file;
  std::ostream& out = open_or_stdout(file, out_path);
  out << "method,trial,seed,estimate,flips_used,coins_used\n";
  for (int t = 0; t < trials; ++t) {
    cp::RngStream rng(seed, static_cast<std::uint64_t>(t));
    cp::RunReport rep;
    if (method == "twalk") {
      if (budget > 0) {
        // budget given: run walks under it and discard the unfinished one
        auto spec = cp::SingleCoinEstimatorSpec::for_epsilon(eps);
        rep = cp::budgeted_twalk(pop, spec, budget, rng);
      } else {
        auto cfg = cp::MedianOfMeansConfig::from(delta_fail, eps);
        rep = cp::triangular_walk_estimate(pop, cfg.total_coins(), eps,
                                           delta_fail, rng);
      }
    } else if (method == "vote") {
      // enough flips per coin to classify with error ~eps; odd depth
      int depth = static_cast<int>(
          std::ceil(std::log(1.0 / eps) / (2.0 * pop.delta * pop.delta)));
      if (depth % 2 == 0) ++depth;
      if (depth < 1) depth = 1;
      std::uint64_t coins = budget > 0 ? budget / std::uint64_t(depth) : 0;
      rep = cp::majority_vote_estimate(pop, coins, depth, rng);
    } else if (method == "anytime") {
      rep = cp::anytime_estimate(pop, eps, budget, rng);
    } else {
      std::cerr << "unknown method: " << method << "\n";
      return 2;
    }
    out << method << ',' << t << ',' << seed << ','
        << cp::format_double(rep.estimate) << ',' << rep.flips_used << ','
        << rep.coins_used << '\n';
  }
  return 0;
}

int cmd_optimal(const std::string& pop_path, std::uint64_t budget,
                double delta_fail, std::uint64_t seed, int trials,
                const std::string& out_path) {
  cp::CoinPopulation pop = cp::load_population(pop_path);
  std::ofstream file;
  std::ostream& out = open_or_stdout(file, out_path);
  out << "trial,seed,status,estimate,flips_used,stage_reached,rho_hat,"
         "stage1_flips,stage2_flips,stage3_flips\n";
  for (int t = 0; t < trials; ++t) {
    cp::RngStream rng(seed, static_cast<std::uint64_t>(t));
    cp::RunReport rep =
        delta_fail > 0.0
            ? cp::optimal_estimate_boosted(pop, budget, delta_fail, rng)
            : cp::optimal_estimate(pop, budget, rng);
    out << t << ',' << seed << ',' << cp::to_string(rep.status) << ','
        << cp::format_double(rep.estimate) << ',' << rep.flips_used << ','
        << rep.stages.stage_reached << ','
        << cp::format_double(rep.stages.rho_hat) << ','
        << rep.stages.stage_flips[0] << ',' << rep.stages.stage_flips[1] << ','
        << rep.stages.stage_flips[2] << '\n';
  }
  return 0;
}

int cmd_design(const std::string& pop_path, int nmax,
               const std::string& out_path) {
  cp::CoinPopulation pop = cp::load_population(pop_path);
  cp::MomentTable hp = cp::moment_table(pop.positive, nmax);
  cp::MomentTable hm = cp::moment_table(pop.negative, nmax);
  cp::LinearEstimator est = cp::design_estimator(hp, hm, pop.rho, nmax);
  cp::save_rule(est.rule, out_path, &est.values);
  double per_flip = est.functional / est.expected_flips;
  std::cout << "objective U = " << cp::format_double(est.functional)
            << ", variance = " << cp::format_double(est.variance)
            << ", expected flips/run = "
            << cp::format_double(est.expected_flips) << "\n"
            << "total cost to additive error eps: ~ "
            << cp::format_double(1.0 / per_flip)
            << " / eps^2 flips per median-of-means group (x log(1/delta) "
               "groups)\n"
            << "rule written to " << out_path << "\n";
  return 0;
}

cp::DecisionTree random_tree(cp::RngStream& rng, int num_coins, int max_depth) {
  cp::DecisionTree tree;
  tree.num_coins = num_coins;
  // Grow recursively; interior probability shrinks with depth.
  std::vector<cp::DecisionTree::Node> nodes;
  auto grow = [&](auto&& self, int depth) -> int {
    if (depth >= max_depth || rng.next_double() < 0.3) return -1;
    int idx = static_cast<int>(nodes.size());
    nodes.push_back({static_cast<int>(rng.below(num_coins)), -1, -1});
    int h = self(self, depth + 1);
    int t = self(self, depth + 1);
    nodes[idx].heads = h;
    nodes[idx].tails = t;
    return idx;
  };
  int root = grow(grow, 0);
  if (root == -1) {
    nodes.push_back({0, -1, -1});
  }
  tree.nodes = nodes;
  return tree;
}

cp::BiasDistribution random_dist(cp::RngStream& rng) {
  int atoms = 1 + static_cast<int>(rng.below(3));
  cp::BiasDistribution d;
  double total = 0.0;
  std::vector<double> w(atoms);
  for (int i = 0; i < atoms; ++i) {
    w[i] = rng.next_double() + 0.05;
    total += w[i];
  }
  for (int i = 0; i < atoms; ++i) {
    double bias = 0.1 * double(1 + rng.below(9));
    d.support.push_back({bias, w[i] / total});
  }
  return d;
}

cp::StoppingRule random_rule(cp::RngStream& rng, int n_max) {
  cp::StoppingRule rule;
  rule.n_max = n_max;
  rule.gamma = cp::TriArray<double>(n_max, 0.0);
  for (int n = 1; n < n_max; ++n)
    for (int k = 0; k <= n; ++k) rule.gamma.at(n, k) = 0.5 * rng.next_double();
  for (int k = 0; k <= n_max; ++k) rule.gamma.at(n_max, k) = 1.0;
  return rule;
}

int cmd_verify(const std::string& suite, int instances, std::uint64_t seed,
               const std::string& out_path) {
  std::ofstream file;
  std::ostream& out = open_or_stdout(file, out_path);
  cp::RngStream rng(seed, 0);
  if (suite == "reduction") {
    out << "instance,coins,leaves,h_full_sq,per_coin_sum,ok\n";
    int violations = 0;
    for (int i = 0; i < instances; ++i) {
      cp::RngStream r = rng.derive(i);
      auto tree = random_tree(r, 1 + static_cast<int>(r.below(3)), 5);
      auto A = random_dist(r), B = random_dist(r);
      auto chk = cp::verify_reduction(tree, A, B);
      bool ok = chk.full_sq <= chk.per_coin_total() + 1e-12;
      if (!ok) ++violations;
      out << i << ',' << tree.num_coins << ','
          << tree.leaf_profiles().size() << ','
          << cp::format_double(chk.full_sq) << ','
          << cp::format_double(chk.per_coin_total()) << ',' << ok << '\n';
    }
    std::cerr << "violations: " << violations << "/" << instances << "\n";
    return violations == 0 ? 0 : 1;
  }
  if (suite == "reduction-kl") {
    out << "instance,eps_over_rho,kl_full,per_coin_sum,ratio\n";
    for (int i = 0; i < instances; ++i) {
      cp::RngStream r = rng.derive(i);
      auto tree = random_tree(r, 1 + static_cast<int>(r.below(3)), 5);
      auto A = random_dist(r), B = random_dist(r);
      double rho = 0.15 + 0.3 * r.next_double();
      double ratio_er = i % 2 == 0 ? 0.1 : 1e-3;
      auto chk = cp::verify_reduction_kl(tree, A, B, rho, rho * ratio_er);
      out << i << ',' << cp::format_double(ratio_er) << ','
          << cp::format_double(chk.kl_full) << ','
          << cp::format_double(chk.per_coin_total()) << ','
          << cp::format_double(chk.ratio) << '\n';
    }
    return 0;
  }
  if (suite == "hellinger-functional") {
    out << "instance,rho,eps,exact,functional_eps2,ratio\n";
    for (int i = 0; i < instances; ++i) {
      cp::RngStream r = rng.derive(i);
      auto rule = random_rule(r, 3 + static_cast<int>(r.below(8)));
      double rho = i % 2 == 0 ? 0.05 : 0.2;
      double eps = 0.1 * rho;
      double delta = 0.25;
      cp::MomentTable hp =
          cp::moment_table(cp::point_mass(0.5 + delta), rule.n_max);
      cp::MomentTable hm =
          cp::moment_table(cp::point_mass(0.5 - delta), rule.n_max);
      double exact = cp::rule_hellinger_exact(rule, rho, eps, delta);
      double lin = eps * eps *
                   cp::rule_hellinger_linear_functional(rule, hp, hm, rho);
      out << i << ',' << rho << ',' << eps << ',' << cp::format_double(exact)
          << ',' << cp::format_double(lin) << ','
          << cp::format_double(exact / lin) << '\n';
    }
    return 0;
  }
  if (suite == "pinsker") {
    out << "instance,lhs,rhs,ok\n";
    int bad = 0;
    for (int i = 0; i < instances; ++i) {
      cp::RngStream r = rng.derive(i);
      int n = 2 + static_cast<int>(r.below(5));
      cp::FiniteDistribution P, Q;
      double sp = 0.0, sq = 0.0;
      for (int j = 0; j < n; ++j) {
        P.probs.push_back(r.next_double() + 1e-3);
        Q.probs.push_back(r.next_double() + 1e-3);
        sp += P.probs.back();
        sq += Q.probs.back();
      }
      for (int j = 0; j < n; ++j) {
        P.probs[j] /= sp;
        Q.probs[j] /= sq;
      }
      // random event E
      double pe = 0.0, qe = 0.0;
      for (int j = 0; j < n; ++j)
        if (r.next_double() < 0.5) {
          pe += P.probs[j];
          qe += Q.probs[j];
        }
      double lhs = pe + (1.0 - qe);
      double rhs = 0.5 * std::exp(-cp::kl_div(P, Q));
      bool ok = lhs >= rhs - 1e-12;
      if (!ok) ++bad;
      out << i << ',' << cp::format_double(lhs) << ','
          << cp::format_double(rhs) << ',' << ok << '\n';
    }
    std::cerr << "violations: " << bad << "/" << instances << "\n";
    return bad == 0 ? 0 : 1;
  }
  if (suite == "mi") {
    out << "n,rho,eps,delta,mi_per_sample,upper_bound\n";
    double delta = 0.3;
    for (double rho : {0.1, 0.01}) {
      double eps = rho / 2;
      for (int n = 1; n <= instances; ++n)
        out << n << ',' << rho << ',' << eps << ',' << delta << ','
            << cp::format_double(cp::mutual_info_per_sample(n, rho, eps, delta))
            << ','
            << cp::format_double(cp::mutual_info_upper_bound(n, rho, eps, delta))
            << '\n';
    }
    return 0;
  }
  std::cerr << "unknown suite: " << suite << "\n";
  return 2;
}

int cmd_experiment(const std::string& preset, const std::string& config_path,
                   std::uint64_t seed, const std::string& out_path) {
  cp::ExperimentConfig cfg;
  if (!config_path.empty()) {
    cfg = cp::load_experiment_config(config_path);
  } else if (preset == "soda") {
    cfg = cp::preset_soda(seed);
  } else {
    std::cerr << "unknown preset: " << preset << "\n";
    return 2;
  }
  auto rows = cp::run_experiment(cfg);
  if (out_path.empty() || out_path == "-") {
    cp::write_rows_csv(rows, std::cout);
  } else {
    cp::write_rows_csv(rows, out_path);
  }
  auto summary = cp::summarize(rows);
  std::cerr << "method,rho,delta,budget,mean,std,bias\n";
  for (const auto& s : summary)
    std::cerr << s.method << ',' << s.rho << ',' << s.delta << ',' << s.budget
              << ',' << cp::format_double(s.mean) << ','
              << cp::format_double(s.stddev) << ','
              << cp::format_double(s.bias) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive estimation of the positive-coin fraction"};
  app.require_subcommand(1);

  std::string pop_path, out_path, method = "twalk";
  double eps = 0.05, delta_fail = 0.1;
  std::uint64_t budget = 0, seed = 0;
  int trials = 1;

  auto* est = app.add_subcommand("estimate", "run a rho estimator");
  est->add_option("--population", pop_path, "population JSON file")
      ->required();
  est->add_option("--method", method, "twalk|vote|anytime");
  est->add_option("--eps", eps, "target additive error");
  est->add_option("--delta", delta_fail, "failure probability");
  est->add_option("--budget", budget, "flip budget (vote/anytime)");
  est->add_option("--seed", seed, "rng seed");
  est->add_option("--trials", trials, "independent trials");
  est->add_option("--out", out_path, "output CSV ('-' for stdout)");

  std::string opt_pop, opt_out;
  std::uint64_t opt_budget = 100000, opt_seed = 0;
  double opt_delta_fail = 0.0;
  int opt_trials = 1;
  auto* opt = app.add_subcommand("optimal", "budgeted estimator");
  opt->add_option("--population", opt_pop, "population JSON file")->required();
  opt->add_option("--budget", opt_budget, "total flip budget")->required();
  opt->add_option("--delta-fail", opt_delta_fail,
                  "boost repetitions for this failure probability (0: single "
                  "run)");
  opt->add_option("--seed", opt_seed, "rng seed");
  opt->add_option("--trials", opt_trials, "independent trials");
  opt->add_option("--out", opt_out, "output CSV ('-' for stdout)");

  std::string des_pop, des_out = "rule.json";
  int des_nmax = 8;
  auto* des = app.add_subcommand("design", "LP-designed estimator");
  des->add_option("--population", des_pop, "population JSON file")->required();
  des->add_option("--nmax", des_nmax, "maximum walk depth");
  des->add_option("--out", des_out, "rule JSON output path");

  std::string ver_suite = "reduction", ver_out;
  int ver_instances = 1000;
  std::uint64_t ver_seed = 0;
  auto* ver = app.add_subcommand("verify", "numerical verification suites");
  ver->add_option("--suite", ver_suite,
                  "reduction|reduction-kl|hellinger-functional|pinsker|mi");
  ver->add_option("--instances", ver_instances, "instance count");
  ver->add_option("--seed", ver_seed, "rng seed");
  ver->add_option("--out", ver_out, "per-instance CSV ('-' for stdout)");

  std::string exp_preset = "soda", exp_config, exp_out;
  std::uint64_t exp_seed = 20240601;
  auto* exp = app.add_subcommand("experiment", "convergence experiments");
  exp->add_option("--preset", exp_preset, "preset name (soda)");
  exp->add_option("--config", exp_config, "config JSON path");
  exp->add_option("--seed", exp_seed, "rng seed");
  exp->add_option("--out", exp_out, "results CSV ('-' for stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (est->parsed())
      return cmd_estimate(pop_path, method, eps, delta_fail, budget, seed,
                          trials, out_path);
    if (opt->parsed())
      return cmd_optimal(opt_pop, opt_budget, opt_delta_fail, opt_seed,
                         opt_trials, opt_out);
    if (des->parsed()) return cmd_design(des_pop, des_nmax, des_out);
    if (ver->parsed())
      return cmd_verify(ver_suite, ver_instances, ver_seed, ver_out);
    if (exp->parsed())
      return cmd_experiment(exp_preset, exp_config, exp_seed, exp_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

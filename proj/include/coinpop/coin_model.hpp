#pragma once
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "coinpop/rng.hpp"

namespace coinpop {

struct BiasAtom {
  double bias;
  double weight;
};

// Discrete distribution over coin biases (point masses only).
struct BiasDistribution {
  std::vector<BiasAtom> support;

  void validate() const {
    if (support.empty())
      throw std::invalid_argument("BiasDistribution: empty support");
    double total = 0.0;
    for (const auto& a : support) {
      if (a.bias < 0.0 || a.bias > 1.0)
        throw std::invalid_argument("BiasDistribution: bias outside [0,1]");
      if (a.weight < 0.0)
        throw std::invalid_argument("BiasDistribution: negative weight");
      total += a.weight;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw std::invalid_argument("BiasDistribution: weights must sum to 1");
  }

  double sample(RngStream& rng) const {
    double u = rng.next_double();
    double acc = 0.0;
    for (const auto& a : support) {
      acc += a.weight;
      if (u < acc) return a.bias;
    }
    return support.back().bias;
  }

  // E[p^h (1-p)^t] under this distribution.
  double moment(int h, int t) const {
    double s = 0.0;
    for (const auto& a : support)
      s += a.weight * std::pow(a.bias, h) * std::pow(1.0 - a.bias, t);
    return s;
  }
};

inline BiasDistribution point_mass(double bias) {
  return BiasDistribution{{{bias, 1.0}}};
}

// Mixture of two bias populations separated by a gap of 2*delta around 1/2.
struct CoinPopulation {
  double rho;
  double delta;
  BiasDistribution positive;
  BiasDistribution negative;

  void validate() const {
    if (!(rho >= 0.0 && rho <= 1.0))
      throw std::invalid_argument("CoinPopulation: rho outside [0,1]");
    if (!(delta > 0.0 && delta <= 0.5))
      throw std::invalid_argument("CoinPopulation: delta outside (0,1/2]");
    positive.validate();
    negative.validate();
    for (const auto& a : positive.support)
      if (a.bias < 0.5 + delta - 1e-12)
        throw std::invalid_argument("CoinPopulation: positive bias below gap");
    for (const auto& a : negative.support)
      if (a.bias > 0.5 - delta + 1e-12)
        throw std::invalid_argument("CoinPopulation: negative bias above gap");
  }
};

// Convenience two-point world at biases 1/2 +- delta.
inline CoinPopulation two_point_population(double rho, double delta) {
  return CoinPopulation{rho, delta, point_mass(0.5 + delta),
                        point_mass(0.5 - delta)};
}

enum class CoinLabel { positive, negative };

struct CoinSpec {
  double bias;
  CoinLabel label;
};

inline CoinSpec draw_coin(const CoinPopulation& pop, RngStream& rng) {
  if (rng.bernoulli(pop.rho))
    return CoinSpec{pop.positive.sample(rng), CoinLabel::positive};
  return CoinSpec{pop.negative.sample(rng), CoinLabel::negative};
}

inline int flip(const CoinSpec& coin, RngStream& rng) {
  return rng.bernoulli(coin.bias) ? 1 : 0;
}

// Smallest odd block size m with exp(-2 m delta^2) <= 1/4, so a majority vote
// of m flips moves a bias below 1/2-delta to at most 1/4 (and symmetrically
// above 3/4). Odd so the vote has no ties. Gaps above 1/4 need no blocking.
inline int majority_block_size(double delta) {
  if (!(delta > 0.0 && delta <= 0.5))
    throw std::invalid_argument("majority_block_size: delta outside (0,1/2]");
  if (delta > 0.25) return 1;
  int m = static_cast<int>(std::ceil(std::log(4.0) / (2.0 * delta * delta)));
  if (m % 2 == 0) ++m;
  return m;
}

inline int virtual_flip(const CoinSpec& coin, double delta, RngStream& rng) {
  int m = majority_block_size(delta);
  if (m == 1) return flip(coin, rng);
  int heads = 0;
  for (int i = 0; i < m; ++i) heads += flip(coin, rng);
  return 2 * heads > m ? 1 : 0;
}

// Flip source for one coin that hides the majority-vote blocking and keeps
// count of the real flips spent. `delta` decides the block size once.
class CoinView {
 public:
  CoinView(CoinSpec coin, double delta, RngStream rng)
      : coin_(coin), block_(majority_block_size(delta)), rng_(rng) {}

  // Raw coin, no blocking.
  CoinView(CoinSpec coin, RngStream rng)
      : coin_(coin), block_(1), rng_(rng) {}

  int flip() {
    real_flips_ += static_cast<std::uint64_t>(block_);
    if (block_ == 1) return coinpop::flip(coin_, rng_);
    int heads = 0;
    for (int i = 0; i < block_; ++i) heads += coinpop::flip(coin_, rng_);
    return 2 * heads > block_ ? 1 : 0;
  }

  std::uint64_t real_flips() const { return real_flips_; }
  int block_size() const { return block_; }
  const CoinSpec& coin() const { return coin_; }
  RngStream& rng() { return rng_; }

 private:
  CoinSpec coin_;
  int block_;
  RngStream rng_;
  std::uint64_t real_flips_ = 0;
};

// --- population file format ---------------------------------------------
// {"rho":r, "delta":d, "positive":[{"bias":b,"weight":w},...],
//  "negative":[{"bias":b,"weight":w},...]}

inline nlohmann::json to_json(const BiasDistribution& d) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& a : d.support)
    arr.push_back({{"bias", a.bias}, {"weight", a.weight}});
  return arr;
}

inline nlohmann::json to_json(const CoinPopulation& pop) {
  return nlohmann::json{{"rho", pop.rho},
                        {"delta", pop.delta},
                        {"positive", to_json(pop.positive)},
                        {"negative", to_json(pop.negative)}};
}

inline BiasDistribution bias_distribution_from_json(const nlohmann::json& j) {
  BiasDistribution d;
  for (const auto& a : j)
    d.support.push_back({a.at("bias").get<double>(),
                         a.at("weight").get<double>()});
  d.validate();
  return d;
}

inline CoinPopulation population_from_json(const nlohmann::json& j) {
  CoinPopulation pop;
  pop.rho = j.at("rho").get<double>();
  pop.delta = j.at("delta").get<double>();
  pop.positive = bias_distribution_from_json(j.at("positive"));
  pop.negative = bias_distribution_from_json(j.at("negative"));
  pop.validate();
  return pop;
}

inline CoinPopulation load_population(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open population file: " + path);
  nlohmann::json j;
  in >> j;
  return population_from_json(j);
}

inline void save_population(const CoinPopulation& pop,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write population file: " + path);
  out << to_json(pop).dump(2) << "\n";
}

}  // namespace coinpop

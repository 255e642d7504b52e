#pragma once
#include <cstdint>

namespace coinpop {

// Counter-based generator built on the splitmix64 finalizer. Every output is
// a pure function of (seed, stream_id, counter), so a stream can be replayed
// from its identifiers alone and derived streams never share state with their
// parent. Recorded in run reports so results stay attributable.
inline constexpr const char* kRngName = "splitmix64ctr-v1";

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

inline constexpr std::uint64_t splitmix_fin(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id) {
    key_ = splitmix_fin(splitmix_fin(seed + kGolden) ^
                        (stream_id * 0xd1b54a32d192ed03ull + 1));
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Independent child stream; deterministic in (seed, stream_id, child).
  RngStream derive(std::uint64_t child) const {
    return RngStream(seed_, splitmix_fin(stream_id_ + kGolden * (child + 1)));
  }

  std::uint64_t next_u64() {
    counter_ += kGolden;
    return splitmix_fin(key_ + counter_);
  }

  // Uniform in [0, 1), 53 random bits.
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return next_double() < p; }

  // Uniform integer in [0, bound); bound > 0. Rejection-free modulo is fine
  // at these scales, bias < 2^-53 with the double path.
  std::uint64_t below(std::uint64_t bound) {
    return std::uint64_t(next_double() * double(bound)) % bound;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace coinpop

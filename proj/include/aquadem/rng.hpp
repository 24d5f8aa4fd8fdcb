#pragma once

#include <cstdint>
#include <random>

namespace aquadem {

// Deterministic RNG with explicitly implemented distributions. The standard
// <random> distributions are implementation-defined, which would break the
// byte-identical-rerun guarantees across toolchains; everything here is pinned
// to mersenne twister output words.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n) {
    // Rejection sampling keeps the draw unbiased for any n.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Independent child stream; a pure function of (seed, stream_id), not of
  // how many draws happened on the parent. splitmix64 scrambles the pair so
  // nearby ids do not correlate.
  Rng derive(std::uint64_t stream_id) const {
    std::uint64_t x = seed_ + 0x9E3779B97F4A7C15ull * (stream_id + 1);
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return Rng(x);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace aquadem

#pragma once

#include <cstdint>
#include <cstddef>
#include <functional>
#include <vector>

namespace peerchurn {

// Counter-based keyed RNG. A stream is derived purely from (seed, key parts),
// so work split across threads by entity (subscriber, month, replicate, ...)
// produces identical draws regardless of scheduling. Within a stream the
// generator behaves like an ordinary sequential PRNG (splitmix64 walk from a
// mixed starting state).
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(mix(seed ^ GOLDEN)) {}
  Rng(uint64_t seed, uint64_t k1) : Rng(seed) { absorb(k1); }
  Rng(uint64_t seed, uint64_t k1, uint64_t k2) : Rng(seed, k1) { absorb(k2); }
  Rng(uint64_t seed, uint64_t k1, uint64_t k2, uint64_t k3) : Rng(seed, k1, k2) { absorb(k3); }
  Rng(uint64_t seed, uint64_t k1, uint64_t k2, uint64_t k3, uint64_t k4)
      : Rng(seed, k1, k2, k3) {
    absorb(k4);
  }

  // Stream labels keep independent uses of one seed from colliding.
  Rng(uint64_t seed, const char* tag) : Rng(seed) { absorb(tag_hash(tag)); }
  Rng(uint64_t seed, const char* tag, uint64_t k1) : Rng(seed, tag) { absorb(k1); }
  Rng(uint64_t seed, const char* tag, uint64_t k1, uint64_t k2) : Rng(seed, tag, k1) {
    absorb(k2);
  }
  Rng(uint64_t seed, const char* tag, uint64_t k1, uint64_t k2, uint64_t k3)
      : Rng(seed, tag, k1, k2) {
    absorb(k3);
  }

  static uint64_t tag_hash(const char* s);

  void absorb(uint64_t k) { state_ = mix(state_ ^ mix(k + GOLDEN)); }

  uint64_t next_u64() {
    state_ += GOLDEN;
    return mix(state_);
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased integer in [0, n) via 128-bit multiply-shift with rejection.
  uint64_t below(uint64_t n);

  double normal();                 // standard normal (Box-Muller, 2 uniforms per draw)
  double exponential(double mean); // mean > 0
  int poisson(double lambda);      // Knuth product method; normal approx for large lambda
  int binomial(int n, double p);

 private:
  static constexpr uint64_t GOLDEN = 0x9e3779b97f4a7c15ULL;
  static uint64_t mix(uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }
  uint64_t state_;
};

// Percentile with linear interpolation between order statistics
// (R type-7 / NumPy default). `sorted` must be ascending and non-empty.
double quantile_sorted(const std::vector<double>& sorted, double p);

// Run fn(i) for i in [0, n) on `threads` threads (0 = hardware concurrency).
// Work is split in contiguous blocks; fn must only write state owned by i.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace peerchurn

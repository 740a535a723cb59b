#pragma once

#include <cmath>
#include <cstdint>

namespace voxsl {

// Deterministic, platform-independent random primitives. Everything that
// needs randomness (pattern cells, batch shuffles, sample jitter, noise)
// derives from these so that runs regenerate bit-identically on any host.

// SplitMix64 finalizer. Constants from Steele, Lea & Flood's SplitMix64.
inline uint64_t mix64(uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Counter-based draw: hash of (seed, counter). Stateless, splittable.
inline uint64_t hash_draw(uint64_t seed, uint64_t counter) {
  return mix64(seed ^ mix64(counter + 0x632BE59BD9B4E019ull));
}

// Map 64 random bits to a double in [0, 1).
inline double unit_double(uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Sequential SplitMix64 stream for code that wants a stateful generator.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() { return mix64(state_++); }
  double next_unit() { return unit_double(next()); }

  // Unbiased integer in [0, n) by rejection.
  uint64_t next_below(uint64_t n) {
    const uint64_t limit = ~uint64_t{0} - (~uint64_t{0} % n);
    uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller.
  double next_gaussian() {
    double u1 = next_unit();
    double u2 = next_unit();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  uint64_t state_;
};

}  // namespace voxsl

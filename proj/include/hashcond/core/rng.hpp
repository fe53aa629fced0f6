#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "hashcond/core/errors.hpp"

namespace hashcond {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and up to three keys.
// Used to give every (purpose, repeat, iteration, class) combination its own
// generator so evaluation order never changes the sampled values.
inline uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
  uint64_t h = splitmix64(base ^ 0x5851F42D4C957F2Dull);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  return h;
}

// Deterministic generator with distributions implemented in-library.
// mt19937_64 output is fixed by the standard and the distribution code below
// avoids std::*_distribution, so sequences are identical across platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [lo, hi] via rejection sampling.
  int uniform_int(int lo, int hi) {
    if (hi < lo) throw ValidationError("uniform_int: empty range");
    uint64_t range = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
    uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return lo + static_cast<int>(x % range);
  }

  bool coin() { return (eng_() >> 63) != 0; }

  // Standard normal via Box-Muller; second value cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    double u2 = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    double r = std::sqrt(-2.0 * std::log(u1));
    double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  // Fisher-Yates permutation of 0..n-1.
  std::vector<int> permutation(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    for (int i = n - 1; i > 0; --i) {
      int j = uniform_int(0, i);
      std::swap(p[i], p[j]);
    }
    return p;
  }

  // k distinct values from `pool`, sampled without replacement.
  std::vector<int> sample_without_replacement(const std::vector<int>& pool, int k) {
    if (k > static_cast<int>(pool.size()))
      throw ValidationError("sample_without_replacement: k exceeds population");
    std::vector<int> copy = pool;
    std::vector<int> out(k);
    int n = static_cast<int>(copy.size());
    for (int i = 0; i < k; ++i) {
      int j = uniform_int(i, n - 1);
      std::swap(copy[i], copy[j]);
      out[i] = copy[i];
    }
    return out;
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace hashcond

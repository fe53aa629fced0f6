#pragma once

#include <string>

#include "hashcond/core/errors.hpp"
#include "hashcond/core/rng.hpp"
#include "hashcond/core/tensor.hpp"

namespace hashcond {

inline int hamming_between(const float* a, const float* b, int k) {
  int d = 0;
  for (int j = 0; j < k; ++j) d += a[j] != b[j];
  return d;
}

// Class target rows: +-1 codes with pairwise Hamming distance >= K/4. Powers
// of two up to K classes get mutually orthogonal Sylvester rows (distance
// exactly K/2); anything else falls back to rejection-sampled random rows.
inline Tensor<float> build_codebook(int c, int K, uint64_t seed) {
  if (c < 1) throw ValidationError("codebook needs at least one class");
  if (K < 1) throw ValidationError("code_bits must be >= 1");
  if (K < 63 && (uint64_t)c > (uint64_t(1) << K))
    throw InfeasibleError("cannot place " + std::to_string(c) + " distinct codes in " +
                          std::to_string(K) + " bits");
  Tensor<float> cb(Shape::of(c, K));
  const bool pow2 = (K & (K - 1)) == 0;
  if (pow2 && c <= K) {
    // Sylvester recursion, expressed pointwise: H[i][j] = parity of popcount
    // of (i AND j).
    for (int i = 0; i < c; ++i)
      for (int j = 0; j < K; ++j)
        cb.at(i, j) = (__builtin_popcount((unsigned)(i & j)) & 1) ? -1.0f : 1.0f;
  } else {
    Rng rng(derive_seed(seed, 0xC0DE));
    const int min_d = K / 4;
    for (int i = 0; i < c; ++i) {
      for (int attempt = 0;; ++attempt) {
        if (attempt > 200000)
          throw InfeasibleError("codebook rejection sampling stalled at row " +
                                std::to_string(i));
        for (int j = 0; j < K; ++j) cb.at(i, j) = rng.coin() ? 1.0f : -1.0f;
        bool ok = true;
        for (int p = 0; p < i && ok; ++p)
          ok = hamming_between(&cb.at(p, 0), &cb.at(i, 0), K) >= std::max(1, min_d);
        if (ok) break;
      }
    }
  }
  // The invariant is asserted regardless of which branch built the rows.
  for (int i = 0; i < c; ++i)
    for (int p = 0; p < i; ++p)
      if (hamming_between(&cb.at(p, 0), &cb.at(i, 0), K) < std::max(1, K / 4))
        throw InfeasibleError("codebook rows too close: " + std::to_string(p) + "," +
                              std::to_string(i));
  return cb;
}

}  // namespace hashcond

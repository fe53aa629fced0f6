#pragma once

#include <cstdint>
#include <vector>

#include "hashcond/core/errors.hpp"
#include "hashcond/core/tensor.hpp"

namespace hashcond {

// Sign-thresholded codes packed into 64-bit words, LSB-first within a word.
// The tie at exactly zero maps to bit 1.
struct BinaryCodes {
  int code_bits = 0;
  std::vector<uint64_t> bits;  // count * words_per_code() words
  std::vector<int> labels;

  int count() const { return (int)labels.size(); }
  int words_per_code() const { return (code_bits + 63) / 64; }
  const uint64_t* row(int i) const { return bits.data() + (size_t)i * words_per_code(); }
};

template <typename S>
BinaryCodes binarize(const Tensor<S>& v, const std::vector<int>& labels) {
  if (v.shape.rank != 2) throw ValidationError("binarize: codes must be [N, K]");
  if ((int)labels.size() != v.shape.d[0])
    throw ValidationError("binarize: one label per row required");
  BinaryCodes out;
  out.code_bits = v.shape.d[1];
  out.labels = labels;
  const int words = out.words_per_code();
  out.bits.assign((size_t)v.shape.d[0] * words, 0);
  for (int i = 0; i < v.shape.d[0]; ++i)
    for (int j = 0; j < out.code_bits; ++j)
      if (v.at(i, j) >= 0)
        out.bits[(size_t)i * words + (size_t)j / 64] |= uint64_t(1) << (j % 64);
  return out;
}

inline int hamming_distance(const BinaryCodes& a, int i, const BinaryCodes& b, int j) {
  int d = 0;
  for (int w = 0; w < a.words_per_code(); ++w)
    d += __builtin_popcountll(a.row(i)[w] ^ b.row(j)[w]);
  return d;
}

}  // namespace hashcond

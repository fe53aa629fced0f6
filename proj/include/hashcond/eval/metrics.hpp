#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "hashcond/core/serialize.hpp"
#include "hashcond/eval/codes.hpp"

namespace hashcond {

struct EvalReport {
  double map_value = 0;
  std::vector<double> precision_at_k;  // precision at the recorded depths
  std::vector<int> precision_depths;
  int code_bits = 0;
  int query_count = 0;
  int database_count = 0;
  std::string method;

  json to_json() const {
    return json{{"map", map_value},
                {"precision_at_k", precision_at_k},
                {"precision_depths", precision_depths},
                {"code_bits", code_bits},
                {"query_count", query_count},
                {"database_count", database_count},
                {"method", method}};
  }
};

// Ascending Hamming distance, ties by ascending database index. Stable sort
// over the index sequence gives exactly that.
inline std::vector<int> hamming_rank(const BinaryCodes& queries, int q,
                                     const BinaryCodes& db) {
  if (queries.code_bits != db.code_bits)
    throw ValidationError("hamming_rank: code widths differ");
  std::vector<int> dist((size_t)db.count());
  for (int i = 0; i < db.count(); ++i) dist[(size_t)i] = hamming_distance(queries, q, db, i);
  std::vector<int> order((size_t)db.count());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return dist[(size_t)a] < dist[(size_t)b]; });
  return order;
}

// AP truncated at depth: the mean, over relevant hits visible within the
// depth, of (hits so far / rank). No visible hits -> AP 0.
inline double average_precision(const std::vector<char>& relevant, int depth) {
  int hits = 0;
  double ap = 0;
  const int lim = std::min<int>(depth, (int)relevant.size());
  for (int r = 0; r < lim; ++r)
    if (relevant[(size_t)r]) ap += double(++hits) / (r + 1);
  return hits == 0 ? 0.0 : ap / hits;
}

// top_k <= 0 means full depth.
inline EvalReport mean_average_precision(const BinaryCodes& queries, const BinaryCodes& db,
                                         int top_k = 0,
                                         const std::vector<int>& precision_depths = {}) {
  if (db.count() == 0) throw ValidationError("mean_average_precision: empty database");
  if (queries.code_bits != db.code_bits)
    throw ValidationError("mean_average_precision: code widths differ");
  const int depth = top_k <= 0 ? db.count() : std::min(top_k, db.count());

  EvalReport rep;
  rep.code_bits = db.code_bits;
  rep.query_count = queries.count();
  rep.database_count = db.count();
  rep.precision_depths = precision_depths;
  rep.precision_at_k.assign(precision_depths.size(), 0);

  double ap_sum = 0;
  for (int q = 0; q < queries.count(); ++q) {
    const std::vector<int> order = hamming_rank(queries, q, db);
    std::vector<char> rel(order.size());
    for (size_t r = 0; r < order.size(); ++r)
      rel[r] = db.labels[(size_t)order[r]] == queries.labels[(size_t)q];
    ap_sum += average_precision(rel, depth);
    for (size_t d = 0; d < precision_depths.size(); ++d) {
      const int k = std::min(precision_depths[d], (int)rel.size());
      int hits = 0;
      for (int r = 0; r < k; ++r) hits += rel[(size_t)r];
      rep.precision_at_k[d] += k > 0 ? double(hits) / k : 0.0;
    }
  }
  const int nq = std::max(1, queries.count());
  rep.map_value = ap_sum / nq;
  for (auto& p : rep.precision_at_k) p /= nq;
  return rep;
}

}  // namespace hashcond

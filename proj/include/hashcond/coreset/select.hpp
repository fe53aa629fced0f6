#pragma once

#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hashcond/data/dataset.hpp"
#include "hashcond/data/synthetic.hpp"
#include "hashcond/models/network.hpp"

namespace hashcond {

struct CoresetResult {
  std::map<int, std::vector<int>> selected;  // class -> rows into the train split
  std::string method;
  std::string feature_source;  // arch@seed for herding, empty for random
};

inline void validate_coreset(const CoresetResult& r, const LabeledDataset& ds, int ipc) {
  if ((int)r.selected.size() != ds.num_classes)
    throw ValidationError("coreset misses classes");
  for (const auto& [c, rows] : r.selected) {
    if ((int)rows.size() != ipc) throw ValidationError("coreset class size != ipc");
    std::set<int> uniq(rows.begin(), rows.end());
    if ((int)uniq.size() != ipc) throw ValidationError("coreset has duplicate rows");
    for (int row : rows)
      if (row < 0 || row >= ds.count() || ds.labels[(size_t)row] != c)
        throw ValidationError("coreset row outside its class");
  }
}

inline CoresetResult select_random(const LabeledDataset& ds, int ipc, uint64_t seed) {
  CoresetResult out;
  out.method = "random";
  Rng rng(derive_seed(seed, 0xC07E));
  for (int c = 0; c < ds.num_classes; ++c)
    out.selected[c] = sample_class_rows(ds, c, ipc, rng);
  validate_coreset(out, ds, ipc);
  return out;
}

// Greedy herding on a feature matrix: at each step add the row that brings
// the running mean of selected features closest to the target mean. Ties go
// to the lowest row index.
inline std::vector<int> herd_rows(const std::vector<std::vector<double>>& feats,
                                  const std::vector<int>& rows, int ipc) {
  const size_t d = feats[0].size();
  std::vector<double> target(d, 0);
  for (const auto& f : feats)
    for (size_t j = 0; j < d; ++j) target[j] += f[j] / (double)feats.size();

  std::vector<int> picked;
  std::vector<char> used(rows.size(), 0);
  std::vector<double> sum(d, 0);
  for (int k = 1; k <= ipc; ++k) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < rows.size(); ++i) {
      if (used[i]) continue;
      double dist = 0;
      for (size_t j = 0; j < d; ++j) {
        const double m = (sum[j] + feats[i][j]) / k - target[j];
        dist += m * m;
      }
      // Rows are scanned in ascending index order, so strict < keeps the
      // lowest index on exact ties.
      if (dist < best_d) {
        best_d = dist;
        best = (int)i;
      }
    }
    used[(size_t)best] = 1;
    picked.push_back(rows[(size_t)best]);
    for (size_t j = 0; j < d; ++j) sum[j] += feats[(size_t)best][j];
  }
  return picked;
}

inline CoresetResult select_herding(const LabeledDataset& ds, int ipc,
                                    const HashNetParams& theta, uint64_t seed) {
  CoresetResult out;
  out.method = "herding";
  out.feature_source = theta.arch.id + "@" + std::to_string(seed);
  for (int c = 0; c < ds.num_classes; ++c) {
    const auto& rows = ds.class_index[c];
    if (ipc > (int)rows.size())
      throw ValidationError("herding: ipc exceeds class population");
    Tensor<float> batch = gather_rows(ds.images, rows);
    Tensor<float> f = extract_features(theta, batch);
    std::vector<std::vector<double>> feats(rows.size());
    const int d = f.shape.d[1];
    for (size_t i = 0; i < rows.size(); ++i) {
      feats[i].resize((size_t)d);
      for (int j = 0; j < d; ++j) feats[i][(size_t)j] = f.at((int)i, j);
    }
    out.selected[c] = herd_rows(feats, rows, ipc);
  }
  validate_coreset(out, ds, ipc);
  return out;
}

inline json coreset_to_json(const CoresetResult& r) {
  json sel = json::object();
  for (const auto& [c, rows] : r.selected) sel[std::to_string(c)] = rows;
  return json{{"method", r.method}, {"feature_source", r.feature_source},
              {"selected", sel}};
}

// Materializes the selection as a synthetic set (f=1) so the trainer and the
// evaluator need not care whether pixels were learned or picked.
inline SyntheticSet coreset_to_synthetic(const CoresetResult& r, const LabeledDataset& ds,
                                         int ipc, uint64_t seed) {
  SyntheticSet s;
  s.num_classes = ds.num_classes;
  s.ipc = ipc;
  s.formation_factor = 1;
  s.image_side = ds.side();
  s.norm_stats = ds.norm_stats;
  s.pixels = Tensor<float>(Shape::of(ds.num_classes * ipc, ds.channels(), ds.side(),
                                     ds.side()));
  int at = 0;
  for (const auto& [c, rows] : r.selected)
    for (int row : rows) {
      std::copy(ds.images.image(row), ds.images.image(row) + ds.images.image_size(),
                s.pixels.image(at));
      ++at;
    }
  s.labels = synthetic_labels(ds.num_classes, ipc);
  s.provenance.method = r.method;
  s.provenance.seed = seed;
  s.provenance.iterations = 0;
  s.provenance.config_hash = hex64(json_hash(coreset_to_json(r)));
  s.provenance.ratio = double(ds.num_classes) * ipc / std::max(1, ds.count());
  validate_synthetic(s);
  return s;
}

}  // namespace hashcond

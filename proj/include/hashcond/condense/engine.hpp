#pragma once

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hashcond/aug/formation.hpp"
#include "hashcond/condense/matching.hpp"
#include "hashcond/data/dataset.hpp"
#include "hashcond/data/synthetic.hpp"

namespace hashcond {

struct CondenseConfig {
  int iterations = 50;  // per outer repeat
  double lr_syn = 1.0;
  int real_batch = 64;
  int syn_batch = 0;  // 0 = every canvas of the class
  int ipc = 10;
  std::string arch_id = "convnet3-w32";
  PerturbationConfig perturb;
  FormationConfig formation;
  AugmentationPolicy aug_policy = default_policy();
  bool enable_NA = true;
  bool enable_DA = true;
  int outer_repeats = 1;
  uint64_t seed = 0;

  // Flag semantics: a disabled axis overrides whatever the numeric knobs say,
  // so an ablation row cannot half-enable a component by accident.
  CondenseConfig normalized() const {
    CondenseConfig c = *this;
    if (!c.enable_NA) c.perturb.alpha = 0;
    if (!c.enable_DA) c.formation.factor = 1;
    return c;
  }

  void validate() const {
    if (iterations < 1) throw ValidationError("iterations must be >= 1");
    // lr 0 is allowed: it freezes the canvases, which some tests rely on.
    if (lr_syn < 0) throw ValidationError("lr_syn must be >= 0");
    if (real_batch < 1) throw ValidationError("real_batch must be >= 1");
    if (syn_batch < 0) throw ValidationError("syn_batch must be >= 0");
    if (ipc < 1) throw ValidationError("ipc must be >= 1");
    if (outer_repeats < 1) throw ValidationError("outer_repeats must be >= 1");
    if (perturb.alpha < 0) throw ValidationError("alpha must be >= 0");
    formation.validate();
  }

  std::string method_tag() const {
    if (enable_NA && enable_DA) return "iem";
    if (!enable_NA && !enable_DA) return "dm-plain";
    return enable_NA ? "iem-na-only" : "iem-da-only";
  }

  json to_json() const {
    json policy = json::array();
    for (const auto& op : aug_policy)
      policy.push_back({{"kind", op.kind}, {"strength", op.strength}});
    return json{{"iterations", iterations},
                {"lr_syn", lr_syn},
                {"real_batch", real_batch},
                {"syn_batch", syn_batch},
                {"ipc", ipc},
                {"arch_id", arch_id},
                {"alpha", perturb.alpha},
                {"formation_factor", formation.factor},
                {"aug_policy", policy},
                {"enable_NA", enable_NA},
                {"enable_DA", enable_DA},
                {"outer_repeats", outer_repeats},
                {"seed", seed}};
  }
};

struct TraceRecord {
  int iteration = 0;
  double loss = 0;
  double seconds = 0;
  double grad_norm = 0;
};

using CondenseTrace = std::vector<TraceRecord>;

inline void save_trace(const CondenseTrace& trace, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write trace: " + path);
  for (const auto& r : trace) {
    json j{{"iteration", r.iteration},
           {"loss", r.loss},
           {"seconds", r.seconds},
           {"grad_norm", r.grad_norm}};
    f << j.dump() << "\n";
  }
}

// Called after every iteration with the live canvases; used by the timing
// harness to snapshot at wall-clock checkpoints.
using CondenseObserver =
    std::function<void(int global_iter, double seconds, const std::vector<Tensor<float>>&)>;

namespace detail {

// Seed-stream tags so independent draws cannot collide.
constexpr uint64_t kInitStream = 1, kThetaStream = 2, kNoiseStream = 3, kIterStream = 4;

inline std::vector<Tensor<float>> init_canvases(const LabeledDataset& ds,
                                                const CondenseConfig& cfg) {
  const int f = cfg.formation.factor;
  Rng rng(derive_seed(cfg.seed, kInitStream));
  std::vector<Tensor<float>> canvases;
  for (int c = 0; c < ds.num_classes; ++c) {
    const std::vector<int> rows = sample_class_rows(ds, c, cfg.ipc * f * f, rng);
    Tensor<float> cls(Shape::of(cfg.ipc, ds.channels(), ds.side(), ds.side()));
    for (int i = 0; i < cfg.ipc; ++i) {
      std::vector<int> part(rows.begin() + (size_t)i * f * f,
                            rows.begin() + (size_t)(i + 1) * f * f);
      Tensor<float> canvas = assemble_value(gather_rows(ds.images, part), cfg.formation);
      std::copy(canvas.data.begin(), canvas.data.end(), cls.image(i));
    }
    canvases.push_back(std::move(cls));
  }
  return canvases;
}

}  // namespace detail

// Freezes live canvases into an archive-ready set. Also used mid-run by the
// timing harness, so `iterations_done` is a parameter rather than the config
// total.
inline SyntheticSet export_synthetic(const std::vector<Tensor<float>>& canvases,
                                     const LabeledDataset& ds, const CondenseConfig& cfg_in,
                                     int iterations_done) {
  const CondenseConfig cfg = cfg_in.normalized();
  const int C = ds.num_classes;
  SyntheticSet out;
  out.num_classes = C;
  out.ipc = cfg.ipc;
  out.formation_factor = cfg.formation.factor;
  out.image_side = ds.side();
  out.norm_stats = ds.norm_stats;
  out.pixels = Tensor<float>(Shape::of(C * cfg.ipc, ds.channels(), ds.side(), ds.side()));
  for (int c = 0; c < C; ++c)
    std::copy(canvases[(size_t)c].data.begin(), canvases[(size_t)c].data.end(),
              out.pixels.image(c * cfg.ipc));
  clamp_to_unit_range(out.pixels, ds.norm_stats);
  out.labels = synthetic_labels(C, cfg.ipc);
  out.provenance.method = cfg.method_tag();
  out.provenance.seed = cfg.seed;
  out.provenance.iterations = iterations_done;
  out.provenance.alpha = cfg.perturb.alpha;
  out.provenance.config_hash = hex64(json_hash(cfg.to_json()));
  out.provenance.ratio = double(C) * cfg.ipc / std::max(1, ds.count());
  validate_synthetic(out);
  return out;
}

// Distribution-matching loop over learnable canvases. Each iteration draws a
// perturbed copy of the repeat's base network, samples one real batch and one
// augmentation per class, and steps the canvases along the matching-loss
// gradient with momentum SGD. Deterministic per (ds, cfg) on one platform.
inline std::pair<SyntheticSet, CondenseTrace> condense(const LabeledDataset& ds,
                                                       const CondenseConfig& cfg_in,
                                                       const CondenseObserver& observer = {}) {
  const CondenseConfig cfg = cfg_in.normalized();
  cfg.validate();
  if (cfg.formation.image_side != ds.side())
    throw ValidationError("formation side does not match dataset side");
  const int C = ds.num_classes;
  const int syn_b = cfg.syn_batch == 0 ? cfg.ipc : std::min(cfg.syn_batch, cfg.ipc);

  std::vector<Tensor<float>> canvases = detail::init_canvases(ds, cfg);
  std::vector<Tensor<float>> velocity(C);
  for (int c = 0; c < C; ++c) velocity[c] = Tensor<float>::zeros(canvases[c].shape);

  CondenseTrace trace;
  const auto start = std::chrono::steady_clock::now();
  int global_iter = 0;
  for (int rep = 0; rep < cfg.outer_repeats; ++rep) {
    const HashNetParams theta_init =
        init_network(cfg.arch_id, 1, derive_seed(cfg.seed, detail::kThetaStream, (uint64_t)rep));
    for (int r = 0; r < cfg.iterations; ++r, ++global_iter) {
      PerturbationConfig pc = cfg.perturb;
      pc.noise_seed = derive_seed(cfg.seed, detail::kNoiseStream, (uint64_t)rep, (uint64_t)r);
      const HashNetParams theta_aug =
          cfg.enable_NA && pc.alpha > 0 ? perturb(theta_init, pc) : theta_init;

      Rng iter_rng(derive_seed(cfg.seed, detail::kIterStream, (uint64_t)rep, (uint64_t)r));
      Tape<float> t;
      NetGraph<float> g = push_params(t, theta_aug, false, false);
      std::map<int, int> real_ids, syn_ids;
      std::map<int, AugmentationParams> w_map;
      std::vector<std::vector<int>> syn_rows(C);
      for (int c = 0; c < C; ++c) {
        const int rb = std::min(cfg.real_batch, (int)ds.class_index[c].size());
        real_ids[c] =
            t.leaf(gather_rows(ds.images, sample_class_rows(ds, c, rb, iter_rng)), false);
        if (syn_b == cfg.ipc) {
          for (int i = 0; i < cfg.ipc; ++i) syn_rows[c].push_back(i);
          syn_ids[c] = t.leaf(canvases[c], true);
        } else {
          std::vector<int> all(cfg.ipc);
          for (int i = 0; i < cfg.ipc; ++i) all[i] = i;
          syn_rows[c] = iter_rng.sample_without_replacement(all, syn_b);
          syn_ids[c] = t.leaf(gather_rows(canvases[c], syn_rows[c]), true);
        }
        w_map[c] = sample_aug(cfg.aug_policy, ds.side(), iter_rng);
      }
      int loss_id = matching_loss_graph(
          t, [&](Tape<float>& tp, int batch) { return features_graph(tp, g, batch); },
          real_ids, syn_ids, w_map);
      const double loss = t.val(loss_id).data[0];
      if (!std::isfinite(loss))
        throw std::runtime_error("condense: non-finite loss at iteration " +
                                 std::to_string(global_iter));
      t.backward(loss_id);

      // Momentum SGD in torch's convention: v = mu v + g, x -= lr v. Rows not
      // sampled this iteration still coast on their velocity.
      double grad_sq = 0;
      for (int c = 0; c < C; ++c) {
        const Tensor<float>& gsub = t.grad(syn_ids[c]);
        Tensor<float> gfull = Tensor<float>::zeros(canvases[c].shape);
        const size_t img = (size_t)canvases[c].image_size();
        for (size_t i = 0; i < syn_rows[c].size(); ++i)
          std::copy(gsub.data.begin() + i * img, gsub.data.begin() + (i + 1) * img,
                    gfull.data.begin() + (size_t)syn_rows[c][i] * img);
        for (size_t i = 0; i < gfull.data.size(); ++i) {
          grad_sq += (double)gfull.data[i] * gfull.data[i];
          velocity[c].data[i] = 0.5f * velocity[c].data[i] + gfull.data[i];
          canvases[c].data[i] -= (float)cfg.lr_syn * velocity[c].data[i];
        }
      }

      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      trace.push_back({global_iter, loss, secs, std::sqrt(grad_sq)});
      if (observer) observer(global_iter, secs, canvases);
    }
  }

  return {export_synthetic(canvases, ds, cfg, cfg.outer_repeats * cfg.iterations),
          std::move(trace)};
}

inline std::pair<SyntheticSet, CondenseTrace> condense_dm_baseline(
    const LabeledDataset& ds, const CondenseConfig& cfg_in,
    const CondenseObserver& observer = {}) {
  CondenseConfig cfg = cfg_in;
  cfg.enable_NA = false;
  cfg.enable_DA = false;
  return condense(ds, cfg, observer);
}

}  // namespace hashcond

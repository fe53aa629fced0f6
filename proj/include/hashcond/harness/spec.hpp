#pragma once

#include <cstdlib>
#include <string>
#include <vector>

#include "hashcond/condense/engine.hpp"
#include "hashcond/data/dataset.hpp"
#include "hashcond/hashing/trainer.hpp"

namespace hashcond {

struct EvalConfig {
  int top_k = 0;  // 0 = full depth
  std::vector<int> precision_depths = {50, 100};

  void validate() const {
    if (top_k < 0) throw ValidationError("eval.top_k must be >= 0");
    for (int d : precision_depths)
      if (d < 1) throw ValidationError("eval.precision_depths must be >= 1");
  }
};

struct TimingConfig {
  double checkpoint_seconds = 10.0;
  int max_checkpoints = 16;

  void validate() const {
    if (!(checkpoint_seconds > 0))
      throw ValidationError("timing.checkpoint_seconds must be positive");
    if (max_checkpoints < 1) throw ValidationError("timing.max_checkpoints must be >= 1");
  }
};

struct LossPlugin {
  std::string name;
  std::string loss_id = "center-cos";
  double quant_weight = 0.5;
};

// Tuned defaults for the 32x32 10-class scale: perturbation and formation on,
// long enough hash training to separate the methods. Alpha is mild on
// purpose: heavier weight noise starts to hurt at 50 iterations because the
// matching targets never average out.
inline CondenseConfig default_condense() {
  CondenseConfig c;
  c.perturb.alpha = 1.0;
  c.formation.factor = 2;
  return c;
}

inline HashTrainConfig default_train() {
  HashTrainConfig t;
  t.epochs = 150;
  return t;
}

// One experiment: a dataset, a method, and every sub-config the runners need.
// method/ipc/code_bits/seed live here and are pushed down into the sub-configs
// when a run starts, so the JSON never says the same thing twice.
struct ExperimentSpec {
  std::string dataset = "synth10";
  std::string method = "iem";
  int ipc = 10;
  int code_bits = 32;
  std::vector<uint64_t> seeds = {0, 1, 2};
  fs::path data_root;
  fs::path output_root = "outputs";
  SynthSpec synth;
  CondenseConfig condense = default_condense();
  HashTrainConfig train = default_train();
  EvalConfig eval;
  TimingConfig timing;
  std::vector<LossPlugin> plugins = {{"center-cos", "center-cos", 0.5},
                                     {"center-cos-no-quant", "center-cos", 0.0}};

  void validate() const {
    if (dataset.empty()) throw ValidationError("spec: dataset is required");
    if (seeds.empty()) throw ValidationError("spec: seeds must be non-empty");
    if (method != "iem" && method != "dm-plain" && method != "random" &&
        method != "herding")
      throw ValidationError("spec: unknown method " + method);
    resolved(method, seeds[0]).validate();
    HashTrainConfig t = train;
    t.code_bits = code_bits;
    t.validate();
    eval.validate();
    timing.validate();
    for (const auto& p : plugins) hash_loss_by_id<float>(p.loss_id);
  }

  // Condense config for one (method, seed) cell of this spec.
  CondenseConfig resolved(const std::string& m, uint64_t seed) const {
    CondenseConfig c = condense;
    c.ipc = ipc;
    c.seed = seed;
    if (m == "dm-plain") {
      c.enable_NA = false;
      c.enable_DA = false;
    }
    return c;
  }

  HashTrainConfig train_for(uint64_t seed) const {
    HashTrainConfig t = train;
    t.code_bits = code_bits;
    t.seed = seed;
    return t;
  }

  fs::path run_dir(const std::string& m, uint64_t seed) const {
    return output_root / dataset / m / (std::to_string(ipc) + "ipc") /
           std::to_string(seed);
  }
};

namespace detail {

inline AugmentationPolicy policy_from_json(const json& arr) {
  AugmentationPolicy p;
  for (const auto& op : arr)
    p.push_back({op.at("kind").get<std::string>(), op.at("strength").get<double>()});
  validate_policy(p);
  return p;
}

inline json policy_to_json(const AugmentationPolicy& p) {
  json arr = json::array();
  for (const auto& op : p) arr.push_back({{"kind", op.kind}, {"strength", op.strength}});
  return arr;
}

}  // namespace detail

inline json spec_to_json(const ExperimentSpec& s) {
  return json{
      {"dataset", s.dataset},
      {"method", s.method},
      {"ipc", s.ipc},
      {"code_bits", s.code_bits},
      {"seeds", s.seeds},
      {"data_root", s.data_root.string()},
      {"output_root", s.output_root.string()},
      {"synth",
       {{"per_class_train", s.synth.per_class_train},
        {"per_class_query", s.synth.per_class_query},
        {"side", s.synth.side},
        {"base_seed", s.synth.base_seed},
        {"noise", s.synth.noise}}},
      {"condense",
       {{"iterations", s.condense.iterations},
        {"lr_syn", s.condense.lr_syn},
        {"real_batch", s.condense.real_batch},
        {"syn_batch", s.condense.syn_batch},
        {"arch_id", s.condense.arch_id},
        {"alpha", s.condense.perturb.alpha},
        {"formation_factor", s.condense.formation.factor},
        {"enable_NA", s.condense.enable_NA},
        {"enable_DA", s.condense.enable_DA},
        {"outer_repeats", s.condense.outer_repeats},
        {"aug_policy", detail::policy_to_json(s.condense.aug_policy)}}},
      {"train",
       {{"epochs", s.train.epochs},
        {"lr", s.train.lr},
        {"batch_size", s.train.batch_size},
        {"quant_weight", s.train.quant_weight},
        {"arch_id", s.train.arch_id},
        {"loss_id", s.train.loss_id},
        {"aug_policy", detail::policy_to_json(s.train.aug_policy)}}},
      {"eval", {{"top_k", s.eval.top_k}, {"precision_depths", s.eval.precision_depths}}},
      {"timing",
       {{"checkpoint_seconds", s.timing.checkpoint_seconds},
        {"max_checkpoints", s.timing.max_checkpoints}}},
      {"plugins", [&] {
         json arr = json::array();
         for (const auto& p : s.plugins)
           arr.push_back({{"name", p.name},
                          {"loss_id", p.loss_id},
                          {"quant_weight", p.quant_weight}});
         return arr;
       }()}};
}

inline ExperimentSpec spec_from_json(const json& j) {
  ExperimentSpec s;
  try {
    s.dataset = j.value("dataset", s.dataset);
    s.method = j.value("method", s.method);
    s.ipc = j.value("ipc", s.ipc);
    s.code_bits = j.value("code_bits", s.code_bits);
    if (j.contains("seeds")) s.seeds = j.at("seeds").get<std::vector<uint64_t>>();
    s.data_root = j.value("data_root", s.data_root.string());
    s.output_root = j.value("output_root", s.output_root.string());
    if (j.contains("synth")) {
      const json& y = j["synth"];
      s.synth.per_class_train = y.value("per_class_train", s.synth.per_class_train);
      s.synth.per_class_query = y.value("per_class_query", s.synth.per_class_query);
      s.synth.side = y.value("side", s.synth.side);
      s.synth.base_seed = y.value("base_seed", s.synth.base_seed);
      s.synth.noise = y.value("noise", s.synth.noise);
    }
    if (j.contains("condense")) {
      const json& c = j["condense"];
      s.condense.iterations = c.value("iterations", s.condense.iterations);
      s.condense.lr_syn = c.value("lr_syn", s.condense.lr_syn);
      s.condense.real_batch = c.value("real_batch", s.condense.real_batch);
      s.condense.syn_batch = c.value("syn_batch", s.condense.syn_batch);
      s.condense.arch_id = c.value("arch_id", s.condense.arch_id);
      s.condense.perturb.alpha = c.value("alpha", s.condense.perturb.alpha);
      s.condense.formation.factor = c.value("formation_factor", s.condense.formation.factor);
      s.condense.enable_NA = c.value("enable_NA", s.condense.enable_NA);
      s.condense.enable_DA = c.value("enable_DA", s.condense.enable_DA);
      s.condense.outer_repeats = c.value("outer_repeats", s.condense.outer_repeats);
      if (c.contains("aug_policy"))
        s.condense.aug_policy = detail::policy_from_json(c["aug_policy"]);
    }
    if (j.contains("train")) {
      const json& t = j["train"];
      s.train.epochs = t.value("epochs", s.train.epochs);
      s.train.lr = t.value("lr", s.train.lr);
      s.train.batch_size = t.value("batch_size", s.train.batch_size);
      s.train.quant_weight = t.value("quant_weight", s.train.quant_weight);
      s.train.arch_id = t.value("arch_id", s.train.arch_id);
      s.train.loss_id = t.value("loss_id", s.train.loss_id);
      if (t.contains("aug_policy"))
        s.train.aug_policy = detail::policy_from_json(t["aug_policy"]);
    }
    if (j.contains("eval")) {
      s.eval.top_k = j["eval"].value("top_k", s.eval.top_k);
      if (j["eval"].contains("precision_depths"))
        s.eval.precision_depths = j["eval"]["precision_depths"].get<std::vector<int>>();
    }
    if (j.contains("timing")) {
      s.timing.checkpoint_seconds =
          j["timing"].value("checkpoint_seconds", s.timing.checkpoint_seconds);
      s.timing.max_checkpoints = j["timing"].value("max_checkpoints", s.timing.max_checkpoints);
    }
    if (j.contains("plugins")) {
      s.plugins.clear();
      for (const auto& p : j["plugins"])
        s.plugins.push_back({p.at("name").get<std::string>(),
                             p.value("loss_id", std::string("center-cos")),
                             p.value("quant_weight", 0.5)});
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad spec: ") + e.what());
  }
  return s;
}

// Dotted-path override: "condense.alpha=3" replaces that node with the parsed
// JSON value; bare words fall back to strings so `--set method=iem` works
// without quoting.
inline void apply_override(json& root, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override must look like path.to.key=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;  // unquoted string
  }
  json* node = &root;
  size_t at = 0;
  while (true) {
    const size_t dot = path.find('.', at);
    const std::string key = path.substr(at, dot == std::string::npos ? dot : dot - at);
    if (key.empty()) throw ConfigError("empty key in override path: " + assignment);
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    at = dot + 1;
  }
}

// Spec resolution order: built-in defaults, then the config file, then --set
// overrides, then DATA_ROOT/OUTPUT_ROOT for any path still unset.
inline ExperimentSpec load_spec(const std::string& config_path,
                                const std::vector<std::string>& overrides) {
  json j = spec_to_json(ExperimentSpec{});
  if (!config_path.empty()) {
    const json file = read_json(config_path);
    j.merge_patch(file);
  }
  for (const auto& o : overrides) apply_override(j, o);
  ExperimentSpec s = spec_from_json(j);
  if (s.data_root.empty())
    if (const char* env = std::getenv("DATA_ROOT")) s.data_root = env;
  if (s.output_root == "outputs")
    if (const char* env = std::getenv("OUTPUT_ROOT")) s.output_root = env;
  s.validate();
  return s;
}

inline LabeledDataset load_split(const ExperimentSpec& s, const std::string& split) {
  return load_dataset(s.data_root, s.dataset, split, s.synth);
}

}  // namespace hashcond

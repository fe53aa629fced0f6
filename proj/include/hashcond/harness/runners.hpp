#pragma once

#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "hashcond/coreset/select.hpp"
#include "hashcond/data/synthetic.hpp"
#include "hashcond/eval/metrics.hpp"
#include "hashcond/harness/report.hpp"
#include "hashcond/harness/spec.hpp"

namespace hashcond {

inline fs::path archive_dir(const ExperimentSpec& s, const std::string& method,
                            uint64_t seed) {
  return s.run_dir(method, seed) / "archive";
}

// Forward every image through the trained network in fixed-size chunks; the
// full activation volume of a few thousand images would not fit comfortably.
inline Tensor<float> encode_all(const HashNetParams& p, const Tensor<float>& images) {
  const int n = images.shape.d[0];
  Tensor<float> out(Shape::of(n, p.code_bits));
  const int chunk = 256;
  for (int at = 0; at < n; at += chunk) {
    const int take = std::min(chunk, n - at);
    std::vector<int> rows((size_t)take);
    std::iota(rows.begin(), rows.end(), at);
    Tensor<float> v = hash_forward(p, gather_rows(images, rows));
    std::copy(v.data.begin(), v.data.end(), out.data.begin() + (size_t)at * p.code_bits);
  }
  return out;
}

// Train on one synthetic set and rank the query split against the database
// split. The same splits serve every method in a spec; their checksums are
// stamped into the report so cross-method comparisons can prove they were
// ranked against identical data.
inline json evaluate_synthetic(const ExperimentSpec& spec, const SyntheticSet& set,
                               uint64_t seed, const HashTrainConfig& train_cfg,
                               const fs::path& out_dir) {
  const LabeledDataset db = load_split(spec, "database");
  const LabeledDataset query = load_split(spec, "query");

  TrainedHashModel model = train_hash(set, train_cfg);
  const BinaryCodes db_codes = binarize(encode_all(model.params, db.images), db.labels);
  const BinaryCodes q_codes =
      binarize(encode_all(model.params, query.images), query.labels);
  EvalReport rep =
      mean_average_precision(q_codes, db_codes, spec.eval.top_k, spec.eval.precision_depths);
  rep.method = set.provenance.method;

  json out = rep.to_json();
  out["dataset"] = spec.dataset;
  out["ipc"] = set.ipc;
  out["seed"] = seed;
  out["ratio"] = set.provenance.ratio;
  out["query_checksum"] = hex64(dataset_checksum(query));
  out["database_checksum"] = hex64(dataset_checksum(db));
  out["trained_on"] = {{"method", set.provenance.method},
                       {"seed", set.provenance.seed},
                       {"iterations", set.provenance.iterations},
                       {"config_hash", set.provenance.config_hash}};
  out["train_image_count"] = model.train_image_count;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_json(out_dir / "report.json", out);
    save_loss_curve(model.loss_curve, (out_dir / "loss_curve.jsonl").string());
  }
  return out;
}

// condense: learn an archive per seed. Only the condensation methods are
// valid here; coresets come from cmd_baseline.
inline json cmd_condense(const ExperimentSpec& spec) {
  if (spec.method != "iem" && spec.method != "dm-plain")
    throw ValidationError("condense runs iem or dm-plain; use `baseline` for coresets");
  const LabeledDataset ds = load_split(spec, "train");
  json runs = json::array();
  for (uint64_t seed : spec.seeds) {
    CondenseConfig cfg = spec.resolved(spec.method, seed);
    cfg.formation.image_side = ds.side();
    auto [set, trace] = condense(ds, cfg);
    const fs::path dir = spec.run_dir(spec.method, seed);
    fs::create_directories(dir);
    save_synthetic(set, archive_dir(spec, spec.method, seed));
    save_trace(trace, (dir / "trace.jsonl").string());
    json run{{"method", set.provenance.method},
             {"seed", seed},
             {"iterations", set.provenance.iterations},
             {"config_hash", set.provenance.config_hash},
             {"ratio", set.provenance.ratio},
             {"final_loss", trace.empty() ? 0.0 : trace.back().loss},
             {"seconds", trace.empty() ? 0.0 : trace.back().seconds},
             {"archive", archive_dir(spec, spec.method, seed).string()}};
    write_json(dir / "run.json", json{{"spec", spec_to_json(spec)}, {"result", run}});
    runs.push_back(run);
  }
  return json{{"command", "condense"}, {"runs", runs}};
}

// baseline: pick a coreset per seed and materialize it as an archive so the
// evaluate path cannot tell learned pixels from picked ones.
inline json cmd_baseline(const ExperimentSpec& spec) {
  if (spec.method != "random" && spec.method != "herding")
    throw ValidationError("baseline runs random or herding");
  const LabeledDataset ds = load_split(spec, "train");
  json runs = json::array();
  for (uint64_t seed : spec.seeds) {
    CoresetResult sel;
    if (spec.method == "random") {
      sel = select_random(ds, spec.ipc, seed);
    } else {
      const HashNetParams theta = init_network(spec.train.arch_id, spec.code_bits,
                                               derive_seed(seed, 0xFEA7));
      sel = select_herding(ds, spec.ipc, theta, seed);
    }
    SyntheticSet set = coreset_to_synthetic(sel, ds, spec.ipc, seed);
    const fs::path dir = spec.run_dir(spec.method, seed);
    fs::create_directories(dir);
    save_synthetic(set, archive_dir(spec, spec.method, seed));
    write_json(dir / "coreset.json", coreset_to_json(sel));
    json run{{"method", spec.method},
             {"seed", seed},
             {"ratio", set.provenance.ratio},
             {"archive", archive_dir(spec, spec.method, seed).string()}};
    write_json(dir / "run.json", json{{"spec", spec_to_json(spec)}, {"result", run}});
    runs.push_back(run);
  }
  return json{{"command", "baseline"}, {"runs", runs}};
}

// evaluate: load each seed's archive, train, rank, report.
inline json cmd_evaluate(const ExperimentSpec& spec) {
  json reports = json::array();
  double mean = 0;
  for (uint64_t seed : spec.seeds) {
    const fs::path arch = archive_dir(spec, spec.method, seed);
    if (!fs::exists(arch / "manifest.json"))
      throw ValidationError("no archive at " + arch.string() +
                            "; run condense or baseline first");
    SyntheticSet set = load_synthetic(arch);
    json rep = evaluate_synthetic(spec, set, seed, spec.train_for(seed),
                                  spec.run_dir(spec.method, seed));
    mean += rep.at("map").get<double>();
    reports.push_back(std::move(rep));
  }
  mean /= (double)spec.seeds.size();
  return json{{"command", "evaluate"}, {"mean_map", mean}, {"reports", reports}};
}

struct AblationCell {
  bool na = false, da = false;
  const char* label = "";
};

// ablate: the 2x2 {NA} x {DA} grid, every cell re-condensed and re-evaluated
// per seed, plus the per-seed ordering verdicts the grid is meant to support.
inline json cmd_ablate(const ExperimentSpec& spec) {
  if (spec.method != "iem")
    throw ValidationError("ablate requires method == iem");
  const LabeledDataset ds = load_split(spec, "train");
  const AblationCell cells[4] = {{false, false, "(x,x)"},
                                 {true, false, "(NA,x)"},
                                 {false, true, "(x,DA)"},
                                 {true, true, "(NA,DA)"}};

  std::map<std::string, std::vector<double>> maps;  // cell label -> per-seed mAP
  json cell_rows = json::array();
  for (const auto& cell : cells) {
    std::vector<double> per_seed;
    std::string tag;
    for (uint64_t seed : spec.seeds) {
      CondenseConfig cfg = spec.resolved("iem", seed);
      cfg.enable_NA = cell.na;
      cfg.enable_DA = cell.da;
      cfg.formation.image_side = ds.side();
      tag = cfg.method_tag();
      auto [set, trace] = condense(ds, cfg);
      const fs::path dir = spec.run_dir(tag, seed);
      fs::create_directories(dir);
      save_synthetic(set, archive_dir(spec, tag, seed));
      save_trace(trace, (dir / "trace.jsonl").string());
      json rep = evaluate_synthetic(spec, set, seed, spec.train_for(seed), dir);
      per_seed.push_back(rep.at("map").get<double>());
    }
    maps[cell.label] = per_seed;
    const double mean =
        std::accumulate(per_seed.begin(), per_seed.end(), 0.0) / (double)per_seed.size();
    cell_rows.push_back({{"label", cell.label},
                         {"na", cell.na},
                         {"da", cell.da},
                         {"method_tag", tag},
                         {"per_seed", per_seed},
                         {"mean_map", mean}});
  }

  // Ordering verdict per seed: (NA,DA) >= (x,DA) > (x,x) and (NA,x) > (x,x).
  json verdicts = json::array();
  int passing = 0;
  for (size_t i = 0; i < spec.seeds.size(); ++i) {
    const bool ok = maps["(NA,DA)"][i] >= maps["(x,DA)"][i] &&
                    maps["(x,DA)"][i] > maps["(x,x)"][i] &&
                    maps["(NA,x)"][i] > maps["(x,x)"][i];
    passing += ok;
    verdicts.push_back({{"seed", spec.seeds[i]},
                        {"ordering_holds", ok},
                        {"na_da", maps["(NA,DA)"][i]},
                        {"da_only", maps["(x,DA)"][i]},
                        {"na_only", maps["(NA,x)"][i]},
                        {"none", maps["(x,x)"][i]}});
  }

  json out{{"command", "ablate"},
           {"cells", cell_rows},
           {"verdicts", verdicts},
           {"seeds_passing", passing},
           {"seed_count", spec.seeds.size()}};

  std::vector<std::vector<std::string>> rows;
  for (const auto& c : cell_rows) {
    std::vector<std::string> row{c.at("label").get<std::string>()};
    for (double v : c.at("per_seed").get<std::vector<double>>()) row.push_back(fmt_num(v));
    row.push_back(fmt_num(c.at("mean_map").get<double>()));
    rows.push_back(row);
  }
  std::vector<std::string> headers{"(NA,DA)"};
  for (uint64_t s : spec.seeds) headers.push_back("seed " + std::to_string(s));
  headers.push_back("mean mAP");
  const std::string table = format_table(headers, rows);

  const fs::path dir = spec.output_root / spec.dataset / "_ablation" /
                       (std::to_string(spec.ipc) + "ipc");
  fs::create_directories(dir);
  write_json(dir / "ablation.json", out);
  write_text(dir / "ablation.txt", table);
  {
    std::vector<std::string> labels;
    std::vector<double> means;
    for (const auto& c : cell_rows) {
      labels.push_back(c.at("label").get<std::string>());
      means.push_back(c.at("mean_map").get<double>());
    }
    write_text(dir / "ablation.svg",
               svg_bar_chart(labels, means, "mAP", spec.dataset + " ablation, mean over seeds"));
  }
  out["table"] = table;
  return out;
}

namespace detail {

struct Snapshot {
  int checkpoint = 0;  // grid index, aligned across methods
  double seconds = 0;
  int iteration = 0;
  SyntheticSet set;
};

// Runs one condensation while snapshotting the canvases at multiples of
// `spacing` seconds of condensation wall-clock.
inline std::vector<Snapshot> condense_with_checkpoints(const LabeledDataset& ds,
                                                       const CondenseConfig& cfg,
                                                       double spacing, int max_checkpoints) {
  std::vector<Snapshot> snaps;
  CondenseObserver observer = [&](int iter, double secs,
                                  const std::vector<Tensor<float>>& canvases) {
    const int due = (int)(secs / spacing);
    if ((int)snaps.size() < std::min(due, max_checkpoints)) {
      Snapshot s;
      s.checkpoint = (int)snaps.size() + 1;
      s.seconds = secs;
      s.iteration = iter + 1;
      s.set = export_synthetic(canvases, ds, cfg, iter + 1);
      snaps.push_back(std::move(s));
    }
  };
  condense(ds, cfg, observer);
  return snaps;
}

}  // namespace detail

// timing: iem and dm-plain condensed under one clock; each wall-clock
// checkpoint's snapshot is trained and scored, giving a (time, mAP) series
// per method whose checkpoints align by grid index.
inline json cmd_timing(const ExperimentSpec& spec) {
  const LabeledDataset ds = load_split(spec, "train");
  const std::vector<std::string> methods = {"iem", "dm-plain"};

  json per_seed = json::array();
  int iem_wins = 0;
  std::vector<PlotSeries> plot;
  for (uint64_t seed : spec.seeds) {
    std::map<std::string, std::vector<detail::Snapshot>> snaps;
    for (const auto& m : methods) {
      CondenseConfig cfg = spec.resolved(m, seed);
      cfg.formation.image_side = ds.side();
      snaps[m] = detail::condense_with_checkpoints(ds, cfg, spec.timing.checkpoint_seconds,
                                                   spec.timing.max_checkpoints);
    }
    json series = json::object();
    std::map<std::string, std::vector<double>> maps;
    for (const auto& m : methods) {
      json pts = json::array();
      PlotSeries ps;
      ps.label = m + " seed " + std::to_string(seed);
      for (const auto& snap : snaps[m]) {
        json rep = evaluate_synthetic(spec, snap.set, seed, spec.train_for(seed), {});
        const double map = rep.at("map").get<double>();
        maps[m].push_back(map);
        pts.push_back({{"checkpoint", snap.checkpoint},
                       {"seconds", snap.seconds},
                       {"iteration", snap.iteration},
                       {"map", map}});
        ps.x.push_back(snap.seconds);
        ps.y.push_back(map);
      }
      series[m] = pts;
      plot.push_back(std::move(ps));
    }
    const size_t common = std::min(maps["iem"].size(), maps["dm-plain"].size());
    json verdict;
    if (common == 0) {
      verdict = {{"final_checkpoint", 0},
                 {"comparable", false},
                 {"note", "no aligned checkpoints; lower timing.checkpoint_seconds"}};
    } else {
      const double iem_final = maps["iem"][common - 1];
      const double dm_final = maps["dm-plain"][common - 1];
      iem_wins += iem_final >= dm_final;
      verdict = {{"final_checkpoint", common},
                 {"comparable", true},
                 {"iem_map", iem_final},
                 {"dm_plain_map", dm_final},
                 {"iem_ge_dm", iem_final >= dm_final}};
    }
    per_seed.push_back(
        {{"seed", seed}, {"series", series}, {"final_verdict", verdict}});
  }

  json out{{"command", "timing"},
           {"checkpoint_seconds", spec.timing.checkpoint_seconds},
           {"per_seed", per_seed},
           {"iem_final_wins", iem_wins},
           {"seed_count", spec.seeds.size()}};
  const fs::path dir = spec.output_root / spec.dataset / "_timing" /
                       (std::to_string(spec.ipc) + "ipc");
  fs::create_directories(dir);
  write_json(dir / "timing.json", out);
  write_text(dir / "timing.svg",
             svg_line_chart(plot, "condensation seconds", "mAP",
                            spec.dataset + " time-to-quality"));
  return out;
}

// generalize: one archive per seed, re-trained under every registered loss
// plugin. The shared archive is the point: trained_on is identical across
// plugins, so differences are attributable to the loss alone.
inline json cmd_generalize(const ExperimentSpec& spec) {
  if (spec.plugins.size() < 2)
    throw ConfigError("generalize needs at least two loss plugins");
  json groups = json::array();
  std::vector<std::string> labels;
  std::vector<double> means;
  for (const auto& plugin : spec.plugins) {
    hash_loss_by_id<float>(plugin.loss_id);
    std::vector<double> per_seed;
    json reports = json::array();
    for (uint64_t seed : spec.seeds) {
      const fs::path arch = archive_dir(spec, spec.method, seed);
      if (!fs::exists(arch / "manifest.json"))
        throw ValidationError("no archive at " + arch.string() +
                              "; run condense or baseline first");
      SyntheticSet set = load_synthetic(arch);
      HashTrainConfig cfg = spec.train_for(seed);
      cfg.loss_id = plugin.loss_id;
      cfg.quant_weight = plugin.quant_weight;
      json rep = evaluate_synthetic(spec, set, seed, cfg, {});
      per_seed.push_back(rep.at("map").get<double>());
      reports.push_back(std::move(rep));
    }
    const double mean =
        std::accumulate(per_seed.begin(), per_seed.end(), 0.0) / (double)per_seed.size();
    labels.push_back(plugin.name);
    means.push_back(mean);
    groups.push_back({{"plugin", plugin.name},
                      {"loss_id", plugin.loss_id},
                      {"quant_weight", plugin.quant_weight},
                      {"mean_map", mean},
                      {"reports", reports}});
  }
  json out{{"command", "generalize"}, {"method", spec.method}, {"groups", groups}};
  const fs::path dir = spec.output_root / spec.dataset / "_generalize" /
                       (std::to_string(spec.ipc) + "ipc");
  fs::create_directories(dir);
  write_json(dir / "generalize.json", out);
  write_text(dir / "generalize.svg",
             svg_bar_chart(labels, means, "mAP",
                           spec.method + " archive under each hashing loss"));
  return out;
}

// report: sweep the output tree for per-run reports and aggregate them into
// one table plus a bar chart of per-method means.
inline json cmd_report(const ExperimentSpec& spec) {
  const fs::path root = spec.output_root / spec.dataset;
  if (!fs::exists(root)) throw ValidationError("no outputs under " + root.string());

  json rows = json::array();
  std::map<std::string, std::pair<double, int>> by_method;  // method -> (sum, n)
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file() || entry.path().filename() != "report.json") continue;
    const json rep = read_json(entry.path());
    if (!rep.contains("map") || !rep.contains("method")) continue;
    rows.push_back({{"method", rep.at("method")},
                    {"ipc", rep.value("ipc", 0)},
                    {"seed", rep.value("seed", 0)},
                    {"map", rep.at("map")},
                    {"ratio", rep.value("ratio", 0.0)},
                    {"path", entry.path().string()}});
    auto& agg = by_method[rep.at("method").get<std::string>()];
    agg.first += rep.at("map").get<double>();
    agg.second += 1;
  }
  if (rows.empty()) throw ValidationError("no report.json files under " + root.string());

  std::vector<std::vector<std::string>> table_rows;
  for (const auto& r : rows)
    table_rows.push_back({r.at("method").get<std::string>(),
                          std::to_string(r.at("ipc").get<int>()),
                          std::to_string(r.at("seed").get<int>()),
                          fmt_num(r.at("map").get<double>()),
                          fmt_num(r.at("ratio").get<double>(), 3)});
  std::sort(table_rows.begin(), table_rows.end());
  const std::string table =
      format_table({"method", "ipc", "seed", "mAP", "ratio"}, table_rows);

  std::vector<std::string> labels;
  std::vector<double> means;
  json mean_rows = json::array();
  for (const auto& [m, agg] : by_method) {
    labels.push_back(m);
    means.push_back(agg.first / agg.second);
    mean_rows.push_back({{"method", m}, {"mean_map", agg.first / agg.second},
                         {"runs", agg.second}});
  }

  json out{{"command", "report"}, {"rows", rows}, {"means", mean_rows}};
  write_json(root / "summary.json", out);
  write_text(root / "summary.txt", table);
  write_text(root / "map_bars.svg",
             svg_bar_chart(labels, means, "mean mAP", spec.dataset + " methods"));
  out["table"] = table;
  return out;
}

}  // namespace hashcond

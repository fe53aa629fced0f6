#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "hashcond/harness/runners.hpp"
#include "testutil.hpp"

using namespace hashcond;

namespace {

fs::path temp_dir(const char* tag) {
  fs::path p = fs::temp_directory_path() / (std::string("hashcond_harness_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// toy3 at the smallest settings that still exercise every stage.
ExperimentSpec toy_spec(const fs::path& out) {
  ExperimentSpec s;
  s.dataset = "toy3";
  s.ipc = 2;
  s.code_bits = 16;
  s.seeds = {0};
  s.output_root = out;
  s.condense.iterations = 4;
  s.condense.real_batch = 4;
  s.train.epochs = 3;
  s.train.batch_size = 4;
  s.eval.precision_depths = {5};
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("spec survives a json round trip") {
  ExperimentSpec s;
  s.dataset = "toy3";
  s.method = "herding";
  s.ipc = 7;
  s.code_bits = 48;
  s.seeds = {4, 5};
  s.output_root = "elsewhere";
  s.condense.iterations = 11;
  s.condense.perturb.alpha = 1.25;
  s.condense.formation.factor = 4;
  s.condense.enable_NA = false;
  s.train.epochs = 9;
  s.train.loss_id = "center-cos-l2";
  s.eval.top_k = 33;
  s.timing.checkpoint_seconds = 2.5;
  s.plugins = {{"a", "center-cos", 0.1}, {"b", "center-cos-l2", 0.0}};

  ExperimentSpec back = spec_from_json(spec_to_json(s));
  REQUIRE(back.dataset == "toy3");
  REQUIRE(back.method == "herding");
  REQUIRE(back.ipc == 7);
  REQUIRE(back.code_bits == 48);
  REQUIRE(back.seeds == std::vector<uint64_t>{4, 5});
  REQUIRE(back.output_root == fs::path("elsewhere"));
  REQUIRE(back.condense.iterations == 11);
  REQUIRE(back.condense.perturb.alpha == 1.25);
  REQUIRE(back.condense.formation.factor == 4);
  REQUIRE_FALSE(back.condense.enable_NA);
  REQUIRE(back.train.epochs == 9);
  REQUIRE(back.train.loss_id == "center-cos-l2");
  REQUIRE(back.eval.top_k == 33);
  REQUIRE(back.timing.checkpoint_seconds == 2.5);
  REQUIRE(back.plugins.size() == 2);
  REQUIRE(back.plugins[1].name == "b");
  REQUIRE(back.plugins[1].quant_weight == 0.0);
  // aug policies are part of the round trip too
  REQUIRE(back.condense.aug_policy.size() == s.condense.aug_policy.size());
}

TEST_CASE("overrides follow dotted paths and parse json values") {
  json j = spec_to_json(ExperimentSpec{});
  apply_override(j, "condense.alpha=1.5");
  apply_override(j, "method=herding");
  apply_override(j, "seeds=[3,9]");
  apply_override(j, "train.loss_id=center-cos-l2");
  apply_override(j, "condense.enable_DA=false");
  REQUIRE(j["condense"]["alpha"] == 1.5);
  REQUIRE(j["method"] == "herding");  // bare word lands as a string
  REQUIRE(j["seeds"] == json::array({3, 9}));
  REQUIRE(j["condense"]["enable_DA"] == false);

  ExperimentSpec s = spec_from_json(j);
  REQUIRE(s.method == "herding");
  REQUIRE(s.condense.perturb.alpha == 1.5);
  REQUIRE(s.seeds == std::vector<uint64_t>{3, 9});
  REQUIRE(s.train.loss_id == "center-cos-l2");

  REQUIRE_THROWS_AS(apply_override(j, "no_equals_sign"), ConfigError);
  REQUIRE_THROWS_AS(apply_override(j, "=5"), ConfigError);
  REQUIRE_THROWS_AS(apply_override(j, "a..b=5"), ConfigError);
}

TEST_CASE("load_spec layers file, overrides, and environment") {
  fs::path dir = temp_dir("spec");
  write_json(dir / "cfg.json", json{{"dataset", "toy3"}, {"ipc", 3}});

  ExperimentSpec s =
      load_spec((dir / "cfg.json").string(), {"ipc=5", "train.epochs=2"});
  REQUIRE(s.dataset == "toy3");
  REQUIRE(s.ipc == 5);  // override beats the file
  REQUIRE(s.train.epochs == 2);

  // env roots only fill slots the file and overrides left alone
  setenv("DATA_ROOT", (dir / "data").c_str(), 1);
  setenv("OUTPUT_ROOT", (dir / "out").c_str(), 1);
  ExperimentSpec e = load_spec("", {"dataset=toy3"});
  REQUIRE(e.data_root == dir / "data");
  REQUIRE(e.output_root == dir / "out");
  ExperimentSpec pinned = load_spec("", {"dataset=toy3", "output_root=explicit"});
  REQUIRE(pinned.output_root == fs::path("explicit"));
  unsetenv("DATA_ROOT");
  unsetenv("OUTPUT_ROOT");

  REQUIRE_THROWS_AS(load_spec("", {"method=magic"}), ValidationError);
  REQUIRE_THROWS_AS(load_spec("", {"seeds=[]"}), ValidationError);
  REQUIRE_THROWS_AS(load_spec("", {"timing.checkpoint_seconds=0"}), ValidationError);
  fs::remove_all(dir);
}

TEST_CASE("run directories follow the documented layout") {
  ExperimentSpec s;
  s.dataset = "synth10";
  s.ipc = 10;
  s.output_root = "outputs";
  REQUIRE(s.run_dir("iem", 2) == fs::path("outputs/synth10/iem/10ipc/2"));
}

TEST_CASE("dm-plain resolution forces both axes off") {
  ExperimentSpec s;
  s.condense.perturb.alpha = 3.0;
  s.condense.formation.factor = 2;
  CondenseConfig c = s.resolved("dm-plain", 1).normalized();
  REQUIRE(c.perturb.alpha == 0.0);
  REQUIRE(c.formation.factor == 1);
  REQUIRE(c.seed == 1);
  REQUIRE(c.ipc == s.ipc);
  CondenseConfig i = s.resolved("iem", 1).normalized();
  REQUIRE(i.perturb.alpha == 3.0);
  REQUIRE(i.formation.factor == 2);
}

TEST_CASE("condense writes an archive, a trace, and exact provenance") {
  fs::path out = temp_dir("cond");
  ExperimentSpec spec = toy_spec(out);

  json r = cmd_condense(spec);
  REQUIRE(r.at("command") == "condense");
  REQUIRE(r.at("runs").size() == 1);

  const fs::path dir = spec.run_dir("iem", 0);
  REQUIRE(fs::exists(dir / "archive" / "manifest.json"));
  REQUIRE(fs::exists(dir / "archive" / "pixels.f32"));
  REQUIRE(fs::exists(dir / "trace.jsonl"));
  REQUIRE(fs::exists(dir / "run.json"));

  const json m = read_json(dir / "archive" / "manifest.json");
  REQUIRE(m.at("provenance").at("method") == "iem");
  REQUIRE(m.at("provenance").at("alpha") == 1.0);
  REQUIRE(m.at("formation_factor") == 2);
  // toy3 train split has 30 images; 3 classes * ipc 2 makes the ratio exact
  REQUIRE(m.at("provenance").at("ratio") == 6.0 / 30.0);

  // one trace line per iteration
  std::ifstream trace(dir / "trace.jsonl");
  int lines = 0;
  for (std::string line; std::getline(trace, line);) lines += !line.empty();
  REQUIRE(lines == spec.condense.iterations);
  fs::remove_all(out);
}

TEST_CASE("dm-plain archives record a unit factor and zero alpha") {
  fs::path out = temp_dir("dmplain");
  ExperimentSpec spec = toy_spec(out);
  spec.method = "dm-plain";
  cmd_condense(spec);
  const json m = read_json(spec.run_dir("dm-plain", 0) / "archive" / "manifest.json");
  REQUIRE(m.at("provenance").at("method") == "dm-plain");
  REQUIRE(m.at("provenance").at("alpha") == 0.0);
  REQUIRE(m.at("formation_factor") == 1);
  fs::remove_all(out);
}

TEST_CASE("condense refuses coreset methods") {
  ExperimentSpec spec = toy_spec("unused");
  spec.method = "random";
  REQUIRE_THROWS_AS(cmd_condense(spec), ValidationError);
}

TEST_CASE("two condense runs of one spec produce identical bytes") {
  fs::path a = temp_dir("det_a"), b = temp_dir("det_b");
  ExperimentSpec sa = toy_spec(a), sb = toy_spec(b);
  cmd_condense(sa);
  cmd_condense(sb);
  const fs::path ra = sa.run_dir("iem", 0) / "archive";
  const fs::path rb = sb.run_dir("iem", 0) / "archive";
  REQUIRE(slurp(ra / "pixels.f32") == slurp(rb / "pixels.f32"));
  REQUIRE(slurp(ra / "manifest.json") == slurp(rb / "manifest.json"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("baseline materializes coresets as archives") {
  fs::path out = temp_dir("base");
  ExperimentSpec spec = toy_spec(out);
  spec.method = "random";
  json r = cmd_baseline(spec);
  REQUIRE(r.at("command") == "baseline");
  const fs::path dir = spec.run_dir("random", 0);
  REQUIRE(fs::exists(dir / "coreset.json"));
  SyntheticSet set = load_synthetic(dir / "archive");
  REQUIRE(set.provenance.method == "random");
  REQUIRE(set.provenance.alpha == 0.0);
  REQUIRE(set.formation_factor == 1);
  REQUIRE(set.ipc == 2);

  spec.method = "herding";
  cmd_baseline(spec);
  const json cs = read_json(spec.run_dir("herding", 0) / "coreset.json");
  REQUIRE(cs.at("method") == "herding");
  REQUIRE(cs.at("feature_source").get<std::string>().find("convnet3-w32") == 0);

  spec.method = "iem";
  REQUIRE_THROWS_AS(cmd_baseline(spec), ValidationError);
  fs::remove_all(out);
}

TEST_CASE("evaluate demands an archive and stamps the data provenance") {
  fs::path out = temp_dir("eval");
  ExperimentSpec spec = toy_spec(out);
  REQUIRE_THROWS_AS(cmd_evaluate(spec), ValidationError);  // nothing condensed yet

  cmd_condense(spec);
  json r = cmd_evaluate(spec);
  REQUIRE(r.at("command") == "evaluate");
  const double mean = r.at("mean_map").get<double>();
  REQUIRE(mean >= 0.0);
  REQUIRE(mean <= 1.0);

  const json rep = read_json(spec.run_dir("iem", 0) / "report.json");
  REQUIRE(rep.at("method") == "iem");
  REQUIRE(rep.at("dataset") == "toy3");
  REQUIRE(rep.at("ratio") == 6.0 / 30.0);
  REQUIRE(rep.at("trained_on").at("method") == "iem");
  // f=2 canvases decode to 4 images each: 3 classes * 2 ipc * 4
  REQUIRE(rep.at("train_image_count") == 24);
  REQUIRE(fs::exists(spec.run_dir("iem", 0) / "loss_curve.jsonl"));

  // fairness contract: another method ranks the very same splits
  ExperimentSpec dm = spec;
  dm.method = "dm-plain";
  cmd_condense(dm);
  json r2 = cmd_evaluate(dm);
  const json rep2 = read_json(dm.run_dir("dm-plain", 0) / "report.json");
  REQUIRE(rep2.at("query_checksum") == rep.at("query_checksum"));
  REQUIRE(rep2.at("database_checksum") == rep.at("database_checksum"));
  fs::remove_all(out);
}

TEST_CASE("an untrained network ranks near chance") {
  fs::path out = temp_dir("chance");
  ExperimentSpec spec = toy_spec(out);
  spec.train.epochs = 0;
  cmd_condense(spec);
  json r = cmd_evaluate(spec);
  // balanced 3-class database: chance mAP is about 1/3
  REQUIRE(r.at("mean_map").get<double>() < 2.0 / 3.0);
  fs::remove_all(out);
}

TEST_CASE("ablate runs the two-axis grid and scores the orderings") {
  fs::path out = temp_dir("ablate");
  ExperimentSpec spec = toy_spec(out);
  spec.condense.iterations = 2;
  spec.train.epochs = 1;

  json r = cmd_ablate(spec);
  REQUIRE(r.at("cells").size() == 4);
  std::vector<std::string> labels;
  for (const auto& c : r.at("cells")) labels.push_back(c.at("label"));
  REQUIRE(labels == std::vector<std::string>{"(x,x)", "(NA,x)", "(x,DA)", "(NA,DA)"});
  for (const auto& c : r.at("cells")) {
    REQUIRE(c.at("per_seed").size() == 1);
    const double m = c.at("mean_map").get<double>();
    REQUIRE(m >= 0.0);
    REQUIRE(m <= 1.0);
  }
  // cells land under their own method tags
  REQUIRE(fs::exists(spec.run_dir("dm-plain", 0) / "archive" / "manifest.json"));
  REQUIRE(fs::exists(spec.run_dir("iem-na-only", 0) / "archive" / "manifest.json"));
  REQUIRE(fs::exists(spec.run_dir("iem-da-only", 0) / "archive" / "manifest.json"));
  REQUIRE(fs::exists(spec.run_dir("iem", 0) / "archive" / "manifest.json"));

  REQUIRE(r.at("verdicts").size() == 1);
  REQUIRE(r.at("seeds_passing").get<int>() <= 1);
  const fs::path adir = out / "toy3" / "_ablation" / "2ipc";
  REQUIRE(fs::exists(adir / "ablation.json"));
  REQUIRE(fs::exists(adir / "ablation.txt"));
  REQUIRE(fs::exists(adir / "ablation.svg"));
  REQUIRE(r.at("table").get<std::string>().find("(NA,DA)") != std::string::npos);

  spec.method = "dm-plain";
  REQUIRE_THROWS_AS(cmd_ablate(spec), ValidationError);
  fs::remove_all(out);
}

TEST_CASE("timing emits aligned wall-clock series") {
  fs::path out = temp_dir("timing");
  ExperimentSpec spec = toy_spec(out);
  spec.condense.iterations = 60;
  spec.train.epochs = 1;
  spec.timing.checkpoint_seconds = 0.3;
  spec.timing.max_checkpoints = 3;

  json r = cmd_timing(spec);
  REQUIRE(r.at("per_seed").size() == 1);
  const json& seed0 = r.at("per_seed")[0];
  for (const char* m : {"iem", "dm-plain"}) {
    const json& pts = seed0.at("series").at(m);
    REQUIRE(pts.size() >= 1);
    REQUIRE((int)pts.size() <= spec.timing.max_checkpoints);
    double prev = 0.0;
    int k = 0;
    for (const auto& p : pts) {
      REQUIRE(p.at("checkpoint").get<int>() == ++k);  // consecutive grid indices
      const double secs = p.at("seconds").get<double>();
      REQUIRE(secs >= k * spec.timing.checkpoint_seconds);  // snapshot is never early
      REQUIRE(secs > prev);
      prev = secs;
      const double map = p.at("map").get<double>();
      REQUIRE(map >= 0.0);
      REQUIRE(map <= 1.0);
    }
  }
  const json& verdict = seed0.at("final_verdict");
  REQUIRE(verdict.at("comparable") == true);
  REQUIRE(verdict.at("final_checkpoint").get<int>() >= 1);
  REQUIRE(fs::exists(out / "toy3" / "_timing" / "2ipc" / "timing.json"));
  REQUIRE(fs::exists(out / "toy3" / "_timing" / "2ipc" / "timing.svg"));

  // a grid coarser than the whole run yields no aligned checkpoints but
  // still a valid, well-formed result
  ExperimentSpec coarse = toy_spec(out);
  coarse.condense.iterations = 2;
  coarse.train.epochs = 1;
  coarse.timing.checkpoint_seconds = 3600.0;
  json rc = cmd_timing(coarse);
  REQUIRE(rc.at("per_seed")[0].at("final_verdict").at("comparable") == false);
  fs::remove_all(out);
}

TEST_CASE("generalize retrains one archive under every plugin") {
  fs::path out = temp_dir("gen");
  ExperimentSpec spec = toy_spec(out);
  cmd_condense(spec);

  json r = cmd_generalize(spec);
  REQUIRE(r.at("groups").size() == 2);
  const json& g0 = r.at("groups")[0].at("reports")[0];
  const json& g1 = r.at("groups")[1].at("reports")[0];
  REQUIRE(g0.at("trained_on") == g1.at("trained_on"));  // shared-archive contract
  for (const auto& g : r.at("groups")) {
    const double m = g.at("mean_map").get<double>();
    REQUIRE(std::isfinite(m));
    REQUIRE(m >= 0.0);
  }
  REQUIRE(fs::exists(out / "toy3" / "_generalize" / "2ipc" / "generalize.json"));

  spec.plugins = {{"only", "center-cos", 0.5}};
  REQUIRE_THROWS_AS(cmd_generalize(spec), ConfigError);

  // unknown plugin ids die at validation, before any work happens
  json j = spec_to_json(toy_spec(out));
  apply_override(j, R"(plugins=[{"name":"bad","loss_id":"nonexistent"}])");
  ExperimentSpec bad = spec_from_json(j);
  REQUIRE_THROWS_AS(bad.validate(), ConfigError);
  fs::remove_all(out);
}

TEST_CASE("report sweeps the output tree into one summary") {
  fs::path out = temp_dir("report");
  ExperimentSpec spec = toy_spec(out);
  REQUIRE_THROWS_AS(cmd_report(spec), ValidationError);  // nothing to report

  cmd_condense(spec);
  cmd_evaluate(spec);
  ExperimentSpec rnd = spec;
  rnd.method = "random";
  cmd_baseline(rnd);
  cmd_evaluate(rnd);

  json r = cmd_report(spec);
  REQUIRE(r.at("rows").size() == 2);
  REQUIRE(r.at("means").size() == 2);
  REQUIRE(fs::exists(out / "toy3" / "summary.json"));
  REQUIRE(fs::exists(out / "toy3" / "summary.txt"));
  REQUIRE(fs::exists(out / "toy3" / "map_bars.svg"));
  const std::string table = r.at("table").get<std::string>();
  REQUIRE(table.find("iem") != std::string::npos);
  REQUIRE(table.find("random") != std::string::npos);
  fs::remove_all(out);
}

TEST_CASE("table formatter aligns columns") {
  const std::string t = format_table({"name", "v"}, {{"a", "1.5"}, {"bb", "10"}});
  REQUIRE(t ==
          "name    v\n"
          "----  ---\n"
          "a     1.5\n"
          "bb     10\n");
}

TEST_CASE("charts are self-contained svg") {
  PlotSeries s;
  s.label = "m";
  s.x = {0.0, 1.0, 2.0};
  s.y = {0.1, 0.4, 0.3};
  const std::string line = svg_line_chart({s}, "t", "v", "demo");
  REQUIRE(line.find("<svg") == 0);
  REQUIRE(line.find("polyline") != std::string::npos);
  REQUIRE(line.find("nan") == std::string::npos);
  const std::string bars = svg_bar_chart({"a", "b"}, {0.2, 0.5}, "v", "demo");
  REQUIRE(bars.find("<svg") == 0);
  REQUIRE(bars.find("rect") != std::string::npos);
}

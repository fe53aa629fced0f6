#include <catch2/catch_amalgamated.hpp>

#include "hashcond/condense/engine.hpp"
#include "hashcond/condense/matching.hpp"
#include "testutil.hpp"

using namespace hashcond;

namespace {

// Feature stub: one feature per image, its mean pixel. Realized as a linear
// layer with constant 1/D weights so gradients flow like any extractor.
template <typename S>
int mean_pixel_features(Tape<S>& t, int batch) {
  int flat = flatten_images(t, batch);
  const int d = t.val(flat).shape.d[1];
  Tensor<S> w = Tensor<S>::full(Shape::of(1, d), S(1) / S(d));
  return linear(t, flat, t.leaf(w), t.leaf(Tensor<S>::zeros(Shape::of(1))));
}

std::map<int, AugmentationParams> identity_ws(const std::vector<int>& classes, int side) {
  std::map<int, AugmentationParams> m;
  Rng rng(1);
  for (int c : classes) m[c] = sample_aug(identity_policy(), side, rng);
  return m;
}

}  // namespace

TEST_CASE("matching loss on the mean-pixel stub") {
  Tape<double> t;

  SECTION("identical batches give zero") {
    Rng rng(5);
    Tensor<double> x = hctest::random_tensor(Shape::of(4, 3, 6, 6), rng);
    std::map<int, int> real{{0, t.leaf(x)}};
    std::map<int, int> syn{{0, t.leaf(x, true)}};
    int loss = matching_loss_graph(t, mean_pixel_features<double>, real, syn,
                                   identity_ws({0}, 6));
    REQUIRE(t.val(loss).data[0] == Catch::Approx(0.0).margin(1e-18));
  }

  SECTION("single class with mean gap 0.5 gives 0.25") {
    std::map<int, int> real{{0, t.leaf(Tensor<double>::full(Shape::of(2, 1, 4, 4), 1.0))}};
    std::map<int, int> syn{{0, t.leaf(Tensor<double>::full(Shape::of(3, 1, 4, 4), 0.5), true)}};
    int loss = matching_loss_graph(t, mean_pixel_features<double>, real, syn,
                                   identity_ws({0}, 4));
    REQUIRE(t.val(loss).data[0] == Catch::Approx(0.25).epsilon(1e-12));
  }

  SECTION("two classes with gaps 0.5 and 0.2 sum to 0.29") {
    std::map<int, int> real{
        {0, t.leaf(Tensor<double>::full(Shape::of(2, 1, 4, 4), 1.0))},
        {1, t.leaf(Tensor<double>::full(Shape::of(2, 1, 4, 4), 0.3))}};
    std::map<int, int> syn{
        {0, t.leaf(Tensor<double>::full(Shape::of(2, 1, 4, 4), 0.5), true)},
        {1, t.leaf(Tensor<double>::full(Shape::of(2, 1, 4, 4), 0.1), true)}};
    int loss = matching_loss_graph(t, mean_pixel_features<double>, real, syn,
                                   identity_ws({0, 1}, 4));
    REQUIRE(t.val(loss).data[0] == Catch::Approx(0.29).epsilon(1e-12));
  }

  SECTION("class mismatch between the maps is rejected") {
    Tensor<double> x = Tensor<double>::zeros(Shape::of(1, 1, 4, 4));
    std::map<int, int> real{{0, t.leaf(x)}};
    std::map<int, int> syn{{1, t.leaf(x, true)}};
    REQUIRE_THROWS_AS(matching_loss_graph(t, mean_pixel_features<double>, real, syn,
                                          identity_ws({0}, 4)),
                      ValidationError);
    std::map<int, int> syn2{{0, t.leaf(x, true)}, {1, t.leaf(x, true)}};
    REQUIRE_THROWS_AS(matching_loss_graph(t, mean_pixel_features<double>, real, syn2,
                                          identity_ws({0, 1}, 4)),
                      ValidationError);
  }
}

TEST_CASE("matching loss against a real network") {
  NetParams<double> theta = init_network("microconv", 1, 3).cast<double>();
  Rng rng(7);
  Tensor<double> xr = hctest::random_tensor(Shape::of(4, 3, 8, 8), rng);

  SECTION("identical distributions give zero with shared w") {
    Rng wr(2);
    std::map<int, AugmentationParams> ws{{0, sample_aug(default_policy(), 8, wr)}};
    double loss = matching_loss<double>(theta, {{0, xr}}, {{0, xr}}, ws);
    REQUIRE(loss == Catch::Approx(0.0).margin(1e-16));
  }

  SECTION("loss is non-negative and positive for distinct batches") {
    Tensor<double> xs = hctest::random_tensor(Shape::of(2, 3, 8, 8), rng);
    double loss = matching_loss<double>(theta, {{0, xr}}, {{0, xs}}, identity_ws({0}, 8));
    REQUIRE(loss > 0);
  }

  SECTION("gradients flow to synthetic pixels only") {
    Tensor<double> xs = hctest::random_tensor(Shape::of(2, 3, 8, 8), rng);
    std::map<int, Tensor<double>> grads;
    matching_loss<double>(theta, {{0, xr}}, {{0, xs}}, identity_ws({0}, 8), &grads);
    REQUIRE(grads.at(0).shape == xs.shape);
    double gn = grads.at(0).norm();
    REQUIRE(gn > 0);
    REQUIRE(std::isfinite(gn));
  }
}

TEST_CASE("matching loss gradient matches finite differences on a tiny net") {
  // Two classes, four images each, float64, under 1k parameters, with a real
  // sampled augmentation shared inside each class.
  NetParams<double> theta = init_network("microconv", 1, 11).cast<double>();
  size_t nparams = 0;
  for (const auto& [n, t] : theta.feature_params) nparams += t.data.size();
  REQUIRE(nparams < 1000);

  Rng rng(13);
  Tensor<double> r0 = hctest::random_tensor(Shape::of(4, 3, 8, 8), rng);
  Tensor<double> r1 = hctest::random_tensor(Shape::of(4, 3, 8, 8), rng);
  Rng wr(6);
  std::map<int, AugmentationParams> ws{{0, sample_aug(default_policy(), 8, wr)},
                                       {1, sample_aug(default_policy(), 8, wr)}};

  double err = hctest::gradcheck(
      [&](Tape<double>& t, const std::vector<int>& leaves) {
        NetGraph<double> g = push_params(t, theta, false, false);
        std::map<int, int> real{{0, t.leaf(r0)}, {1, t.leaf(r1)}};
        std::map<int, int> syn{{0, leaves[0]}, {1, leaves[1]}};
        return matching_loss_graph(
            t, [&](Tape<double>& tp, int b) { return features_graph(tp, g, b); }, real,
            syn, ws);
      },
      {hctest::random_tensor(Shape::of(4, 3, 8, 8), rng),
       hctest::random_tensor(Shape::of(4, 3, 8, 8), rng)});
  REQUIRE(err < 1e-4);
}

TEST_CASE("condense config normalization and validation") {
  CondenseConfig cfg;
  cfg.enable_NA = false;
  cfg.enable_DA = false;
  cfg.perturb.alpha = 7;
  cfg.formation.factor = 2;
  CondenseConfig n = cfg.normalized();
  REQUIRE(n.perturb.alpha == 0);
  REQUIRE(n.formation.factor == 1);
  REQUIRE(n.method_tag() == "dm-plain");
  REQUIRE(cfg.formation.factor == 2);  // original untouched

  CondenseConfig bad;
  bad.iterations = 0;
  REQUIRE_THROWS_AS(bad.validate(), ValidationError);
  bad = CondenseConfig{};
  bad.lr_syn = -1;
  REQUIRE_THROWS_AS(bad.validate(), ValidationError);
  bad = CondenseConfig{};
  bad.outer_repeats = 0;
  REQUIRE_THROWS_AS(bad.validate(), ValidationError);

  REQUIRE(CondenseConfig{}.method_tag() == "iem");
  CondenseConfig na_only;
  na_only.enable_DA = false;
  REQUIRE(na_only.method_tag() == "iem-na-only");
}

namespace {

CondenseConfig toy_config(uint64_t seed, bool na, bool da) {
  CondenseConfig cfg;
  cfg.iterations = 5;
  cfg.ipc = 2;
  cfg.enable_NA = na;
  cfg.enable_DA = da;
  cfg.perturb.alpha = na ? 1.0 : 0.0;
  cfg.formation.factor = da ? 2 : 1;
  cfg.formation.image_side = 32;
  cfg.real_batch = 8;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("condense freezes pixels at zero learning rate") {
  LabeledDataset ds = load_dataset("", "toy3", "train");
  CondenseConfig cfg = toy_config(3, true, true);
  cfg.lr_syn = 0;
  auto [set, trace] = condense(ds, cfg);
  std::vector<Tensor<float>> init = detail::init_canvases(ds, cfg.normalized());
  REQUIRE((int)trace.size() == 5);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < cfg.ipc; ++i)
      for (int k = 0; k < set.pixels.image_size(); ++k)
        REQUIRE(set.pixels.image(c * cfg.ipc + i)[k] == init[(size_t)c].image(i)[k]);
}

TEST_CASE("condense descends, is deterministic, and leaves the data alone") {
  LabeledDataset ds = load_dataset("", "toy3", "train");
  const uint64_t before = dataset_checksum(ds);

  CondenseConfig cfg = toy_config(9, true, true);
  cfg.iterations = 30;
  auto [set1, trace1] = condense(ds, cfg);
  auto [set2, trace2] = condense(ds, cfg);

  REQUIRE(dataset_checksum(ds) == before);
  REQUIRE(set1.pixels.data == set2.pixels.data);  // bit-identical
  REQUIRE(trace1.back().loss < trace1.front().loss);
  REQUIRE(set1.provenance.method == "iem");
  REQUIRE(set1.provenance.iterations == 30);
  REQUIRE(set1.formation_factor == 2);
  REQUIRE(set1.pixels.shape.d[0] == 6);
  REQUIRE(set1.provenance.ratio == Catch::Approx(6.0 / 30.0));

  // Trace timestamps are monotone.
  for (size_t i = 1; i < trace1.size(); ++i)
    REQUIRE(trace1[i].seconds >= trace1[i - 1].seconds);
}

TEST_CASE("dm baseline matches the IEM run at iteration zero when flags align") {
  LabeledDataset ds = load_dataset("", "toy3", "train");
  CondenseConfig cfg = toy_config(21, true, true);
  cfg.perturb.alpha = 0;     // NA enabled but inert
  cfg.formation.factor = 1;  // DA enabled but inert
  cfg.iterations = 2;
  auto [set_iem, trace_iem] = condense(ds, cfg);
  auto [set_dm, trace_dm] = condense_dm_baseline(ds, cfg);
  REQUIRE(set_dm.provenance.method == "dm-plain");
  REQUIRE(trace_iem[0].loss == trace_dm[0].loss);
}

TEST_CASE("condense observer sees every iteration") {
  LabeledDataset ds = load_dataset("", "toy3", "train");
  CondenseConfig cfg = toy_config(2, false, false);
  cfg.iterations = 4;
  std::vector<int> seen;
  condense(ds, cfg, [&](int it, double s, const std::vector<Tensor<float>>& c) {
    seen.push_back(it);
    REQUIRE(c.size() == 3);
    REQUIRE(s >= 0);
  });
  REQUIRE(seen == std::vector<int>({0, 1, 2, 3}));
}

TEST_CASE("trace file is one json record per iteration") {
  CondenseTrace trace{{0, 2.5, 0.1, 0.2}, {1, 1.5, 0.3, 0.1}};
  auto path = std::filesystem::temp_directory_path() / "hashcond_trace.jsonl";
  save_trace(trace, path.string());
  std::ifstream f(path);
  std::string line;
  int n = 0;
  while (std::getline(f, line)) {
    json j = json::parse(line);
    REQUIRE(j["iteration"] == n);
    ++n;
  }
  REQUIRE(n == 2);
  std::filesystem::remove(path);
}

#include <catch2/catch_amalgamated.hpp>

#include "hashcond/hashing/codebook.hpp"
#include "hashcond/hashing/loss.hpp"
#include "hashcond/hashing/trainer.hpp"
#include "testutil.hpp"

using namespace hashcond;

TEST_CASE("two classes in two bits get the first Hadamard rows") {
  Tensor<float> cb = build_codebook(2, 2, 0);
  REQUIRE(cb.at(0, 0) == 1.0f);
  REQUIRE(cb.at(0, 1) == 1.0f);
  REQUIRE(cb.at(1, 0) == 1.0f);
  REQUIRE(cb.at(1, 1) == -1.0f);
}

TEST_CASE("ten classes in 32 bits are mutually orthogonal") {
  Tensor<float> cb = build_codebook(10, 32, 123);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < i; ++j)
      REQUIRE(hamming_between(&cb.at(i, 0), &cb.at(j, 0), 32) == 16);
  // The structured branch does not consume randomness.
  Tensor<float> cb2 = build_codebook(10, 32, 999);
  REQUIRE(cb.data == cb2.data);
}

TEST_CASE("non-power-of-two widths fall back to sampled rows") {
  Tensor<float> cb = build_codebook(5, 12, 7);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 12; ++j) REQUIRE(std::abs(cb.at(i, j)) == 1.0f);
    for (int p = 0; p < i; ++p)
      REQUIRE(hamming_between(&cb.at(p, 0), &cb.at(i, 0), 12) >= 3);
  }
  Tensor<float> again = build_codebook(5, 12, 7);
  REQUIRE(cb.data == again.data);
}

TEST_CASE("more classes than codes is refused") {
  REQUIRE_THROWS_AS(build_codebook(5, 2, 0), InfeasibleError);
  REQUIRE_THROWS_AS(build_codebook(0, 8, 0), ValidationError);
  REQUIRE_THROWS_AS(build_codebook(3, 0, 0), ValidationError);
}

namespace {

Tensor<double> rows_for(const Tensor<double>& cb, const std::vector<int>& labels,
                        double scale) {
  Tensor<double> v(Shape::of((int)labels.size(), cb.shape.d[1]));
  for (size_t i = 0; i < labels.size(); ++i)
    for (int j = 0; j < cb.shape.d[1]; ++j)
      v.at((int)i, j) = scale * cb.at(labels[i], j);
  return v;
}

Tensor<double> pm_codebook(int c, int k, unsigned seed) {
  Rng rng(seed);
  Tensor<double> cb(Shape::of(c, k));
  for (auto& x : cb.data) x = rng.coin() ? 1.0 : -1.0;
  return cb;
}

}  // namespace

TEST_CASE("center loss hits its anchors") {
  Tensor<double> cb = pm_codebook(3, 4, 11);
  std::vector<int> labels = {0, 2, 1};

  // Codes equal to their targets: zero loss at any quantization weight.
  {
    Tape<double> t;
    int v = t.leaf(rows_for(cb, labels, 1.0));
    REQUIRE(t.val(hash_center_loss(t, v, labels, cb, 0.7)).data[0] ==
            Catch::Approx(0.0).margin(1e-12));
  }
  // Codes opposite to their targets: cosine term alone gives 2.
  {
    Tape<double> t;
    int v = t.leaf(rows_for(cb, labels, -1.0));
    REQUIRE(t.val(hash_center_loss(t, v, labels, cb, 0.0)).data[0] ==
            Catch::Approx(2.0).epsilon(1e-12));
  }
  // Half-scale codes keep the cosine at 1; only quantization remains.
  {
    Tape<double> t;
    int v = t.leaf(rows_for(cb, labels, 0.5));
    REQUIRE(t.val(hash_center_loss(t, v, labels, cb, 1.0)).data[0] ==
            Catch::Approx(0.25).epsilon(1e-12));
  }
}

TEST_CASE("hash losses reject malformed inputs") {
  Tensor<double> cb = pm_codebook(3, 4, 11);
  Tape<double> t;
  int v = t.leaf(Tensor<double>(Shape::of(2, 4)));
  REQUIRE_THROWS_AS(hash_center_loss(t, v, {0, 3}, cb, 0.5), ValidationError);
  REQUIRE_THROWS_AS(hash_center_loss(t, v, {0, -1}, cb, 0.5), ValidationError);
  REQUIRE_THROWS_AS(hash_center_loss(t, v, {0}, cb, 0.5), ValidationError);
  int bad = t.leaf(Tensor<double>(Shape::of(2, 3)));
  REQUIRE_THROWS_AS(hash_center_loss(t, bad, {0, 1}, cb, 0.5), ValidationError);
}

TEST_CASE("hash loss gradients match finite differences") {
  Tensor<double> cb = pm_codebook(3, 6, 21);
  std::vector<int> labels = {0, 1, 2, 0};
  Rng rng(77);
  Tensor<double> v0(Shape::of(4, 6));
  // Keep entries away from zero: |v| has a kink there.
  for (auto& x : v0.data) x = (rng.coin() ? 1 : -1) * rng.uniform(0.2, 1.3);

  for (const char* id : {"center-cos", "center-l2"}) {
    HashLossFn<double> fn = hash_loss_by_id<double>(id);
    double err = hctest::gradcheck(
        [&](Tape<double>& t, const std::vector<int>& ids) {
          return fn(t, ids[0], labels, cb, 0.5);
        },
        {v0});
    INFO(id);
    REQUIRE(err < 1e-6);
  }
}

TEST_CASE("unknown loss ids are a config error") {
  REQUIRE_THROWS_AS(hash_loss_by_id<float>("center-cosine"), ConfigError);
  REQUIRE_NOTHROW(hash_loss_by_id<float>("center-l2"));
}

namespace {

// Two well-separated blobs, side 16 to fit the small arch.
SyntheticSet separable_toy(int per_class, unsigned seed) {
  SyntheticSet s;
  s.num_classes = 2;
  s.ipc = per_class;
  s.image_side = 16;
  s.pixels = Tensor<float>(Shape::of(2 * per_class, 3, 16, 16));
  Rng rng(seed);
  for (int i = 0; i < s.pixels.shape.d[0]; ++i) {
    const float base = i < per_class ? -0.8f : 0.8f;
    float* px = s.pixels.image(i);
    for (int k = 0; k < s.pixels.image_size(); ++k)
      px[k] = base + 0.05f * (float)rng.normal();
  }
  s.labels = synthetic_labels(2, per_class);
  s.norm_stats.mean = {0, 0, 0};
  s.norm_stats.stdev = {1, 1, 1};
  s.provenance.method = "random";
  s.provenance.ratio = 0.1;
  return s;
}

HashTrainConfig toy_cfg() {
  HashTrainConfig cfg;
  cfg.arch_id = "tinyconv";
  cfg.code_bits = 16;
  cfg.epochs = 20;
  cfg.batch_size = 8;
  cfg.seed = 3;
  cfg.aug_policy = identity_policy();
  return cfg;
}

}  // namespace

TEST_CASE("zero epochs returns the initialization untouched") {
  SyntheticSet s = separable_toy(4, 1);
  HashTrainConfig cfg = toy_cfg();
  cfg.epochs = 0;
  TrainedHashModel a = train_hash(s, cfg);
  TrainedHashModel b = train_hash(s, cfg);
  REQUIRE(a.loss_curve.empty());
  REQUIRE(a.train_image_count == 8);
  for (size_t k = 0; k < a.params.feature_params.size(); ++k)
    REQUIRE(a.params.feature_params[k].second.data == b.params.feature_params[k].second.data);
  for (size_t k = 0; k < a.params.hash_params.size(); ++k)
    REQUIRE(a.params.hash_params[k].second.data == b.params.hash_params[k].second.data);
}

TEST_CASE("training drives a separable toy problem toward its anchors") {
  SyntheticSet s = separable_toy(8, 1);
  HashTrainConfig cfg = toy_cfg();
  cfg.lr = 0.005;
  TrainedHashModel m = train_hash(s, cfg);
  REQUIRE(m.loss_curve.size() == 20);
  for (double v : m.loss_curve) REQUIRE(std::isfinite(v));
  REQUIRE(m.loss_curve.back() < m.loss_curve.front());
  REQUIRE(m.loss_curve.back() < 0.1);
  // Transient bumps happen; cap them at 5% of the preceding epoch.
  for (size_t e = 1; e < m.loss_curve.size(); ++e)
    REQUIRE(m.loss_curve[e] <= m.loss_curve[e - 1] * 1.05 + 1e-9);
}

TEST_CASE("training is deterministic in the seed") {
  SyntheticSet s = separable_toy(4, 2);
  HashTrainConfig cfg = toy_cfg();
  cfg.epochs = 3;
  cfg.aug_policy = default_policy();
  TrainedHashModel a = train_hash(s, cfg);
  TrainedHashModel b = train_hash(s, cfg);
  REQUIRE(a.loss_curve == b.loss_curve);
  for (size_t k = 0; k < a.params.hash_params.size(); ++k)
    REQUIRE(a.params.hash_params[k].second.data == b.params.hash_params[k].second.data);
  cfg.seed = 4;
  TrainedHashModel c = train_hash(s, cfg);
  REQUIRE(a.loss_curve != c.loss_curve);
}

TEST_CASE("multi-formation sets are decoded into patches before training") {
  SyntheticSet s = separable_toy(3, 5);
  s.formation_factor = 2;
  HashTrainConfig cfg = toy_cfg();
  cfg.epochs = 1;
  TrainedHashModel m = train_hash(s, cfg);
  REQUIRE(m.train_image_count == 2 * 3 * 4);
  REQUIRE(m.trained_on.method == "random");
}

TEST_CASE("whole-set training stamps its own provenance") {
  LabeledDataset ds = load_dataset("", "toy3", "train");
  HashTrainConfig cfg = toy_cfg();
  cfg.arch_id = "convnet3-w32";
  cfg.epochs = 1;
  cfg.batch_size = 16;
  TrainedHashModel m = train_hash(ds, cfg);
  REQUIRE(m.trained_on.method == "whole-set");
  REQUIRE(m.trained_on.ratio == 1.0);
  REQUIRE(m.train_image_count == ds.count());
}

TEST_CASE("bad training configs are rejected up front") {
  HashTrainConfig cfg = toy_cfg();
  cfg.lr = 0;
  REQUIRE_THROWS_AS(cfg.validate(), ValidationError);
  cfg = toy_cfg();
  cfg.epochs = -1;
  REQUIRE_THROWS_AS(cfg.validate(), ValidationError);
  cfg = toy_cfg();
  cfg.code_bits = 0;
  REQUIRE_THROWS_AS(cfg.validate(), ValidationError);
}

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "gradcheck.hpp"
#include "toxdebias/errors.hpp"
#include "toxdebias/probe.hpp"

using namespace toxdebias;

namespace {

// Two tokens, each of which decides the label.
Dataset separable(std::size_t n) {
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    Instance inst;
    inst.id = "s" + std::to_string(i);
    const bool toxic = i % 2 == 0;
    inst.text = toxic ? "grr" : "yay";
    inst.raw_label = toxic ? RawLabel::abusive : RawLabel::neither;
    inst.label = toxic ? Label::toxic : Label::nontoxic;
    d.instances.push_back(inst);
  }
  return d;
}

FeatureSpace small_space() {
  FeatureSpace s;
  s.dimension = 1u << 10;
  return s;
}

}  // namespace

TEST_CASE("softmax is shift invariant and stable") {
  const auto p = softmax({1000.0, 1001.0});
  CHECK(p[0] + p[1] == doctest::Approx(1.0));
  CHECK(p[1] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
}

TEST_CASE("separable toy set reaches full training accuracy within 20 epochs") {
  const Dataset d = separable(20);
  ProbeConfig cfg;
  cfg.epochs = 20;
  cfg.learning_rate = 0.5;
  cfg.batch_size = 4;
  for (std::size_t h : {std::size_t{0}, std::size_t{4}}) {
    cfg.hidden_size = h;
    const auto r = train_probe(d, small_space(), cfg);
    const auto preds = predict(r.model, d);
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(preds[i].label == d[i].label);
  }
}

TEST_CASE("full-batch loss does not increase at a small learning rate") {
  const Dataset d = separable(16);
  ProbeConfig cfg;
  cfg.epochs = 30;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = d.size();
  for (std::size_t h : {std::size_t{0}, std::size_t{3}}) {
    cfg.hidden_size = h;
    const auto r = train_probe(d, small_space(), cfg);
    for (std::size_t e = 1; e < r.epoch_loss.size(); ++e) CHECK(r.epoch_loss[e] <= r.epoch_loss[e - 1]);
  }
}

TEST_CASE("training is deterministic per seed and sensitive to it") {
  Dataset d = separable(30);
  d.instances[3].text = "grr yay";
  ProbeConfig cfg;
  cfg.hidden_size = 3;
  cfg.seed = 7;
  const auto a = train_probe(d, small_space(), cfg).model;
  const auto b = train_probe(d, small_space(), cfg).model;
  CHECK(a.w1 == b.w1);
  CHECK(a.w2 == b.w2);
  cfg.seed = 8;
  CHECK(train_probe(d, small_space(), cfg).model.w1 != a.w1);
}

TEST_CASE("dynamics cover every instance and epoch") {
  const Dataset d = separable(10);
  ProbeConfig cfg;
  cfg.epochs = 3;
  cfg.record_dynamics = true;
  const auto r = train_probe(d, small_space(), cfg);
  REQUIRE(r.dynamics.has_value());
  CHECK(r.dynamics->size() == 30);
  for (const auto& rec : *r.dynamics) {
    CHECK(rec.prob_gold >= 0.0);
    CHECK(rec.prob_gold <= 1.0);
    CHECK((rec.correct == (rec.prob_gold > 0.5)));
  }
  CHECK(parse_dynamics_jsonl(dynamics_to_jsonl(*r.dynamics)).size() == 30);
}

TEST_CASE("single-class training data is rejected") {
  Dataset d = separable(4);
  for (auto& i : d.instances) i.label = Label::toxic;
  CHECK_THROWS_AS(train_probe(d, small_space(), ProbeConfig{}), DataError);
}

TEST_CASE("decision threshold") {
  CHECK(decide(0.5).label == Label::nontoxic);
  CHECK(decide(0.5000001).label == Label::toxic);
}

TEST_CASE("model files round trip exactly") {
  Dataset d = separable(12);
  ProbeConfig cfg;
  cfg.hidden_size = 2;
  const auto m = train_probe(d, small_space(), cfg).model;
  const auto path = std::filesystem::temp_directory_path() / "toxdebias_probe_rt.bin";
  save_probe(m, path);
  const auto back = load_probe(path);
  CHECK(back.w1 == m.w1);
  CHECK(back.b1 == m.b1);
  CHECK(back.w2 == m.w2);
  CHECK(back.b2 == m.b2);
  CHECK(back.featurizer.space == m.featurizer.space);
  const auto p1 = predict(m, d), p2 = predict(back, d);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(p1[i].prob_toxic == p2[i].prob_toxic);
  std::filesystem::remove(path);
}

TEST_CASE("non-finite parameters are refused") {
  ProbeModel m = ProbeModel::initialized(4, ProbeConfig{});
  m.b2[0] = std::nan("");
  FeatureVector x;
  x.dimension = 4;
  CHECK_THROWS_AS(forward(m, x), DataError);
}

TEST_CASE("probe gradient matches finite differences") {
  for (std::uint64_t s = 0; s < 30; ++s) {
    auto p = gradcheck::random_problem(1000 + s);
    CHECK(gradcheck::probe_error(p) < 1e-4);
  }
}

TEST_CASE("bias-only models") {
  Dataset d = separable(20);
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i].label == Label::toxic) d.instances[i].text = "f*ck that";
  }
  const Lexicon lex = default_lexicon();
  CHECK_THROWS_AS(bias_featurizer(BiasKind::oni_only, nullptr), DataError);
  const auto m = train_bias_only(d, BiasKind::oni_only, &lex, default_bias_only_config(1));
  const auto preds = predict(m, d);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(preds[i].label == d[i].label);
  CHECK_THROWS_AS(train_bias_only(d, BiasKind::dialect, nullptr, default_bias_only_config(1)),
                  DataError);
}

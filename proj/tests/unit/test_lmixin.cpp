#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "gradcheck.hpp"
#include "toxdebias/lmixin.hpp"

using namespace toxdebias;

TEST_CASE("softplus and sigmoid are stable at extremes") {
  CHECK(softplus(-800.0) >= 0.0);
  CHECK(softplus(800.0) == doctest::Approx(800.0));
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(sigmoid(-800.0) == 0.0);
  CHECK(sigmoid(800.0) == 1.0);
}

TEST_CASE("ensemble reduces to the full model for g = 0 or a uniform bias") {
  Rng rng(4);
  for (int t = 0; t < 1000; ++t) {
    const double a = rng.uniform(0.001, 0.999);
    const ClassProbs p{1.0 - a, a};
    const double b = rng.uniform(0.001, 0.999);
    const auto zero = ensemble_probs(p, {1.0 - b, b}, 0.0);
    CHECK(std::abs(zero[1] - p[1]) < 1e-12);
    const auto uniform = ensemble_probs(p, {0.5, 0.5}, rng.uniform(0.0, 10.0));
    CHECK(std::abs(uniform[1] - p[1]) < 1e-12);
  }
}

TEST_CASE("entropy penalty bounds") {
  CHECK(entropy_penalty({0.5, 0.5}, 3.0) == doctest::Approx(std::log(2.0)));
  CHECK(entropy_penalty({0.3, 0.7}, 0.0) == doctest::Approx(std::log(2.0)));
  CHECK(entropy_penalty({1e-12, 1.0}, 50.0) < 1e-6);
  const auto lb = clamped_log({0.0, 1.0});
  CHECK(lb[0] == kLogBiasFloor);
}

TEST_CASE("alpha = 0 with a uniform bias reproduces train_probe exactly") {
  auto p = gradcheck::random_problem(77);
  ProbeConfig cfg;
  cfg.hidden_size = 3;
  cfg.epochs = 4;
  cfg.batch_size = 2;
  cfg.seed = 5;
  std::vector<int> y = p.y;
  y[0] = 0;
  y[1] = 1;
  const std::vector<ClassProbs> uniform(y.size(), ClassProbs{0.5, 0.5});
  const auto lm = train_lmixin_core(p.x, y, uniform, 0.0, cfg);
  const auto plain = train_probe(p.x, y, cfg).model;
  CHECK(lm.full.w1 == plain.w1);
  CHECK(lm.full.b1 == plain.b1);
  CHECK(lm.full.w2 == plain.w2);
  CHECK(lm.full.b2 == plain.b2);
}

TEST_CASE("lmixin gradient matches finite differences") {
  for (std::uint64_t s = 0; s < 30; ++s) {
    auto p = gradcheck::random_problem(2000 + s);
    CHECK(gradcheck::lmixin_error(p) < 1e-4);
  }
}

TEST_CASE("lmixin model round trip and prediction modes") {
  Dataset d;
  for (int i = 0; i < 40; ++i) {
    Instance inst;
    inst.id = std::to_string(i);
    const bool toxic = i % 2 == 0;
    inst.text = toxic ? (i % 4 == 0 ? "f*ck you jerk" : "you jerk") : (i % 5 == 0 ? "f*ck yeah" : "nice day");
    inst.raw_label = toxic ? RawLabel::abusive : RawLabel::neither;
    inst.label = toxic ? Label::toxic : Label::nontoxic;
    d.instances.push_back(inst);
  }
  FeatureSpace space;
  space.dimension = 1u << 10;
  LMixinConfig cfg;
  cfg.bias_kind = BiasKind::oni_only;
  const Lexicon lex = default_lexicon();
  const auto m = train_lmixin(d, space, &lex, cfg);
  const auto path = std::filesystem::temp_directory_path() / "toxdebias_lmixin_rt.bin";
  save_lmixin(m, path);
  const auto back = load_lmixin(path);
  CHECK(back.gate == m.gate);
  const auto a = lmixin_predict(m, d, MixinMode::full_only);
  const auto b = lmixin_predict(back, d, MixinMode::full_only);
  const auto full = predict(m.full, d);
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(a[i].prob_toxic == b[i].prob_toxic);
    CHECK(a[i].prob_toxic == full[i].prob_toxic);
  }
  for (double g : gate_values(m, d)) CHECK(g >= 0.0);
  CHECK(lmixin_predict(m, d, MixinMode::joint).size() == d.size());
  std::filesystem::remove(path);
}

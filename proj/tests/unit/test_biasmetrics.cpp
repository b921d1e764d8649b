#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "toxdebias/biasmetrics.hpp"
#include "toxdebias/errors.hpp"
#include "toxdebias/rng.hpp"

using namespace toxdebias;

namespace {

Instance make(const std::string& id, const std::string& text, Label label, double aae,
              std::optional<AuthorGroup> group = std::nullopt) {
  Instance i;
  i.id = id;
  i.text = text;
  i.label = label;
  i.raw_label = label == Label::toxic ? RawLabel::abusive : RawLabel::neither;
  i.dialect = DialectProbs{{aae, 1.0 - aae, 0.0, 0.0}};
  i.author_group = group;
  return i;
}

}  // namespace

TEST_CASE("pearson known values and undefined cases") {
  CHECK(pearson_r({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
  CHECK(pearson_r({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(pearson_r({1, 0, 1, 0}, {1, 0, 0, 0}) == doctest::Approx(1.0 / std::sqrt(3.0)));
  CHECK_THROWS_AS(pearson_r({1, 1, 1}, {1, 2, 3}), UndefinedStatistic);
  CHECK_THROWS_AS(pearson_r({1}, {1}), UndefinedStatistic);
  CHECK_THROWS_AS(pearson_r({1, 2}, {1, 2, 3}), UndefinedStatistic);
}

TEST_CASE("metrics agree with the brute-force references") {
  Rng rng(17);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<int> p(n), g(n), m(n);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = static_cast<int>(rng.below(2));
      g[i] = static_cast<int>(rng.below(2));
      m[i] = static_cast<int>(rng.below(2));
      x[i] = rng.below(3) ? rng.uniform() : 0.0;
      y[i] = static_cast<double>(g[i]);
    }
    const auto ref = oracles::pearson(x, y);
    if (ref) {
      CHECK(std::abs(pearson_r(x, y) - *ref) < 1e-10);
    } else {
      CHECK_THROWS_AS(pearson_r(x, y), UndefinedStatistic);
    }
    const auto fr = oracles::fpr(p, g, m);
    if (fr) {
      CHECK(subset_fpr(p, g, m) == doctest::Approx(*fr).epsilon(1e-12));
    } else {
      CHECK_THROWS_AS(subset_fpr(p, g, m), UndefinedStatistic);
    }
    const auto cm = classification_metrics(p, g);
    const auto om = oracles::metrics(p, g);
    CHECK(std::abs(cm.accuracy - om.accuracy) < 1e-12);
    CHECK(std::abs(cm.f1_toxic - om.f1) < 1e-12);
  }
}

TEST_CASE("degenerate f1 is flagged") {
  const auto m = classification_metrics({0, 0}, {0, 0});
  CHECK(m.f1_toxic == 0.0);
  CHECK(m.f1_degenerate);
}

TEST_CASE("disparity arithmetic") {
  const auto d = disparity_from_rates(7.24, 12.61);
  CHECK(std::abs(d.delta - 5.37) < 0.005);
  CHECK(std::abs(*d.ratio - 1.74) < 0.01);
  CHECK_FALSE(disparity_from_rates(0.0, 0.3).ratio.has_value());
}

TEST_CASE("race disparity counts toxic predictions per group") {
  Dataset d;
  d.instances = {make("a", "", Label::nontoxic, 0.1, AuthorGroup::white),
                 make("b", "", Label::nontoxic, 0.1, AuthorGroup::white),
                 make("c", "", Label::nontoxic, 0.9, AuthorGroup::african_american),
                 make("d", "", Label::toxic, 0.9, AuthorGroup::african_american)};
  const auto r = race_disparity({1, 0, 1, 1}, d);
  CHECK(r.w_rate == 0.5);
  CHECK(r.aa_rate == 1.0);
  CHECK(r.delta == 0.5);
  CHECK(*r.ratio == 2.0);
  d.instances.resize(2);
  CHECK_THROWS_AS(race_disparity({1, 0}, d), UndefinedStatistic);
}

TEST_CASE("dialect fpr restricts to AAE-argmax negatives") {
  Dataset d;
  d.instances = {make("a", "", Label::nontoxic, 0.9), make("b", "", Label::nontoxic, 0.9),
                 make("c", "", Label::nontoxic, 0.1), make("d", "", Label::toxic, 0.9)};
  CHECK(dialect_fpr({1, 0, 1, 1}, d) == 0.5);
}

TEST_CASE("reports serialize with explicit nulls and round trip") {
  Dataset d;
  d.instances = {make("a", "gay", Label::nontoxic, 0.9), make("b", "f*ck", Label::toxic, 0.2),
                 make("c", "hello", Label::nontoxic, 0.1), make("d", "f*ck off", Label::toxic, 0.8)};
  const Lexicon lex = default_lexicon();
  const auto rep = dataset_association_report(d, lex);
  CHECK_FALSE(rep.r_category[1].has_value());
  CHECK(rep.r_category[2].has_value());
  CHECK(*rep.r_category[2] == doctest::Approx(1.0));
  const auto j = rep.to_json();
  CHECK(j.at("categories").at("OI").at("r").is_null());
  CHECK(BiasReport::from_json(j) == rep);

  std::vector<Prediction> preds = {decide(0.9), decide(0.8), decide(0.1), decide(0.7)};
  auto full = full_report(preds, d, lex);
  full.name = "x";
  CHECK(*full.accuracy == 0.75);
  CHECK(full.fpr_aae.has_value());
  CHECK(*full.fpr_aae == 1.0);
  CHECK_FALSE(full.disparity.has_value());
  CHECK(BiasReport::from_json(full.to_json()) == full);
  const auto md = render_markdown({full});
  CHECK(md.find("75.00") != std::string::npos);
  CHECK(md.find("100.00") != std::string::npos);
}

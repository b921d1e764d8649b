#include <set>

#include "doctest.h"
#include "toxdebias/errors.hpp"
#include "toxdebias/filters.hpp"
#include "toxdebias/rng.hpp"

using namespace toxdebias;

namespace {

// Toxic rows contain "bad"; half the rows of each class carry a noise word.
Dataset toy(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    Instance inst;
    inst.id = "r" + std::to_string(i);
    const bool toxic = rng.uniform() < 0.4;
    inst.label = toxic ? Label::toxic : Label::nontoxic;
    inst.raw_label = toxic ? RawLabel::abusive : RawLabel::neither;
    inst.text = "w" + std::to_string(rng.below(50)) + " w" + std::to_string(rng.below(50));
    if (toxic) inst.text += " bad";
    if (rng.below(3) == 0) inst.text += " maybe";
    d.instances.push_back(inst);
  }
  return d;
}

AFLiteConfig small_config() {
  AFLiteConfig c;
  c.ensemble_size = 12;
  c.min_out_of_sample_evals = 2;
  c.threshold = 0.7;
  c.removal_cap = 0.1;
  c.member.epochs = 3;
  c.member.learning_rate = 0.5;
  return c;
}

FeatureSpace small_space() {
  FeatureSpace s;
  s.dimension = 1u << 12;
  return s;
}

void check_target(const FilterManifest& m, const Dataset& d, double fraction) {
  check_partition(m, d);
  const auto quotas = class_quotas(d, fraction);
  const Dataset kept = apply_manifest(d, m);
  const auto counts = label_counts(kept);
  CHECK(counts[0] == quotas[0]);
  CHECK(counts[1] == quotas[1]);
}

}  // namespace

TEST_CASE("aflite partitions and hits the target per class") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Dataset d = toy(300, seed);
    auto c = small_config();
    c.seed = seed;
    const auto m = aflite_filter(d, small_space(), c);
    check_target(m, d, c.target_fraction);
    CHECK(m.method == "aflite");
  }
}

TEST_CASE("aflite without proportions hits the overall target") {
  const Dataset d = toy(200, 4);
  auto c = small_config();
  c.preserve_label_proportions = false;
  c.target_fraction = 0.5;
  const auto m = aflite_filter(d, small_space(), c);
  check_partition(m, d);
  CHECK(m.retained_ids.size() == 100);
}

TEST_CASE("aflite is deterministic and independent of the thread count") {
  const Dataset d = toy(240, 5);
  auto c = small_config();
  const auto a = aflite_filter(d, small_space(), c);
  c.jobs = 4;
  const auto b = aflite_filter(d, small_space(), c);
  CHECK(a.to_json() == b.to_json());
  c.jobs = 1;
  c.seed = 99;
  const auto other = aflite_filter(d, small_space(), c);
  CHECK(other.retained_ids != a.retained_ids);
}

TEST_CASE("predictability scores stay in range") {
  const Dataset d = toy(120, 6);
  const auto x = featurize_dataset(d, small_space());
  const auto y = labels_of(d);
  auto member = AFLiteConfig::default_member_config();
  member.learning_rate = 0.5;
  const auto s = predictability_scores(x, y, 10, 0.5, 2, 3, member, 2);
  REQUIRE(s.score.size() == d.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(s.score[i] >= 0.0);
    CHECK(s.score[i] <= 1.0);
    CHECK(s.correct[i] <= s.evaluations[i]);
    total += s.evaluations[i];
  }
  CHECK(total == 10 * (d.size() - d.size() / 2));
}

TEST_CASE("random filter stratifies and is seeded") {
  Rng rng(12);
  for (int t = 0; t < 50; ++t) {
    const Dataset d = toy(20 + rng.below(200), t);
    const double f = rng.uniform(0.05, 1.0);
    const auto m = random_filter(d, f, t);
    check_target(m, d, f);
    CHECK(random_filter(d, f, t).retained_ids == m.retained_ids);
  }
}

TEST_CASE("bad configurations are rejected") {
  const Dataset d = toy(50, 7);
  auto c = small_config();
  c.target_fraction = 0.0;
  CHECK_THROWS_AS(aflite_filter(d, small_space(), c), UsageError);
  c = small_config();
  c.train_fraction = 1.0;
  CHECK_THROWS_AS(aflite_filter(d, small_space(), c), UsageError);
}

TEST_CASE("manifest round trip and partition checks") {
  const Dataset d = toy(60, 8);
  const auto m = aflite_filter(d, small_space(), small_config());
  const auto back = FilterManifest::from_json(m.to_json());
  CHECK(back.to_json() == m.to_json());
  CHECK(back.retained_ids == m.retained_ids);

  FilterManifest broken = m;
  broken.retained_ids.push_back(broken.removed.front().id);
  CHECK_THROWS_AS(check_partition(broken, d), DataError);
  broken = m;
  broken.removed.pop_back();
  CHECK_THROWS_AS(check_partition(broken, d), DataError);
}

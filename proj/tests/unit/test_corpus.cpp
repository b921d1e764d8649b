#include <set>

#include "doctest.h"
#include "toxdebias/corpus.hpp"
#include "toxdebias/errors.hpp"
#include "toxdebias/rng.hpp"

using namespace toxdebias;

namespace {

Dataset labeled(std::size_t n_toxic, std::size_t n_nontoxic) {
  Dataset d;
  for (std::size_t i = 0; i < n_toxic + n_nontoxic; ++i) {
    Instance inst;
    inst.id = "i" + std::to_string(i);
    inst.text = "text " + std::to_string(i);
    const bool toxic = i < n_toxic;
    inst.raw_label = toxic ? RawLabel::abusive : RawLabel::neither;
    inst.label = toxic ? Label::toxic : Label::nontoxic;
    d.instances.push_back(inst);
  }
  return d;
}

}  // namespace

TEST_CASE("jsonl round trip keeps every field") {
  const std::string src =
      R"({"id":"a","text":"hi\tthere","raw_label":"hateful","label":"toxic","dialect":{"aae":0.7,"wae":0.2,"hispanic":0.05,"other":0.05},"author_group":"african_american"})"
      "\n"
      R"({"id":"b","text":"ok","raw_label":"neither","label":"nontoxic"})"
      "\n";
  const Dataset d = parse_jsonl(src);
  REQUIRE(d.size() == 2);
  CHECK(d[0].dialect.has_value());
  CHECK(d[0].author_group == AuthorGroup::african_american);
  CHECK_FALSE(d[1].dialect.has_value());
  CHECK(parse_jsonl(to_jsonl(d)) == d);
  CHECK(parse_tsv(to_tsv(d)) == d);
}

TEST_CASE("parse errors name the line") {
  const std::string src =
      R"({"id":"a","text":"x","raw_label":"neither","label":"nontoxic"})"
      "\n"
      R"({"id":"b","text":"y","raw_label":"neither","label":"toxic"})"
      "\n";
  try {
    parse_jsonl(src);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_jsonl(R"({"id":"a","text":"x","raw_label":"nope"})"), DataError);
  CHECK_THROWS_AS(parse_jsonl("{not json\n"), DataError);
}

TEST_CASE("duplicate ids and bad simplexes are rejected") {
  Dataset d = labeled(1, 1);
  d.instances[1].id = d.instances[0].id;
  CHECK_THROWS_AS(validate_dataset(d), DataError);
  DialectProbs p;
  p.p = {0.5, 0.5, 0.1, 0.0};
  CHECK_THROWS_AS(validate_simplex(p), DataError);
  p.p = {0.5, 0.5, 0.0, 0.0};
  CHECK_NOTHROW(validate_simplex(p));
}

TEST_CASE("aggregation folds labels and drops spam") {
  Dataset d;
  const RawLabel raws[] = {RawLabel::hateful, RawLabel::abusive, RawLabel::neither, RawLabel::spam,
                           RawLabel::unlabeled};
  int k = 0;
  for (RawLabel r : raws) {
    Instance inst;
    inst.id = "r" + std::to_string(k++);
    inst.raw_label = r;
    inst.label = r == RawLabel::unlabeled ? Label::nontoxic : Label::unlabeled;
    d.instances.push_back(inst);
  }
  const auto res = aggregate_labels(d);
  REQUIRE(res.dataset.size() == 4);
  CHECK(res.dataset[0].label == Label::toxic);
  CHECK(res.dataset[1].label == Label::toxic);
  CHECK(res.dataset[2].label == Label::nontoxic);
  CHECK(res.dataset[3].label == Label::nontoxic);
  CHECK(res.counts.spam_dropped == 1);
  CHECK(res.counts.hateful_to_toxic == 1);
  CHECK(res.counts.abusive_to_toxic == 1);
  CHECK(res.counts.unlabeled_kept == 1);
}

TEST_CASE("largest remainder quotas sum to the rounded total") {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::size_t> sizes(1 + rng.below(4));
    std::size_t total = 0;
    for (auto& s : sizes) total += (s = 1 + rng.below(200));
    const double f = rng.uniform(0.05, 1.0);
    const auto q = largest_remainder_quotas(sizes, f);
    std::size_t sum = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      CHECK(q[i] <= sizes[i]);
      CHECK(std::abs(static_cast<double>(q[i]) - f * static_cast<double>(sizes[i])) < 1.0);
      sum += q[i];
    }
    CHECK(sum == static_cast<std::size_t>(std::llround(f * static_cast<double>(total))));
  }
}

TEST_CASE("stratified sampling preserves class proportions") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t t = 2 + rng.below(100), n = 2 + rng.below(100);
    const Dataset d = labeled(t, n);
    const double f = rng.uniform(0.2, 0.9);
    const SamplingSpec spec{f, true, rng.next()};
    const auto idx = stratified_sample_indices(d, spec);
    CHECK(std::is_sorted(idx.begin(), idx.end()));
    CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == idx.size());
    const auto quotas = class_quotas(d, f);
    std::size_t toxic = 0;
    for (auto i : idx) toxic += d[i].label == Label::toxic ? 1 : 0;
    CHECK(toxic == quotas[1]);
    CHECK(idx.size() - toxic == quotas[0]);
    CHECK(stratified_sample_indices(d, spec) == idx);
  }
  const Dataset d = labeled(3, 4);
  CHECK(stratified_sample(d, {1.0, true, 9}) == d);
}

TEST_CASE("a class quota of zero is an error naming the class") {
  const Dataset d = labeled(1, 50);
  try {
    class_quotas(d, 0.2);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("toxic") != std::string::npos);
  }
}

TEST_CASE("dialect argmax breaks ties in declaration order") {
  Instance inst;
  inst.id = "x";
  inst.dialect = DialectProbs{{0.4, 0.4, 0.1, 0.1}};
  CHECK(argmax_dialect(inst) == Dialect::aae);
  inst.dialect = DialectProbs{{0.1, 0.4, 0.4, 0.1}};
  CHECK(argmax_dialect(inst) == Dialect::wae);
  inst.dialect.reset();
  CHECK_THROWS_AS(argmax_dialect(inst), DataError);
}

TEST_CASE("label encoding") {
  Instance inst;
  inst.label = Label::toxic;
  CHECK(label_value(inst) == 1);
  inst.label = Label::nontoxic;
  CHECK(label_value(inst) == 0);
  inst.label = Label::unlabeled;
  CHECK_THROWS_AS(label_value(inst), DataError);
}

#include <algorithm>
#include <set>

#include "doctest.h"
#include "toxdebias/cartography.hpp"
#include "toxdebias/errors.hpp"
#include "toxdebias/rng.hpp"

using namespace toxdebias;

namespace {

DynamicsLog log_of(const std::string& id, const std::vector<double>& probs) {
  DynamicsLog log;
  for (std::size_t e = 0; e < probs.size(); ++e) {
    log.push_back({id, static_cast<int>(e + 1), probs[e], probs[e] > 0.5});
  }
  return log;
}

Dataset ids(std::size_t n, std::size_t n_toxic) {
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    Instance inst;
    inst.id = "i" + std::to_string(i);
    inst.label = i < n_toxic ? Label::toxic : Label::nontoxic;
    d.instances.push_back(inst);
  }
  return d;
}

std::vector<MapCoordinates> coords(const std::vector<double>& conf, const std::vector<double>& var) {
  std::vector<MapCoordinates> out;
  for (std::size_t i = 0; i < conf.size(); ++i) out.push_back({"i" + std::to_string(i), conf[i], var[i], 0.0});
  return out;
}

}  // namespace

TEST_CASE("coordinate values") {
  auto c = compute_coordinates(log_of("a", {0.9, 0.9, 0.9}));
  CHECK(c[0].confidence == 0.9);
  CHECK(c[0].variability == 0.0);
  c = compute_coordinates(log_of("a", {0.2, 0.8, 0.2, 0.8}));
  CHECK(c[0].confidence == 0.5);
  CHECK(c[0].variability == 0.3);
  c = compute_coordinates(log_of("a", {1.0, 1.0}));
  CHECK(c[0].correctness == 1.0);
}

TEST_CASE("coordinates ignore epoch order") {
  Rng rng(8);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> p(2 + rng.below(8));
    for (auto& v : p) v = rng.uniform();
    const auto a = compute_coordinates(log_of("x", p));
    rng.shuffle(std::span(p));
    const auto b = compute_coordinates(log_of("x", p));
    CHECK(a[0].confidence == b[0].confidence);
    CHECK(a[0].variability == b[0].variability);
    CHECK(a[0].variability <= 0.5);
  }
}

TEST_CASE("missing or single epochs are errors") {
  auto log = log_of("a", {0.1, 0.2, 0.3});
  auto other = log_of("b", {0.1, 0.2});
  log.insert(log.end(), other.begin(), other.end());
  CHECK_THROWS_AS(compute_coordinates(log), DataError);
  CHECK_THROWS_AS(compute_coordinates(log_of("a", {0.5})), DataError);
}

TEST_CASE("region examples") {
  const Dataset d = ids(3, 0);
  auto m = select_region(coords({0.1, 0.5, 0.9}, {0, 0, 0}), d, Region::hard, 1.0 / 3.0, false, 0);
  CHECK(m.retained_ids == std::vector<std::string>{"i0"});
  const Dataset d2 = ids(2, 0);
  m = select_region(coords({0.5, 0.5}, {0.0, 0.3}), d2, Region::ambiguous, 0.5, false, 0);
  CHECK(m.retained_ids == std::vector<std::string>{"i1"});
  m = select_region(coords({0.9, 0.9}, {0.2, 0.1}), d2, Region::easy, 0.5, false, 0);
  CHECK(m.retained_ids == std::vector<std::string>{"i1"});
}

TEST_CASE("hard and easy are disjoint under a strict confidence order") {
  Rng rng(21);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 30 + rng.below(60);
    const Dataset d = ids(n, n / 3);
    std::vector<double> conf(n), var(n);
    for (std::size_t i = 0; i < n; ++i) {
      conf[i] = (static_cast<double>(i) + rng.uniform(0.0, 0.5)) / static_cast<double>(n);
      var[i] = rng.uniform(0.0, 0.5);
    }
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(std::span(perm));
    std::vector<double> c2(n), v2(n);
    for (std::size_t i = 0; i < n; ++i) {
      c2[i] = conf[perm[i]];
      v2[i] = var[perm[i]];
    }
    const auto cs = coords(c2, v2);
    const double f = rng.uniform(0.2, 0.5);
    const auto hard = select_region(cs, d, Region::hard, f, true, t);
    const auto easy = select_region(cs, d, Region::easy, f, true, t);
    check_partition(hard, d);
    const std::set<std::string> h(hard.retained_ids.begin(), hard.retained_ids.end());
    for (const auto& id : easy.retained_ids) CHECK_FALSE(h.contains(id));
    CHECK(hard.retained_ids.size() == easy.retained_ids.size());
  }
}

TEST_CASE("ties break by seed, deterministically") {
  const Dataset d = ids(40, 0);
  const auto cs = coords(std::vector<double>(40, 0.5), std::vector<double>(40, 0.1));
  const auto a = select_region(cs, d, Region::hard, 0.25, false, 1);
  CHECK(select_region(cs, d, Region::hard, 0.25, false, 1).retained_ids == a.retained_ids);
  CHECK(select_region(cs, d, Region::hard, 0.25, false, 2).retained_ids != a.retained_ids);
}

TEST_CASE("coordinate files round trip") {
  const auto cs = coords({0.1, 1.0 / 3.0}, {0.0, 0.123456789});
  const auto back = parse_coordinates_tsv(coordinates_to_tsv(cs));
  REQUIRE(back.size() == 2);
  CHECK(back[1].confidence == cs[1].confidence);
  CHECK(back[1].variability == cs[1].variability);
  CHECK_THROWS_AS(parse_coordinates_tsv("nope\n"), DataError);
}

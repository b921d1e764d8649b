#include <atomic>
#include <filesystem>

#include "doctest.h"
#include "toxdebias/relabel.hpp"
#include "toxdebias/text_io.hpp"

using namespace toxdebias;

namespace {

Instance make(const std::string& id, const std::string& text, Label label, double aae) {
  Instance i;
  i.id = id;
  i.text = text;
  i.label = label;
  i.raw_label = label == Label::toxic ? RawLabel::abusive : RawLabel::neither;
  i.dialect = DialectProbs{{aae, 1.0 - aae, 0.0, 0.0}};
  return i;
}

// Predicts the same label for every input.
ProbeModel constant_model(Label label) {
  FeatureSpace s;
  s.dimension = 1u << 8;
  ProbeConfig c;
  ProbeModel m = ProbeModel::initialized(s.dimension, c);
  m.featurizer = Featurizer::hashed(s);
  m.b2 = label == Label::toxic ? std::vector<double>{0.0, 1.0} : std::vector<double>{1.0, 0.0};
  return m;
}

class FlakyClient : public TranslationClient {
 public:
  explicit FlakyClient(int failures) : failures_(failures) {}
  std::string_view backend() const override { return "flaky"; }
  std::string translate(const std::string& id, const std::string& text) override {
    ++calls;
    if (failures_-- > 0) throw RemoteError("temporary failure for " + id);
    return "t:" + text;
  }
  std::atomic<int> calls{0};

 private:
  std::atomic<int> failures_;
};

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("toxdebias_relabel_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("prompt bytes") {
  const std::string expected =
      "AAE: Get your triflin\xE2\x80\x99 ass out of here.\nWAE: Get your trifling self out of here.\n\n"
      "AAE: I saw his ass yesterday.\nWAE: I saw him yesterday.\n\n"
      "AAE: His ass is gonna get fried.\nWAE: He is gonna get fried\n\n"
      "AAE: Wassup, nigga?\nWAE: What's up bro?\n\n"
      "AAE: hello\nWAE:";
  CHECK(build_prompt("hello") == expected);
  const auto p = build_prompt("hello");
  CHECK(p.substr(p.size() - 15) == "AAE: hello\nWAE:");
}

TEST_CASE("completions keep the first trimmed line") {
  CHECK(clean_completion("  what up bro \nAAE: more") == "what up bro");
  CHECK(clean_completion("\n\n") == "");
}

TEST_CASE("relabel rules") {
  Dataset d;
  d.instances = {make("a", "x", Label::toxic, 0.9), make("b", "y", Label::toxic, 0.1),
                 make("c", "z", Label::nontoxic, 0.9)};
  const TranslationTable t = {{"a", "xx"}, {"c", "zz"}};
  const auto tox = constant_model(Label::toxic);
  const auto non = constant_model(Label::nontoxic);

  auto r = relabel_dataset(d, t, tox, tox);
  CHECK(r.dataset.instances[0].label == Label::toxic);
  REQUIRE(r.decisions.size() == 1);
  CHECK_FALSE(r.decisions[0].changed);

  for (auto [mv, mt] : {std::pair{&non, &tox}, std::pair{&tox, &non}, std::pair{&non, &non}}) {
    r = relabel_dataset(d, t, *mv, *mt);
    CHECK(r.dataset.instances[0].label == Label::nontoxic);
    CHECK(r.decisions[0].changed);
    CHECK(r.decisions[0].translation == "xx");
    CHECK(r.dataset.instances[0].raw_label == RawLabel::unlabeled);
    CHECK(r.dataset.instances[1] == d.instances[1]);
    CHECK(r.dataset.instances[2] == d.instances[2]);
  }
  CHECK(r.dataset.provenance == "relabeled");
  CHECK(decisions_to_jsonl(r.decisions).find("\"new_label\":\"nontoxic\"") != std::string::npos);
}

TEST_CASE("missing translations are errors") {
  Dataset d;
  d.instances = {make("a", "x", Label::toxic, 0.9)};
  const auto tox = constant_model(Label::toxic);
  CHECK_THROWS_AS(relabel_dataset(d, {}, tox, tox), MissingTranslation);
  CHECK_THROWS_AS(build_translated_training_corpus(d, {}), MissingTranslation);
  FileLookupClient client({});
  const auto res = translate_corpus(d, client);
  REQUIRE(res.failures.size() == 1);
  CHECK(res.failures[0].attempts == 1);
}

TEST_CASE("identity translations keep the corpus") {
  Dataset d;
  d.instances = {make("a", "finna go", Label::toxic, 0.9), make("b", "going", Label::nontoxic, 0.1)};
  IdentityMockClient client;
  const auto res = translate_corpus(d, client);
  CHECK(res.failures.empty());
  CHECK(res.translations.at("a") == "finna go");
  CHECK(build_translated_training_corpus(d, res.translations) == d);
  const auto only = build_translated_training_corpus(d, res.translations, true);
  REQUIRE(only.size() == 1);
  CHECK(only[0].id == "a");
}

TEST_CASE("retries and failures") {
  Dataset d;
  d.instances = {make("a", "x", Label::toxic, 0.9)};
  FlakyClient ok(2);
  auto res = translate_corpus(d, ok);
  CHECK(res.translations.at("a") == "t:x");
  CHECK(ok.calls == 3);
  FlakyClient bad(10);
  TranslateOptions opt;
  opt.retries = 1;
  res = translate_corpus(d, bad, is_aae_assigned, opt);
  CHECK(res.translations.empty());
  REQUIRE(res.failures.size() == 1);
  CHECK(res.failures[0].attempts == 2);
}

TEST_CASE("cache avoids repeat requests and parallel results match") {
  Dataset d;
  for (int i = 0; i < 30; ++i) d.instances.push_back(make("i" + std::to_string(i), "t" + std::to_string(i), Label::toxic, 0.8));
  const auto dir = temp_dir("cache");
  TranslateOptions opt;
  opt.cache = dir / "cache.tsv";
  opt.max_in_flight = 4;
  FlakyClient first(0);
  const auto a = translate_corpus(d, first, is_aae_assigned, opt);
  CHECK(first.calls == 30);
  FlakyClient second(0);
  const auto b = translate_corpus(d, second, is_aae_assigned, opt);
  CHECK(second.calls == 0);
  CHECK(b.from_cache == 30);
  CHECK(a.translations == b.translations);
  std::filesystem::remove_all(dir);
}

TEST_CASE("translation files") {
  const TranslationTable t = {{"a", "tab\there"}, {"b", "line\nbreak"}};
  CHECK(parse_translations_tsv(translations_to_tsv(t, {"b", "a"})) == t);
  CHECK_THROWS_AS(parse_translations_tsv("a\tx\na\ty\n"), DataError);
  CHECK_THROWS_AS(parse_translations_tsv("just-one-field\n"), DataError);
}

TEST_CASE("remote backend needs acknowledgement") {
  RemoteConfig c;
  c.endpoint = "http://127.0.0.1:9/v1/completions";
  c.api_key = "secret";
  CHECK_THROWS_AS(RemoteCompletionClient(c, false), UsageError);
  CHECK(c.to_json().dump().find("secret") == std::string::npos);
}

TEST_CASE("remote failures surface as RemoteError") {
  RemoteConfig c;
  c.endpoint = "http://127.0.0.1:9/v1/completions";
  c.timeout_seconds = 0.5;
  RemoteCompletionClient client(c, true);
  CHECK_THROWS_AS(client.translate("a", "x"), RemoteError);
}

#include "doctest.h"
#include "toxdebias/errors.hpp"
#include "toxdebias/lexicon.hpp"

using namespace toxdebias;

namespace {

Lexicon lex(const std::string& rows) { return parse_lexicon_csv("pattern,category\n" + rows); }

}  // namespace

TEST_CASE("literal matching is case-insensitive and word-bounded") {
  const Lexicon l = lex("ass,OnI\n");
  CHECK(l.match("You ASS!").size() == 1);
  CHECK(l.match("an assassin passes").empty());
  CHECK(l.match("ass ass, ass.").size() == 3);
  CHECK(l.match("").empty());
}

TEST_CASE("asterisks are word characters") {
  const Lexicon l = lex("f*ck,OnI\nsh*t,OnI\n");
  CHECK(l.match("what the F*CK").size() == 1);
  CHECK(l.match("f*cking").empty());
  CHECK(l.match("*f*ck").empty());
  CHECK(l.entry_counts("f*ck sh*t f*ck") == std::vector<std::size_t>{2, 1});
}

TEST_CASE("multi-word phrases and non-ASCII neighbours") {
  const Lexicon l = lex("\"go back\",OI\n");
  CHECK(l.match("just GO BACK now").size() == 1);
  CHECK(l.match("go backwards").empty());
  const Lexicon g = lex("gay,nOI\n");
  CHECK(g.match("gay\xc3\xa9").empty());
}

TEST_CASE("regex entries") {
  const Lexicon l = lex("/musl[ie]ms?/,nOI\n");
  CHECK(l.match("Muslims and a muslim").size() == 2);
  CHECK(l.match("muslimsx").empty());
  CHECK_THROWS_AS(lex("/([a-/,nOI\n"), DataError);
}

TEST_CASE("csv validation") {
  CHECK_THROWS_AS(parse_lexicon_csv("word,category\nx,OnI\n"), DataError);
  CHECK_THROWS_AS(lex("x,Slur\n"), DataError);
  CHECK_THROWS_AS(lex("x,OnI\nx,OI\n"), DataError);
  const Lexicon l = lex("# comment\nx,oni\nx,OnI\ny,noi\n");
  CHECK(l.size() == 2);
  CHECK(parse_lexicon_csv(to_lexicon_csv(l)).size() == 2);
}

TEST_CASE("categorize counts per category") {
  const Lexicon l = default_lexicon();
  const auto hits = categorize("gay muslim f*ck queer sh*t f*ck", l);
  CHECK(hits[Category::nOI] == 2);
  CHECK(hits[Category::OI] == 1);
  CHECK(hits[Category::OnI] == 3);
  CHECK(hits.total() == 6);
  CHECK(hits.matched_terms[2].size() == 3);
}

TEST_CASE("presence matrix marks at least one hit") {
  Dataset d;
  for (const char* t : {"gay", "nothing here", "F*ck queer"}) {
    Instance i;
    i.id = t;
    i.text = t;
    d.instances.push_back(i);
  }
  const auto p = presence_matrix(d, default_lexicon());
  CHECK(p[0] == std::vector<int>{1, 0, 0});
  CHECK(p[1] == std::vector<int>{0, 0, 1});
  CHECK(p[2] == std::vector<int>{0, 0, 1});
}

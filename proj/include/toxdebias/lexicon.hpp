#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "toxdebias/corpus.hpp"

namespace toxdebias {

// ToxTrig categories: non-offensive identity mentions, possibly offensive
// identity mentions, possibly offensive non-identity mentions.
enum class Category { nOI = 0, OI = 1, OnI = 2 };
inline constexpr std::array<Category, 3> kCategories = {Category::nOI, Category::OI,
                                                        Category::OnI};

std::string_view to_string(Category c);
// Accepts "nOI"/"OI"/"OnI" in any letter case.
std::optional<Category> parse_category(std::string_view s);

// A lexicon pattern is either a literal word or phrase ('*' is an ordinary
// character, so censored forms such as "f*ck" match themselves), or an
// ECMAScript regular expression written between slashes ("/musl[ie]ms?/").
// Matching is ASCII case-insensitive and anchored at word boundaries: the
// characters on either side of a match must not be word characters, where a
// word character is an ASCII letter or digit, '*', or any non-ASCII byte.
struct LexiconEntry {
  std::string pattern;
  Category category = Category::OnI;
  std::size_t source_row = 0;

  bool is_regex() const { return pattern.size() >= 2 && pattern.front() == '/' && pattern.back() == '/'; }
};

bool is_word_char(unsigned char c);

struct LexiconMatch {
  std::size_t entry = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct CategoryHits {
  std::array<std::size_t, 3> counts{};
  std::array<std::vector<std::string>, 3> matched_terms;

  std::size_t operator[](Category c) const { return counts[static_cast<int>(c)]; }
  std::size_t total() const { return counts[0] + counts[1] + counts[2]; }
};

class Lexicon {
 public:
  Lexicon() = default;
  // Compiles every entry. Throws DataError naming the source row of a pattern
  // that does not compile, or of a pattern listed under two categories.
  // Repeats within one category are dropped.
  explicit Lexicon(std::vector<LexiconEntry> entries);

  const std::vector<LexiconEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // Every boundary-anchored occurrence of every entry. Occurrences of one
  // entry do not overlap each other; occurrences of different entries may.
  // Sorted by entry, then position.
  std::vector<LexiconMatch> match(std::string_view text) const;

  // Occurrence count per entry, aligned with entries().
  std::vector<std::size_t> entry_counts(std::string_view text) const;

 private:
  std::vector<LexiconEntry> entries_;
  std::vector<std::string> literals_;  // lowercased; empty for regex entries
  std::vector<std::shared_ptr<const std::regex>> regexes_;
};

// CSV with header "pattern,category"; '#' starts a comment line; fields may be
// double-quoted.
Lexicon parse_lexicon_csv(std::string_view content);
Lexicon load_lexicon(const std::filesystem::path& path);
std::string to_lexicon_csv(const Lexicon& lexicon);

// Placeholder list built from the example terms used to introduce each
// category. The full released list should be supplied as a CSV.
Lexicon default_lexicon();

CategoryHits categorize(std::string_view text, const Lexicon& lexicon);

// presence[c][i] == 1 iff instance i has at least one hit in category c.
using PresenceMatrix = std::array<std::vector<int>, 3>;
PresenceMatrix presence_matrix(const Dataset& dataset, const Lexicon& lexicon);

}  // namespace toxdebias

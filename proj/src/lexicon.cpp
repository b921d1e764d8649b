#include "toxdebias/lexicon.hpp"

#include <algorithm>
#include <map>

#include "toxdebias/errors.hpp"
#include "toxdebias/text_io.hpp"

namespace toxdebias {

namespace {

bool boundary_before(std::string_view text, std::size_t pos) {
  return pos == 0 || !is_word_char(static_cast<unsigned char>(text[pos - 1]));
}

bool boundary_after(std::string_view text, std::size_t pos) {
  return pos >= text.size() || !is_word_char(static_cast<unsigned char>(text[pos]));
}

std::vector<std::string> parse_csv_row(std::string_view row, std::size_t line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < row.size(); ++i) {
    const char c = row[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < row.size() && row[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty() && !was_quoted) {
      quoted = was_quoted = true;
    } else if (c == ',') {
      fields.push_back(was_quoted ? cur : std::string(trim(cur)));
      cur.clear();
      was_quoted = false;
    } else {
      cur += c;
    }
  }
  if (quoted) throw DataError("lexicon row " + std::to_string(line) + ": unterminated quote");
  fields.push_back(was_quoted ? cur : std::string(trim(cur)));
  return fields;
}

}  // namespace

std::string_view to_string(Category c) {
  switch (c) {
    case Category::nOI: return "nOI";
    case Category::OI: return "OI";
    case Category::OnI: return "OnI";
  }
  return "OnI";
}

std::optional<Category> parse_category(std::string_view s) {
  const std::string lower = ascii_lower(s);
  if (lower == "noi") return Category::nOI;
  if (lower == "oi") return Category::OI;
  if (lower == "oni") return Category::OnI;
  return std::nullopt;
}

bool is_word_char(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c == '*' || c >= 0x80;
}

Lexicon::Lexicon(std::vector<LexiconEntry> entries) {
  std::map<std::string, Category> seen;
  for (auto& e : entries) {
    const std::string row = "lexicon row " + std::to_string(e.source_row);
    const std::string key = e.is_regex() ? e.pattern : ascii_lower(trim(e.pattern));
    if (key.empty()) throw DataError(row + ": empty pattern");
    if (auto it = seen.find(key); it != seen.end()) {
      if (it->second != e.category) {
        throw DataError(row + ": pattern '" + e.pattern + "' already listed under " +
                        std::string(to_string(it->second)));
      }
      continue;
    }
    seen.emplace(key, e.category);
    if (e.is_regex()) {
      const std::string body = e.pattern.substr(1, e.pattern.size() - 2);
      if (body.empty()) throw DataError(row + ": empty regular expression");
      try {
        regexes_.push_back(std::make_shared<const std::regex>(
            body, std::regex::ECMAScript | std::regex::icase | std::regex::optimize));
      } catch (const std::regex_error& err) {
        throw DataError(row + ": pattern '" + e.pattern + "' does not compile: " + err.what());
      }
      literals_.emplace_back();
    } else {
      regexes_.push_back(nullptr);
      literals_.push_back(key);
    }
    entries_.push_back(std::move(e));
  }
}

std::vector<LexiconMatch> Lexicon::match(std::string_view text) const {
  std::vector<LexiconMatch> out;
  const std::string lower = ascii_lower(text);
  for (std::size_t e = 0; e < entries_.size(); ++e) {
    if (!regexes_[e]) {
      const std::string& lit = literals_[e];
      std::size_t pos = 0;
      while ((pos = lower.find(lit, pos)) != std::string::npos) {
        const std::size_t end = pos + lit.size();
        if (boundary_before(lower, pos) && boundary_after(lower, end)) {
          out.push_back({e, pos, end});
          pos = end;
        } else {
          ++pos;
        }
      }
      continue;
    }
    auto begin = std::cregex_iterator(text.data(), text.data() + text.size(), *regexes_[e]);
    for (auto it = begin; it != std::cregex_iterator(); ++it) {
      const auto pos = static_cast<std::size_t>(it->position(0));
      const auto end = pos + static_cast<std::size_t>(it->length(0));
      if (end > pos && boundary_before(text, pos) && boundary_after(text, end)) {
        out.push_back({e, pos, end});
      }
    }
  }
  return out;
}

std::vector<std::size_t> Lexicon::entry_counts(std::string_view text) const {
  std::vector<std::size_t> counts(entries_.size(), 0);
  for (const auto& m : match(text)) ++counts[m.entry];
  return counts;
}

Lexicon parse_lexicon_csv(std::string_view content) {
  std::vector<LexiconEntry> entries;
  bool header_seen = false;
  std::size_t line = 0;
  for (std::string_view raw : split_lines(content)) {
    ++line;
    const std::string_view row = trim(raw);
    if (row.empty() || row.front() == '#') continue;
    auto fields = parse_csv_row(row, line);
    if (!header_seen) {
      header_seen = true;
      if (fields.size() >= 2 && ascii_lower(fields[0]) == "pattern" &&
          ascii_lower(fields[1]) == "category") {
        continue;
      }
      throw DataError("lexicon row " + std::to_string(line) +
                      ": expected header 'pattern,category'");
    }
    if (fields.size() != 2) {
      throw DataError("lexicon row " + std::to_string(line) + ": expected 2 fields, got " +
                      std::to_string(fields.size()));
    }
    auto cat = parse_category(fields[1]);
    if (!cat) {
      throw DataError("lexicon row " + std::to_string(line) + ": unknown category '" +
                      fields[1] + "'");
    }
    entries.push_back({fields[0], *cat, line});
  }
  return Lexicon(std::move(entries));
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  try {
    return parse_lexicon_csv(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string to_lexicon_csv(const Lexicon& lexicon) {
  std::string out = "pattern,category\n";
  for (const auto& e : lexicon.entries()) {
    const bool needs_quotes = e.pattern.find_first_of(",\"") != std::string::npos ||
                              trim(e.pattern).size() != e.pattern.size();
    if (needs_quotes) {
      out += '"';
      for (char c : e.pattern) {
        if (c == '"') out += '"';
        out += c;
      }
      out += '"';
    } else {
      out += e.pattern;
    }
    out += ',';
    out += to_string(e.category);
    out += '\n';
  }
  return out;
}

Lexicon default_lexicon() {
  return parse_lexicon_csv(
      "pattern,category\n"
      "gay,nOI\n"
      "female,nOI\n"
      "muslim,nOI\n"
      "queer,OI\n"
      "n*gga,OI\n"
      "f*ck,OnI\n"
      "sh*t,OnI\n");
}

CategoryHits categorize(std::string_view text, const Lexicon& lexicon) {
  CategoryHits hits;
  for (const auto& m : lexicon.match(text)) {
    const int c = static_cast<int>(lexicon.entries()[m.entry].category);
    ++hits.counts[c];
    hits.matched_terms[c].emplace_back(text.substr(m.begin, m.end - m.begin));
  }
  return hits;
}

PresenceMatrix presence_matrix(const Dataset& dataset, const Lexicon& lexicon) {
  PresenceMatrix presence;
  for (auto& v : presence) v.resize(dataset.size(), 0);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto hits = categorize(dataset[i].text, lexicon);
    for (int c = 0; c < 3; ++c) presence[c][i] = hits.counts[c] > 0 ? 1 : 0;
  }
  return presence;
}

}  // namespace toxdebias

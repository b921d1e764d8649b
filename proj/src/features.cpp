#include "toxdebias/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "toxdebias/errors.hpp"
#include "toxdebias/rng.hpp"
#include "toxdebias/text_io.hpp"

namespace toxdebias {

namespace {

bool is_token_char(unsigned char c, bool keep_asterisk) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c >= 0x80 || (keep_asterisk && c == '*');
}

FeatureVector from_map(std::uint32_t dimension, const std::map<std::uint32_t, double>& m) {
  FeatureVector v;
  v.dimension = dimension;
  v.entries.reserve(m.size());
  for (const auto& [idx, val] : m) {
    if (val != 0.0) v.entries.push_back({idx, val});
  }
  return v;
}

}  // namespace

double FeatureVector::norm() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.value * e.value;
  return std::sqrt(s);
}

double FeatureVector::dot(const std::vector<double>& dense) const {
  double s = 0.0;
  for (const auto& e : entries) s += e.value * dense[e.index];
  return s;
}

FeatureMatrix FeatureMatrix::select(const std::vector<std::size_t>& indices) const {
  FeatureMatrix out;
  out.dimension = dimension;
  out.rows.reserve(indices.size());
  for (std::size_t i : indices) out.rows.push_back(rows.at(i));
  return out;
}

void FeatureSpace::validate() const {
  if (dimension < 2 || (dimension & (dimension - 1)) != 0) {
    throw UsageError("feature dimension must be a power of two >= 2, got " +
                     std::to_string(dimension));
  }
  if (ngram_orders.empty()) throw UsageError("at least one n-gram order is required");
  for (int n : ngram_orders) {
    if (n < 1) throw UsageError("n-gram orders must be positive");
  }
}

nlohmann::json FeatureSpace::to_json() const {
  return {{"dimension", dimension},
          {"ngram_orders", std::vector<int>(ngram_orders.begin(), ngram_orders.end())},
          {"hash_seed", hash_seed},
          {"l2_normalize", l2_normalize},
          {"keep_asterisk", keep_asterisk}};
}

FeatureSpace FeatureSpace::from_json(const nlohmann::json& j) {
  FeatureSpace s;
  s.dimension = j.at("dimension").get<std::uint32_t>();
  auto orders = j.at("ngram_orders").get<std::vector<int>>();
  s.ngram_orders = std::set<int>(orders.begin(), orders.end());
  s.hash_seed = j.at("hash_seed").get<std::uint64_t>();
  s.l2_normalize = j.at("l2_normalize").get<bool>();
  s.keep_asterisk = j.value("keep_asterisk", true);
  s.validate();
  return s;
}

std::uint64_t hash_ngram(std::string_view ngram, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ mix64(seed);
  for (unsigned char b : ngram) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return mix64(h);
}

std::vector<std::string> tokenize(std::string_view text, bool keep_asterisk) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (is_token_char(c, keep_asterisk)) {
      cur += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

FeatureVector featurize(std::string_view text, const FeatureSpace& space) {
  const auto tokens = tokenize(text, space.keep_asterisk);
  const std::uint64_t mask = space.dimension - 1;
  std::map<std::uint32_t, double> acc;
  std::string gram;
  for (int n : space.ngram_orders) {
    const auto order = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
      gram = tokens[i];
      for (std::size_t k = 1; k < order; ++k) {
        gram += ' ';
        gram += tokens[i + k];
      }
      acc[static_cast<std::uint32_t>(hash_ngram(gram, space.hash_seed) & mask)] += 1.0;
    }
  }
  FeatureVector v = from_map(space.dimension, acc);
  if (space.l2_normalize) {
    const double norm = v.norm();
    if (norm > 0.0) {
      for (auto& e : v.entries) e.value /= norm;
    }
  }
  return v;
}

FeatureMatrix featurize_dataset(const Dataset& dataset, const FeatureSpace& space) {
  space.validate();
  FeatureMatrix m;
  m.dimension = space.dimension;
  m.rows.reserve(dataset.size());
  for (const auto& inst : dataset.instances) m.rows.push_back(featurize(inst.text, space));
  return m;
}

FeatureVector toxtrig_features(std::string_view text, const Lexicon& lexicon,
                               const std::set<Category>& categories) {
  const auto n = static_cast<std::uint32_t>(lexicon.size());
  std::map<std::uint32_t, double> acc;
  const auto counts = lexicon.entry_counts(text);
  for (std::uint32_t e = 0; e < n; ++e) {
    const Category c = lexicon.entries()[e].category;
    if (counts[e] == 0 || !categories.contains(c)) continue;
    acc[e] += static_cast<double>(counts[e]);
    acc[n + static_cast<std::uint32_t>(c)] += static_cast<double>(counts[e]);
  }
  return from_map(toxtrig_dimension(lexicon), acc);
}

FeatureVector dialect_features(const Instance& instance) {
  if (!instance.dialect) {
    throw DataError("instance '" + instance.id + "' has no dialect probabilities");
  }
  FeatureVector v;
  v.dimension = 4;
  for (std::uint32_t d = 0; d < 4; ++d) v.entries.push_back({d, instance.dialect->p[d]});
  return v;
}

FeatureVector dense_vector(const std::vector<double>& values) {
  FeatureVector v;
  v.dimension = static_cast<std::uint32_t>(values.size());
  for (std::uint32_t i = 0; i < values.size(); ++i) {
    if (values[i] != 0.0) v.entries.push_back({i, values[i]});
  }
  return v;
}

EmbeddingTable parse_embeddings(std::string_view content) {
  EmbeddingTable table;
  std::size_t line = 0;
  std::size_t dim = 0;
  for (std::string_view row : split_lines(content)) {
    ++line;
    if (trim(row).empty()) continue;
    auto cells = split_tsv_row(row);
    if (cells.size() < 2) {
      throw DataError("embeddings line " + std::to_string(line) + ": expected id and values");
    }
    if (dim == 0) dim = cells.size() - 1;
    if (cells.size() - 1 != dim) {
      throw DataError("embeddings line " + std::to_string(line) + ": expected " +
                      std::to_string(dim) + " values");
    }
    std::vector<double> values(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      try {
        std::size_t pos = 0;
        values[k] = std::stod(cells[k + 1], &pos);
        if (pos != cells[k + 1].size() || !std::isfinite(values[k])) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw DataError("embeddings line " + std::to_string(line) + ": bad value '" +
                        cells[k + 1] + "'");
      }
    }
    if (!table.emplace(cells[0], std::move(values)).second) {
      throw DataError("embeddings line " + std::to_string(line) + ": duplicate id '" +
                      cells[0] + "'");
    }
  }
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  return parse_embeddings(read_file(path));
}

FeatureMatrix embedding_matrix(const Dataset& dataset, const EmbeddingTable& table) {
  FeatureMatrix m;
  for (const auto& inst : dataset.instances) {
    auto it = table.find(inst.id);
    if (it == table.end()) throw DataError("no embedding for instance '" + inst.id + "'");
    FeatureVector v = dense_vector(it->second);
    v.dimension = static_cast<std::uint32_t>(it->second.size());
    if (m.rows.empty()) m.dimension = v.dimension;
    if (v.dimension != m.dimension) throw DataError("embedding dimensions disagree");
    m.rows.push_back(std::move(v));
  }
  return m;
}

}  // namespace toxdebias

#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "toxdebias/corpus.hpp"
#include "toxdebias/lexicon.hpp"

namespace toxdebias {

struct FeatureEntry {
  std::uint32_t index = 0;
  double value = 0.0;

  friend bool operator==(const FeatureEntry&, const FeatureEntry&) = default;
};

// Sparse vector with strictly increasing indices, all < dimension.
struct FeatureVector {
  std::uint32_t dimension = 0;
  std::vector<FeatureEntry> entries;

  double norm() const;
  double dot(const std::vector<double>& dense) const;
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// Rows aligned with a Dataset.
struct FeatureMatrix {
  std::uint32_t dimension = 0;
  std::vector<FeatureVector> rows;

  std::size_t size() const { return rows.size(); }
  FeatureMatrix select(const std::vector<std::size_t>& indices) const;
};

// Hashed n-gram space. Each n-gram is the space-joined token sequence, hashed
// with hash_ngram() and reduced modulo the (power of two) dimension.
struct FeatureSpace {
  std::uint32_t dimension = 1u << 18;
  std::set<int> ngram_orders = {1, 2};
  std::uint64_t hash_seed = 0;
  bool l2_normalize = true;
  // Treat '*' as a letter so censored forms ("f*ck") stay single tokens.
  bool keep_asterisk = true;

  void validate() const;
  nlohmann::json to_json() const;
  static FeatureSpace from_json(const nlohmann::json& j);
  friend bool operator==(const FeatureSpace&, const FeatureSpace&) = default;
};

// FNV-1a over the bytes, starting from an offset basis perturbed by the seed,
// followed by the splitmix64 finalizer:
//   h = 0xcbf29ce484222325 ^ mix64(seed)
//   for each byte b: h = (h ^ b) * 0x100000001b3
//   return mix64(h)
std::uint64_t hash_ngram(std::string_view ngram, std::uint64_t seed);

// Lowercases ASCII and splits on characters that are not ASCII alphanumerics
// (or '*', when keep_asterisk). Bytes >= 0x80 are kept inside tokens.
std::vector<std::string> tokenize(std::string_view text, bool keep_asterisk = true);

FeatureVector featurize(std::string_view text, const FeatureSpace& space);
FeatureMatrix featurize_dataset(const Dataset& dataset, const FeatureSpace& space);

// One dimension per lexicon entry holding its match count, followed by the
// nOI, OI and OnI totals. Entries outside `categories` contribute nothing.
FeatureVector toxtrig_features(std::string_view text, const Lexicon& lexicon,
                               const std::set<Category>& categories = {Category::nOI,
                                                                        Category::OI,
                                                                        Category::OnI});
inline std::uint32_t toxtrig_dimension(const Lexicon& lexicon) {
  return static_cast<std::uint32_t>(lexicon.size() + 3);
}

// Dense (aae, wae, hispanic, other). Throws DataError without probabilities.
FeatureVector dialect_features(const Instance& instance);

// Precomputed representations: TSV rows "id<TAB>v1<TAB>...<TAB>vD".
using EmbeddingTable = std::unordered_map<std::string, std::vector<double>>;
EmbeddingTable load_embeddings(const std::filesystem::path& path);
EmbeddingTable parse_embeddings(std::string_view content);
// Throws DataError if an instance has no row or dimensions disagree.
FeatureMatrix embedding_matrix(const Dataset& dataset, const EmbeddingTable& table);

FeatureVector dense_vector(const std::vector<double>& values);

}  // namespace toxdebias

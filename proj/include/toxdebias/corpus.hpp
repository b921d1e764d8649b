#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace toxdebias {

enum class RawLabel { hateful, abusive, neither, spam, unlabeled };
enum class Label { nontoxic = 0, toxic = 1, unlabeled = 2 };
enum class Dialect { aae = 0, wae = 1, hispanic = 2, other = 3 };
enum class AuthorGroup { white, african_american };
enum class DatasetFormat { jsonl, tsv };

std::string_view to_string(RawLabel v);
std::string_view to_string(Label v);
std::string_view to_string(Dialect v);
std::string_view to_string(AuthorGroup v);

std::optional<RawLabel> parse_raw_label(std::string_view s);
std::optional<Label> parse_label(std::string_view s);
std::optional<Dialect> parse_dialect(std::string_view s);
std::optional<AuthorGroup> parse_author_group(std::string_view s);
std::optional<DatasetFormat> parse_format(std::string_view s);

// Label implied by an annotator label before spam removal: hateful and
// abusive fold into toxic, neither is nontoxic, spam and unlabeled carry no
// label.
Label label_from_raw(RawLabel raw);

// Probabilities over (aae, wae, hispanic, other) from an external dialect
// model.
struct DialectProbs {
  std::array<double, 4> p{};

  double operator[](Dialect d) const { return p[static_cast<int>(d)]; }
  friend bool operator==(const DialectProbs&, const DialectProbs&) = default;
};

inline constexpr double kSimplexTolerance = 1e-6;

// Throws DataError unless every entry is in [0,1] and the sum is 1 within
// kSimplexTolerance.
void validate_simplex(const DialectProbs& probs);

struct Instance {
  std::string id;
  std::string text;
  RawLabel raw_label = RawLabel::unlabeled;
  Label label = Label::unlabeled;
  std::optional<DialectProbs> dialect;
  std::optional<AuthorGroup> author_group;

  friend bool operator==(const Instance&, const Instance&) = default;
};

struct Dataset {
  std::vector<Instance> instances;
  std::string provenance;
  std::string split_name;

  std::size_t size() const { return instances.size(); }
  bool empty() const { return instances.empty(); }
  const Instance& operator[](std::size_t i) const { return instances[i]; }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Throws DataError on duplicate ids or invalid dialect probabilities.
void validate_dataset(const Dataset& dataset);

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path,
                  DatasetFormat format);

// In-memory variants used by the file functions; line numbers in errors are
// 1-based and count the TSV header.
Dataset parse_jsonl(std::string_view content, std::string provenance = {});
Dataset parse_tsv(std::string_view content, std::string provenance = {});
std::string to_jsonl(const Dataset& dataset);
std::string to_tsv(const Dataset& dataset);

struct AggregationCounts {
  std::size_t hateful_to_toxic = 0;
  std::size_t abusive_to_toxic = 0;
  std::size_t neither_to_nontoxic = 0;
  std::size_t spam_dropped = 0;
  std::size_t unlabeled_kept = 0;
};

struct AggregationResult {
  Dataset dataset;
  AggregationCounts counts;
};

// Folds hateful/abusive into toxic and neither into nontoxic, removing spam.
// Instances without a raw label keep whatever label they were loaded with.
AggregationResult aggregate_labels(const Dataset& dataset);

struct SamplingSpec {
  double target_fraction = 1.0;
  bool preserve_label_proportions = true;
  std::uint64_t seed = 0;
};

// Number of items per stratum after scaling by `fraction`, using the largest
// remainder method so the counts sum to round(fraction * total). Ties in the
// remainder go to the earlier stratum.
std::vector<std::size_t> largest_remainder_quotas(
    const std::vector<std::size_t>& stratum_sizes, double fraction);

// Per-class target sizes (index by Label) for a label-preserving subset.
// Throws DataError naming a class that would receive zero instances.
std::array<std::size_t, 2> class_quotas(const Dataset& dataset, double fraction);

// Seeded subset of round(fraction * N) instances, returned in input order.
Dataset stratified_sample(const Dataset& dataset, const SamplingSpec& spec);

// Indices (ascending) of the instances stratified_sample would keep.
std::vector<std::size_t> stratified_sample_indices(const Dataset& dataset,
                                                   const SamplingSpec& spec);

// Highest-probability dialect; ties resolve in aae, wae, hispanic, other
// order. Throws DataError when the instance has no dialect probabilities.
Dialect argmax_dialect(const Instance& instance);

// Binary label encoding used by every statistic: toxic = 1, nontoxic = 0.
// Throws DataError for unlabeled instances.
int label_value(const Instance& instance);

std::array<std::size_t, 2> label_counts(const Dataset& dataset);

Dataset subset(const Dataset& dataset, const std::vector<std::size_t>& indices);

}  // namespace toxdebias

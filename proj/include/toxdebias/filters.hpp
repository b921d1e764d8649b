#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "toxdebias/corpus.hpp"
#include "toxdebias/features.hpp"
#include "toxdebias/probe.hpp"

namespace toxdebias {

struct RemovedInstance {
  std::string id;
  std::optional<double> score;
  int iteration = 0;  // 0 marks removal by the final size adjustment
};

struct IterationStats {
  int iteration = 0;
  std::size_t size = 0;
  double mean_score = 0.0;
  std::array<std::size_t, 2> class_counts{};
  std::size_t above_threshold = 0;
  std::size_t removed = 0;
};

// Outcome of a filtering run: retained and removed ids partition the input.
struct FilterManifest {
  std::string method;
  std::vector<std::string> retained_ids;  // input order
  std::vector<RemovedInstance> removed;   // removal order
  std::vector<IterationStats> stats;
  nlohmann::json config = nlohmann::json::object();
  bool threshold_never_met = false;

  nlohmann::json to_json() const;
  static FilterManifest from_json(const nlohmann::json& j);
};

void save_manifest(const FilterManifest& manifest, const std::filesystem::path& path);
FilterManifest load_manifest(const std::filesystem::path& path);

// Throws DataError unless retained and removed are disjoint and together
// cover exactly the dataset's ids.
void check_partition(const FilterManifest& manifest, const Dataset& dataset);

// Retained instances in dataset order.
Dataset apply_manifest(const Dataset& dataset, const FilterManifest& manifest);

FilterManifest manifest_from_indices(const Dataset& dataset, const std::vector<std::size_t>& kept,
                                     std::string method);

struct AFLiteConfig {
  double target_fraction = 0.33;
  std::size_t ensemble_size = 64;
  double train_fraction = 0.5;
  double threshold = 0.75;
  double removal_cap = 0.05;
  std::size_t min_out_of_sample_evals = 8;
  std::uint64_t seed = 0;
  bool preserve_label_proportions = true;
  std::size_t jobs = 1;
  // Ensemble members are linear probes; hidden_size and seed are overridden.
  ProbeConfig member = default_member_config();

  static ProbeConfig default_member_config();
  void validate() const;
  nlohmann::json to_json() const;
};

struct PredictabilityScores {
  std::vector<double> score;  // aligned with the input rows
  std::vector<std::size_t> correct;
  std::vector<std::size_t> evaluations;
};

// m rounds: each trains a linear probe on a random train_fraction split and
// marks the held-out rows right or wrong. score = correct / evaluations, or 0
// for rows evaluated fewer than min_evals times. Rounds run on up to `jobs`
// threads; the result does not depend on `jobs`.
PredictabilityScores predictability_scores(const FeatureMatrix& features,
                                           const std::vector<int>& labels, std::size_t m,
                                           double train_fraction, std::size_t min_evals,
                                           std::uint64_t seed, const ProbeConfig& member,
                                           std::size_t jobs = 1);

// Iterative adversarial filtering. Each iteration scores the current set and
// removes up to removal_cap * |current| instances with score >= threshold,
// most predictable first, with per-class quotas when preserving proportions.
// Stops at the target size or when nothing reaches the threshold, then
// samples down (or restores the least predictable removals) to exactly the
// target size.
FilterManifest aflite_filter(const Dataset& dataset, const FeatureMatrix& features,
                             const AFLiteConfig& config);
FilterManifest aflite_filter(const Dataset& dataset, const FeatureSpace& space,
                             const AFLiteConfig& config);

// Random (label-stratified) selection of target_fraction of the data.
FilterManifest random_filter(const Dataset& dataset, double target_fraction, std::uint64_t seed,
                             bool preserve_label_proportions = true);

}  // namespace toxdebias

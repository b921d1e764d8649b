#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "toxdebias/corpus.hpp"
#include "toxdebias/lexicon.hpp"
#include "toxdebias/probe.hpp"

namespace toxdebias {

// Encodings: toxic = 1, nontoxic = 0; category presence = 1. Correlation
// signs depend on this.

// Product-moment correlation. Throws UndefinedStatistic if lengths differ, are
// below 2, or either sequence has zero variance.
double pearson_r(const std::vector<double>& x, const std::vector<double>& y);

struct ClassificationMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1_toxic = 0.0;
  // Set when precision + recall has a zero denominator and f1 was forced to 0.
  bool f1_degenerate = false;
  std::size_t n = 0;
};

// preds and golds use the toxic=1 encoding. Throws DataError on empty or
// mismatched input.
ClassificationMetrics classification_metrics(const std::vector<int>& preds,
                                             const std::vector<int>& golds);

// FP / (FP + TN) over the masked instances. Throws UndefinedStatistic when no
// masked instance is a gold negative.
double subset_fpr(const std::vector<int>& preds, const std::vector<int>& golds,
                  const std::vector<int>& mask);

// subset_fpr restricted to instances whose most probable dialect is AAE.
double dialect_fpr(const std::vector<int>& preds, const Dataset& dataset);

struct Disparity {
  double w_rate = 0.0;
  double aa_rate = 0.0;
  double delta = 0.0;                // aa_rate - w_rate
  std::optional<double> ratio;       // aa_rate / w_rate, when w_rate > 0
  std::size_t n_white = 0;
  std::size_t n_african_american = 0;
};

Disparity disparity_from_rates(double w_rate, double aa_rate);
// Rate of toxic predictions per author group. Gold labels are not used.
// Throws UndefinedStatistic when a group has no instances.
Disparity race_disparity(const std::vector<int>& preds, const Dataset& dataset);

struct BiasReport {
  static constexpr int kSchemaVersion = 1;

  std::string name;
  std::size_t n = 0;
  std::array<std::optional<double>, 3> r_category;     // indexed by Category
  std::optional<double> r_aae;
  std::array<std::optional<double>, 3> fpr_category;
  std::array<std::optional<double>, 3> f1_category;
  std::array<std::size_t, 3> category_counts{};
  std::optional<double> fpr_aae;
  std::size_t aae_count = 0;
  std::optional<double> accuracy;
  std::optional<double> f1_toxic;
  bool f1_degenerate = false;
  std::optional<Disparity> disparity;
  std::optional<double> challenge_f1;
  std::optional<double> challenge_accuracy;

  nlohmann::json to_json() const;
  static BiasReport from_json(const nlohmann::json& j);
};

bool operator==(const BiasReport& a, const BiasReport& b);

// Label/category and label/AAE-probability correlations of a labeled dataset.
BiasReport dataset_association_report(const Dataset& dataset, const Lexicon& lexicon);

struct ReportInputs {
  const std::vector<Prediction>* challenge_preds = nullptr;
  const Dataset* challenge = nullptr;
};

// Every metric computable from the predictions and dataset. Statistics whose
// prerequisites are missing (no gold labels, no dialect probabilities, no
// author groups, zero denominators) are null.
BiasReport full_report(const std::vector<Prediction>& preds, const Dataset& dataset,
                       const Lexicon& lexicon, const ReportInputs& extra = {});

std::vector<int> prediction_values(const std::vector<Prediction>& preds);

// Markdown tables for a set of named reports: lexical associations,
// performance and per-category FPR, dialect, and racial disparity. Rates are
// percentages with two decimals.
std::string render_markdown(const std::vector<BiasReport>& reports);

}  // namespace toxdebias

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "toxdebias/corpus.hpp"
#include "toxdebias/features.hpp"
#include "toxdebias/lexicon.hpp"

namespace toxdebias {

// Class index 0 is nontoxic, 1 is toxic (matches label_value()).
inline constexpr std::size_t kNumClasses = 2;
using ClassProbs = std::array<double, kNumClasses>;

ClassProbs softmax(const ClassProbs& logits);

struct ProbeConfig {
  std::size_t hidden_size = 0;  // 0 selects the linear model
  int epochs = 6;
  double learning_rate = 0.1;
  std::size_t batch_size = 32;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
  bool record_dynamics = false;

  void validate() const;
  nlohmann::json to_json() const;
  static ProbeConfig from_json(const nlohmann::json& j);
};

// How a model turns an instance into its input vector.
enum class FeatureKind { hashed, toxtrig, dialect };

struct Featurizer {
  FeatureKind kind = FeatureKind::hashed;
  FeatureSpace space;                       // hashed
  Lexicon lexicon;                          // toxtrig
  std::set<Category> categories = {Category::nOI, Category::OI, Category::OnI};

  std::uint32_t dimension() const;
  FeatureVector apply(const Instance& instance) const;
  FeatureVector apply_text(std::string_view text) const;  // not valid for dialect
  FeatureMatrix apply(const Dataset& dataset) const;

  nlohmann::json to_json() const;
  static Featurizer from_json(const nlohmann::json& j);

  static Featurizer hashed(const FeatureSpace& space);
};

// Softmax classifier: probs = softmax(W2 h + b2) with h = relu(W1 x + b1), or
// h = x when hidden_size == 0.
//
// Layout: w1 is stored input-major, w1[d * H + j] is the weight from input d
// to hidden unit j. w2[k * M + j] is the weight from hidden unit (or input) j
// to class k, M = H or D.
struct ProbeModel {
  std::uint32_t input_dim = 0;
  std::size_t hidden_size = 0;
  std::vector<double> w1, b1, w2, b2;
  ProbeConfig config;
  Featurizer featurizer;

  // Zero output layer; hidden weights drawn uniformly in [-1, 1] from the
  // config seed.
  static ProbeModel initialized(std::uint32_t input_dim, const ProbeConfig& config);

  std::size_t representation_size() const { return hidden_size ? hidden_size : input_dim; }
  bool is_finite() const;
};

struct ForwardResult {
  ClassProbs logits{};
  ClassProbs probs{};
  std::vector<double> hidden;  // post-ReLU; empty for the linear model
  double prob_toxic() const { return probs[1]; }
};

// Throws DataError if any parameter is non-finite or x exceeds the input
// dimension.
ForwardResult forward(const ProbeModel& model, const FeatureVector& x);

// Inner product of `weights` with the model's representation of x: the hidden
// layer when present, otherwise x itself.
double representation_dot(const ProbeModel& model, const FeatureVector& x,
                          const ForwardResult& fwd, std::span<const double> weights);

struct DynamicsRecord {
  std::string id;
  int epoch = 0;
  double prob_gold = 0.0;
  bool correct = false;
};
using DynamicsLog = std::vector<DynamicsRecord>;

struct TrainResult {
  ProbeModel model;
  std::optional<DynamicsLog> dynamics;
  std::vector<double> epoch_loss;  // mean training objective after each epoch
};

// Mini-batch gradient descent on mean cross-entropy + l2 * (|W1|^2 + |W2|^2).
// Biases are not regularized. Deterministic given config.seed.
// Throws DataError if the labels contain a single class.
TrainResult train_probe(const FeatureMatrix& features, const std::vector<int>& labels,
                        const ProbeConfig& config, const std::vector<std::string>& ids = {});
TrainResult train_probe(const Dataset& dataset, const FeatureSpace& space,
                        const ProbeConfig& config);
TrainResult train_probe(const Dataset& dataset, const Featurizer& featurizer,
                        const ProbeConfig& config);

struct Prediction {
  Label label = Label::nontoxic;
  double prob_toxic = 0.0;
};

// label is toxic iff prob_toxic > 0.5.
Prediction decide(double prob_toxic);
std::vector<Prediction> predict(const ProbeModel& model, const FeatureMatrix& features);
std::vector<Prediction> predict(const ProbeModel& model, const Dataset& dataset);
std::vector<Prediction> predict(const ProbeModel& model, const Dataset& dataset,
                                const FeatureSpace& space);

// Objective and its exact gradient, for verification against finite
// differences.
struct ProbeGradient {
  std::vector<double> w1, b1, w2, b2;
};
double probe_objective(const ProbeModel& model, const FeatureMatrix& features,
                       const std::vector<int>& labels, double l2);
ProbeGradient probe_gradient(const ProbeModel& model, const FeatureMatrix& features,
                             const std::vector<int>& labels, double l2);

enum class BiasKind { toxtrig, oni_only, noi_only, oi_only, dialect };
std::string_view to_string(BiasKind kind);
std::optional<BiasKind> parse_bias_kind(std::string_view s);

ProbeConfig default_bias_only_config(std::uint64_t seed);
Featurizer bias_featurizer(BiasKind kind, const Lexicon* lexicon);

// Linear probe over the bias features only. Throws DataError when the
// required lexicon or dialect probabilities are missing.
ProbeModel train_bias_only(const Dataset& dataset, BiasKind kind, const Lexicon* lexicon,
                           const ProbeConfig& config);

std::vector<int> labels_of(const Dataset& dataset);
std::vector<std::string> ids_of(const Dataset& dataset);

void save_probe(const ProbeModel& model, const std::filesystem::path& path);
ProbeModel load_probe(const std::filesystem::path& path);

std::string dynamics_to_jsonl(const DynamicsLog& log);
DynamicsLog parse_dynamics_jsonl(std::string_view content);
void save_dynamics(const DynamicsLog& log, const std::filesystem::path& path);
DynamicsLog load_dynamics(const std::filesystem::path& path);

std::string predictions_to_jsonl(const Dataset& dataset, const std::vector<Prediction>& preds);
// Returns predictions aligned with `dataset` by id. Throws DataError if an id
// is missing.
std::vector<Prediction> parse_predictions_jsonl(std::string_view content, const Dataset& dataset);

}  // namespace toxdebias

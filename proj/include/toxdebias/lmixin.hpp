#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "toxdebias/probe.hpp"

namespace toxdebias {

// Learned-Mixin product of experts. During training the full model's class
// log-probabilities are combined with the frozen bias-only model's,
//   p_hat = softmax(log p + g(x) * log b),   g(x) = softplus(w . h(x)),
// where h(x) is the full model's last hidden layer (the input itself for the
// linear probe). The loss adds alpha * H(softmax(g(x) * log b)), averaged over
// the batch, so the ensemble cannot silence the bias model. Only the full
// model is used at inference unless joint prediction is requested.

// log b is clamped from below at this value before use.
inline constexpr double kLogBiasFloor = -16.11809565095832;  // log(1e-7)

double softplus(double x);
double sigmoid(double x);

// softplus(w . hidden). Dimensions must match.
double gate_value(std::span<const double> w, std::span<const double> hidden);

ClassProbs clamped_log(const ClassProbs& b);
ClassProbs ensemble_probs(const ClassProbs& p, const ClassProbs& b, double g);
// Entropy of softmax(g * log b), in [0, log K].
double entropy_penalty(const ClassProbs& b, double g);

struct LMixinConfig {
  double alpha = 0.03;
  ProbeConfig base;
  BiasKind bias_kind = BiasKind::toxtrig;
  ProbeConfig bias_config = default_bias_only_config(0);

  void validate() const;
  nlohmann::json to_json() const;
  static LMixinConfig from_json(const nlohmann::json& j);
};

struct LMixinModel {
  ProbeModel full;
  std::vector<double> gate;  // size == full.representation_size()
  ProbeModel bias_only;
  LMixinConfig config;
};

struct LMixinTraining {
  ProbeModel full;
  std::vector<double> gate;
  std::vector<double> epoch_loss;
};

// Trains the full model and gate against fixed bias-model probabilities
// (one per training instance). Uses the same shuffling, initialization and
// update rule as train_probe, so with alpha = 0 and uniform bias
// probabilities the full model matches train_probe exactly.
LMixinTraining train_lmixin_core(const FeatureMatrix& features, const std::vector<int>& labels,
                                 const std::vector<ClassProbs>& bias_probs, double alpha,
                                 const ProbeConfig& config);

// Trains the bias-only model on the dataset, freezes it, then trains the
// full model and gate over hashed features from `space`.
LMixinModel train_lmixin(const Dataset& dataset, const FeatureSpace& space,
                         const Lexicon* lexicon, const LMixinConfig& config);

// Total objective and gradient (full model parameters plus gate), for
// verification against finite differences.
struct LMixinGradient {
  ProbeGradient full;
  std::vector<double> gate;
};
double lmixin_objective(const ProbeModel& full, std::span<const double> gate,
                        const FeatureMatrix& features, const std::vector<int>& labels,
                        const std::vector<ClassProbs>& bias_probs, double alpha, double l2);
LMixinGradient lmixin_gradient(const ProbeModel& full, std::span<const double> gate,
                               const FeatureMatrix& features, const std::vector<int>& labels,
                               const std::vector<ClassProbs>& bias_probs, double alpha,
                               double l2);

enum class MixinMode { full_only, joint };
std::optional<MixinMode> parse_mixin_mode(std::string_view s);

std::vector<Prediction> lmixin_predict(const LMixinModel& model, const Dataset& dataset,
                                       MixinMode mode);
// Per-instance gate values g(x) of the trained model.
std::vector<double> gate_values(const LMixinModel& model, const Dataset& dataset);

void save_lmixin(const LMixinModel& model, const std::filesystem::path& path);
LMixinModel load_lmixin(const std::filesystem::path& path);

}  // namespace toxdebias

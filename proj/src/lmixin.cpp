#include "toxdebias/lmixin.hpp"

#include <algorithm>
#include <cmath>

#include "toxdebias/detail/trainer.hpp"
#include "toxdebias/errors.hpp"
#include "toxdebias/model_io.hpp"
#include "toxdebias/text_io.hpp"

namespace toxdebias {

using nlohmann::json;

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double gate_value(std::span<const double> w, std::span<const double> hidden) {
  if (w.size() != hidden.size()) throw DataError("gate and hidden dimensions differ");
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * hidden[j];
  return softplus(s);
}

ClassProbs clamped_log(const ClassProbs& b) {
  ClassProbs out;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    out[k] = b[k] > 0.0 ? std::max(std::log(b[k]), kLogBiasFloor) : kLogBiasFloor;
  }
  return out;
}

namespace {

// log b shifted so its maximum is 0; softmax is invariant to the shift and a
// uniform bias becomes exactly zero.
ClassProbs shifted_log_bias(const ClassProbs& b) {
  ClassProbs u = clamped_log(b);
  const double m = std::max(u[0], u[1]);
  for (auto& v : u) v -= m;
  return u;
}

ClassProbs scaled(const ClassProbs& u, double g) {
  ClassProbs out;
  for (std::size_t k = 0; k < kNumClasses; ++k) out[k] = g * u[k];
  return out;
}

double entropy_of(const ClassProbs& q) {
  double h = 0.0;
  for (double v : q) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

// d/dg H(softmax(g u)) = -g Var_q(u) with q = softmax(g u).
double entropy_slope(const ClassProbs& u, double g, const ClassProbs& q) {
  double mean = 0.0;
  for (std::size_t k = 0; k < kNumClasses; ++k) mean += q[k] * u[k];
  double var = 0.0;
  for (std::size_t k = 0; k < kNumClasses; ++k) var += q[k] * (u[k] - mean) * (u[k] - mean);
  return -g * var;
}

struct ExampleTerms {
  double loss = 0.0;
  ClassProbs dlogits{};
  double dscore = 0.0;  // dL/d(w . h)
};

ExampleTerms example_terms(const ClassProbs& logits, const ClassProbs& bias, double score,
                           int gold, double alpha) {
  ExampleTerms t;
  const ClassProbs u = shifted_log_bias(bias);
  const double g = softplus(score);
  ClassProbs mixed;
  for (std::size_t k = 0; k < kNumClasses; ++k) mixed[k] = logits[k] + g * u[k];
  const ClassProbs p_hat = softmax(mixed);
  const ClassProbs q = softmax(scaled(u, g));
  t.loss = -std::log(std::max(p_hat[gold], 1e-300)) + alpha * entropy_of(q);
  double dg = 0.0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    t.dlogits[k] = p_hat[k] - (static_cast<int>(k) == gold ? 1.0 : 0.0);
    dg += t.dlogits[k] * u[k];
  }
  dg += alpha * entropy_slope(u, g, q);
  t.dscore = dg * sigmoid(score);
  return t;
}

void check_bias_inputs(const FeatureMatrix& features, const std::vector<int>& labels,
                       const std::vector<ClassProbs>& bias_probs) {
  if (features.size() != labels.size() || bias_probs.size() != labels.size()) {
    throw DataError("features, labels and bias probabilities differ in length");
  }
}

}  // namespace

ClassProbs ensemble_probs(const ClassProbs& p, const ClassProbs& b, double g) {
  const ClassProbs u = shifted_log_bias(b);
  ClassProbs z;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    z[k] = (p[k] > 0.0 ? std::log(p[k]) : -745.0) + g * u[k];
  }
  return softmax(z);
}

double entropy_penalty(const ClassProbs& b, double g) {
  return entropy_of(softmax(scaled(clamped_log(b), g)));
}

void LMixinConfig::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw UsageError("alpha must be non-negative");
  base.validate();
  bias_config.validate();
}

json LMixinConfig::to_json() const {
  return {{"alpha", alpha},
          {"base", base.to_json()},
          {"bias_kind", to_string(bias_kind)},
          {"bias_config", bias_config.to_json()}};
}

LMixinConfig LMixinConfig::from_json(const json& j) {
  LMixinConfig c;
  c.alpha = j.at("alpha").get<double>();
  c.base = ProbeConfig::from_json(j.at("base"));
  auto kind = parse_bias_kind(j.at("bias_kind").get<std::string>());
  if (!kind) throw DataError("unknown bias kind in model file");
  c.bias_kind = *kind;
  c.bias_config = ProbeConfig::from_json(j.at("bias_config"));
  return c;
}

LMixinTraining train_lmixin_core(const FeatureMatrix& features, const std::vector<int>& labels,
                                 const std::vector<ClassProbs>& bias_probs, double alpha,
                                 const ProbeConfig& config) {
  config.validate();
  check_bias_inputs(features, labels, bias_probs);
  detail::require_two_classes(labels);

  LMixinTraining out;
  out.full = ProbeModel::initialized(features.dimension, config);
  detail::Network net(out.full);
  detail::ParamBlock gate(std::vector<double>(net.representation_size(), 0.0), true);

  auto per_example = [&](std::size_t i, const FeatureVector& x, const ForwardResult& fwd,
                         double weight, ClassProbs& dlogits, std::vector<double>& dhidden) {
    const double score = detail::Network::dot(x, fwd, gate);
    const ExampleTerms t = example_terms(fwd.logits, bias_probs[i], score, labels[i], alpha);
    dlogits = t.dlogits;
    if (t.dscore == 0.0) return;
    if (fwd.hidden.empty()) {
      for (const auto& e : x.entries) gate.add_grad(e.index, weight * t.dscore * e.value);
    } else {
      for (std::size_t j = 0; j < fwd.hidden.size(); ++j) {
        gate.add_grad(j, weight * t.dscore * fwd.hidden[j]);
        dhidden[j] = t.dscore * gate.value(j);
      }
    }
  };
  auto after_batch = [&](double lr) { gate.step(lr, config.l2); };
  auto after_epoch = [&](int) {
    double loss = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
      const auto fwd = net.forward(features.rows[i]);
      const double score = detail::Network::dot(features.rows[i], fwd, gate);
      loss += example_terms(fwd.logits, bias_probs[i], score, labels[i], alpha).loss;
    }
    out.epoch_loss.push_back(loss / static_cast<double>(features.size()) +
                             net.weight_penalty(config.l2) + config.l2 * gate.squared_norm());
  };
  detail::run_epochs(net, features, config, per_example, after_batch, after_epoch);
  net.export_to(out.full);
  out.gate = gate.materialize();
  return out;
}

namespace {

std::vector<ClassProbs> bias_probabilities(const ProbeModel& bias_only, const Dataset& dataset) {
  const FeatureMatrix bf = bias_only.featurizer.apply(dataset);
  std::vector<ClassProbs> probs;
  probs.reserve(dataset.size());
  for (const auto& row : bf.rows) probs.push_back(forward(bias_only, row).probs);
  return probs;
}

}  // namespace

LMixinModel train_lmixin(const Dataset& dataset, const FeatureSpace& space,
                         const Lexicon* lexicon, const LMixinConfig& config) {
  config.validate();
  space.validate();
  LMixinModel model;
  model.config = config;
  model.bias_only = train_bias_only(dataset, config.bias_kind, lexicon, config.bias_config);
  const auto bias = bias_probabilities(model.bias_only, dataset);
  const Featurizer featurizer = Featurizer::hashed(space);
  LMixinTraining t = train_lmixin_core(featurizer.apply(dataset), labels_of(dataset), bias,
                                       config.alpha, config.base);
  model.full = std::move(t.full);
  model.full.featurizer = featurizer;
  model.gate = std::move(t.gate);
  return model;
}

double lmixin_objective(const ProbeModel& full, std::span<const double> gate,
                        const FeatureMatrix& features, const std::vector<int>& labels,
                        const std::vector<ClassProbs>& bias_probs, double alpha, double l2) {
  check_bias_inputs(features, labels, bias_probs);
  double loss = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto fwd = forward(full, features.rows[i]);
    const double score = representation_dot(full, features.rows[i], fwd, gate);
    loss += example_terms(fwd.logits, bias_probs[i], score, labels[i], alpha).loss;
  }
  double penalty = 0.0;
  for (double w : full.w1) penalty += w * w;
  for (double w : full.w2) penalty += w * w;
  for (double w : gate) penalty += w * w;
  return loss / static_cast<double>(features.size()) + l2 * penalty;
}

LMixinGradient lmixin_gradient(const ProbeModel& full, std::span<const double> gate,
                               const FeatureMatrix& features, const std::vector<int>& labels,
                               const std::vector<ClassProbs>& bias_probs, double alpha,
                               double l2) {
  check_bias_inputs(features, labels, bias_probs);
  detail::Network net(full);
  LMixinGradient g;
  g.gate.assign(gate.size(), 0.0);
  const double weight = 1.0 / static_cast<double>(features.size());
  std::vector<double> dhidden(full.hidden_size);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& x = features.rows[i];
    const auto fwd = net.forward(x);
    const double score = representation_dot(full, x, fwd, gate);
    const ExampleTerms t = example_terms(fwd.logits, bias_probs[i], score, labels[i], alpha);
    if (fwd.hidden.empty()) {
      for (const auto& e : x.entries) g.gate[e.index] += weight * t.dscore * e.value;
    } else {
      for (std::size_t j = 0; j < fwd.hidden.size(); ++j) {
        g.gate[j] += weight * t.dscore * fwd.hidden[j];
        dhidden[j] = t.dscore * gate[j];
      }
    }
    net.backward(x, fwd, t.dlogits, dhidden, weight);
  }
  g.full = net.pending_gradient();
  for (std::size_t i = 0; i < g.full.w1.size(); ++i) g.full.w1[i] += 2.0 * l2 * full.w1[i];
  for (std::size_t i = 0; i < g.full.w2.size(); ++i) g.full.w2[i] += 2.0 * l2 * full.w2[i];
  for (std::size_t i = 0; i < gate.size(); ++i) g.gate[i] += 2.0 * l2 * gate[i];
  return g;
}

std::optional<MixinMode> parse_mixin_mode(std::string_view s) {
  if (s == "full_only") return MixinMode::full_only;
  if (s == "joint") return MixinMode::joint;
  return std::nullopt;
}

std::vector<double> gate_values(const LMixinModel& model, const Dataset& dataset) {
  const FeatureMatrix features = model.full.featurizer.apply(dataset);
  std::vector<double> out;
  out.reserve(dataset.size());
  for (const auto& row : features.rows) {
    const auto fwd = forward(model.full, row);
    out.push_back(softplus(representation_dot(model.full, row, fwd, model.gate)));
  }
  return out;
}

std::vector<Prediction> lmixin_predict(const LMixinModel& model, const Dataset& dataset,
                                       MixinMode mode) {
  if (mode == MixinMode::full_only) return predict(model.full, dataset);
  const FeatureMatrix features = model.full.featurizer.apply(dataset);
  const auto bias = bias_probabilities(model.bias_only, dataset);
  std::vector<Prediction> out;
  out.reserve(dataset.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto fwd = forward(model.full, features.rows[i]);
    const double g = softplus(representation_dot(model.full, features.rows[i], fwd, model.gate));
    out.push_back(decide(ensemble_probs(fwd.probs, bias[i], g)[1]));
  }
  return out;
}

namespace {

json probe_header(const ProbeModel& m) {
  return {{"input_dim", m.input_dim},
          {"hidden_size", m.hidden_size},
          {"config", m.config.to_json()},
          {"featurizer", m.featurizer.to_json()}};
}

ProbeModel probe_from(const json& h, const ArrayFile& file, const std::string& prefix) {
  ProbeModel m;
  m.input_dim = h.at("input_dim").get<std::uint32_t>();
  m.hidden_size = h.at("hidden_size").get<std::size_t>();
  m.config = ProbeConfig::from_json(h.at("config"));
  m.featurizer = Featurizer::from_json(h.at("featurizer"));
  m.w1 = file.at(prefix + "w1");
  m.b1 = file.at(prefix + "b1");
  m.w2 = file.at(prefix + "w2");
  m.b2 = file.at(prefix + "b2");
  if (m.w2.size() != kNumClasses * m.representation_size()) {
    throw DataError("parameter shapes do not match header");
  }
  return m;
}

}  // namespace

void save_lmixin(const LMixinModel& model, const std::filesystem::path& path) {
  json header = {{"format", "toxdebias.lmixin"},
                 {"config", model.config.to_json()},
                 {"full", probe_header(model.full)},
                 {"bias_only", probe_header(model.bias_only)}};
  write_file(path, encode_array_file(header, {{"full.w1", &model.full.w1},
                                              {"full.b1", &model.full.b1},
                                              {"full.w2", &model.full.w2},
                                              {"full.b2", &model.full.b2},
                                              {"gate", &model.gate},
                                              {"bias.w1", &model.bias_only.w1},
                                              {"bias.b1", &model.bias_only.b1},
                                              {"bias.w2", &model.bias_only.w2},
                                              {"bias.b2", &model.bias_only.b2}}));
}

LMixinModel load_lmixin(const std::filesystem::path& path) {
  const ArrayFile file = decode_array_file(read_file(path));
  if (file.header.value("format", "") != "toxdebias.lmixin") {
    throw DataError("'" + path.string() + "' is not a Learned-Mixin model file");
  }
  LMixinModel m;
  m.config = LMixinConfig::from_json(file.header.at("config"));
  m.full = probe_from(file.header.at("full"), file, "full.");
  m.bias_only = probe_from(file.header.at("bias_only"), file, "bias.");
  m.gate = file.at("gate");
  if (m.gate.size() != m.full.representation_size()) {
    throw DataError("gate dimension does not match the full model");
  }
  return m;
}

}  // namespace toxdebias

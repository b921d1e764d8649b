#include "toxdebias/probe.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "toxdebias/detail/trainer.hpp"
#include "toxdebias/errors.hpp"
#include "toxdebias/model_io.hpp"
#include "toxdebias/rng.hpp"
#include "toxdebias/text_io.hpp"

namespace toxdebias {

using nlohmann::json;

ClassProbs softmax(const ClassProbs& logits) {
  const double m = std::max(logits[0], logits[1]);
  ClassProbs out;
  double sum = 0.0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    out[k] = std::exp(logits[k] - m);
    sum += out[k];
  }
  for (auto& v : out) v /= sum;
  return out;
}

void ProbeConfig::validate() const {
  if (epochs <= 0) throw UsageError("epochs must be positive");
  if (!(learning_rate > 0.0)) throw UsageError("learning rate must be positive");
  if (batch_size == 0) throw UsageError("batch size must be positive");
  if (!(l2 >= 0.0)) throw UsageError("l2 must be non-negative");
}

json ProbeConfig::to_json() const {
  return {{"hidden_size", hidden_size}, {"epochs", epochs},
          {"learning_rate", learning_rate}, {"batch_size", batch_size},
          {"l2", l2}, {"seed", seed}, {"record_dynamics", record_dynamics}};
}

ProbeConfig ProbeConfig::from_json(const json& j) {
  ProbeConfig c;
  c.hidden_size = j.at("hidden_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.l2 = j.at("l2").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.record_dynamics = j.value("record_dynamics", false);
  c.validate();
  return c;
}

// --- Featurizer ---------------------------------------------------------

std::uint32_t Featurizer::dimension() const {
  switch (kind) {
    case FeatureKind::hashed: return space.dimension;
    case FeatureKind::toxtrig: return toxtrig_dimension(lexicon);
    case FeatureKind::dialect: return 4;
  }
  return 0;
}

FeatureVector Featurizer::apply(const Instance& instance) const {
  if (kind == FeatureKind::dialect) return dialect_features(instance);
  return apply_text(instance.text);
}

FeatureVector Featurizer::apply_text(std::string_view text) const {
  switch (kind) {
    case FeatureKind::hashed: return featurize(text, space);
    case FeatureKind::toxtrig: return toxtrig_features(text, lexicon, categories);
    case FeatureKind::dialect: break;
  }
  throw DataError("dialect features need dialect probabilities, not text");
}

FeatureMatrix Featurizer::apply(const Dataset& dataset) const {
  if (kind == FeatureKind::hashed) return featurize_dataset(dataset, space);
  FeatureMatrix m;
  m.dimension = dimension();
  m.rows.reserve(dataset.size());
  for (const auto& inst : dataset.instances) m.rows.push_back(apply(inst));
  return m;
}

json Featurizer::to_json() const {
  json j;
  switch (kind) {
    case FeatureKind::hashed:
      j["kind"] = "hashed";
      j["space"] = space.to_json();
      break;
    case FeatureKind::toxtrig: {
      j["kind"] = "toxtrig";
      json cats = json::array();
      for (auto c : categories) cats.push_back(to_string(c));
      j["categories"] = cats;
      j["lexicon_csv"] = to_lexicon_csv(lexicon);
      break;
    }
    case FeatureKind::dialect: j["kind"] = "dialect"; break;
  }
  return j;
}

Featurizer Featurizer::from_json(const json& j) {
  Featurizer f;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "hashed") {
    f.kind = FeatureKind::hashed;
    f.space = FeatureSpace::from_json(j.at("space"));
  } else if (kind == "toxtrig") {
    f.kind = FeatureKind::toxtrig;
    f.lexicon = parse_lexicon_csv(j.at("lexicon_csv").get<std::string>());
    f.categories.clear();
    for (const auto& c : j.at("categories")) {
      auto cat = parse_category(c.get<std::string>());
      if (!cat) throw DataError("unknown category in model file");
      f.categories.insert(*cat);
    }
  } else if (kind == "dialect") {
    f.kind = FeatureKind::dialect;
  } else {
    throw DataError("unknown feature kind '" + kind + "' in model file");
  }
  return f;
}

Featurizer Featurizer::hashed(const FeatureSpace& space) {
  Featurizer f;
  f.kind = FeatureKind::hashed;
  f.space = space;
  return f;
}

// --- model --------------------------------------------------------------

ProbeModel ProbeModel::initialized(std::uint32_t input_dim, const ProbeConfig& config) {
  config.validate();
  if (input_dim == 0) throw UsageError("input dimension must be positive");
  ProbeModel m;
  m.input_dim = input_dim;
  m.hidden_size = config.hidden_size;
  m.config = config;
  const std::size_t rep = m.representation_size();
  m.w2.assign(kNumClasses * rep, 0.0);
  m.b2.assign(kNumClasses, 0.0);
  if (m.hidden_size) {
    Rng rng(derive_seed(config.seed, 0x494e4954ULL));  // "INIT"
    m.w1.resize(static_cast<std::size_t>(input_dim) * m.hidden_size);
    for (auto& w : m.w1) w = rng.uniform(-1.0, 1.0);
    m.b1.assign(m.hidden_size, 0.0);
  }
  return m;
}

bool ProbeModel::is_finite() const {
  auto ok = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return ok(w1) && ok(b1) && ok(w2) && ok(b2);
}

namespace {

ForwardResult forward_unchecked(const ProbeModel& model, const FeatureVector& x) {
  ForwardResult out;
  const std::size_t h = model.hidden_size;
  const std::size_t m = model.representation_size();
  if (h == 0) {
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      double acc = 0.0;
      for (const auto& e : x.entries) acc += model.w2[k * m + e.index] * e.value;
      out.logits[k] = acc + model.b2[k];
    }
  } else {
    out.hidden.assign(model.b1.begin(), model.b1.end());
    for (const auto& e : x.entries) {
      const double* row = model.w1.data() + static_cast<std::size_t>(e.index) * h;
      for (std::size_t j = 0; j < h; ++j) out.hidden[j] += row[j] * e.value;
    }
    for (auto& a : out.hidden) a = a > 0.0 ? a : 0.0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < h; ++j) acc += model.w2[k * m + j] * out.hidden[j];
      out.logits[k] = acc + model.b2[k];
    }
  }
  out.probs = softmax(out.logits);
  return out;
}

void check_indices(const ProbeModel& model, const FeatureVector& x) {
  for (const auto& e : x.entries) {
    if (e.index >= model.input_dim) {
      throw DataError("feature index " + std::to_string(e.index) +
                      " exceeds model input dimension " + std::to_string(model.input_dim));
    }
  }
}

}  // namespace

ForwardResult forward(const ProbeModel& model, const FeatureVector& x) {
  if (!model.is_finite()) throw DataError("model has non-finite parameters");
  check_indices(model, x);
  return forward_unchecked(model, x);
}

double representation_dot(const ProbeModel& model, const FeatureVector& x,
                          const ForwardResult& fwd, std::span<const double> weights) {
  double acc = 0.0;
  if (model.hidden_size == 0) {
    for (const auto& e : x.entries) acc += weights[e.index] * e.value;
  } else {
    for (std::size_t j = 0; j < model.hidden_size; ++j) acc += weights[j] * fwd.hidden[j];
  }
  return acc;
}

// --- training -----------------------------------------------------------

namespace {

double cross_entropy(const ClassProbs& probs, int gold) {
  return -std::log(std::max(probs[gold], 1e-300));
}

void check_inputs(const FeatureMatrix& features, const std::vector<int>& labels,
                  const std::vector<std::string>& ids) {
  if (features.size() != labels.size()) throw DataError("features and labels differ in length");
  if (!ids.empty() && ids.size() != labels.size()) throw DataError("ids and labels differ in length");
  for (const auto& row : features.rows) {
    for (const auto& e : row.entries) {
      if (e.index >= features.dimension) throw DataError("feature index out of range");
    }
  }
}

}  // namespace

TrainResult train_probe(const FeatureMatrix& features, const std::vector<int>& labels,
                        const ProbeConfig& config, const std::vector<std::string>& ids) {
  config.validate();
  check_inputs(features, labels, ids);
  detail::require_two_classes(labels);

  TrainResult result;
  result.model = ProbeModel::initialized(features.dimension, config);
  detail::Network net(result.model);
  if (config.record_dynamics) result.dynamics.emplace();

  auto per_example = [&](std::size_t i, const FeatureVector&, const ForwardResult& fwd, double,
                         ClassProbs& dlogits, std::vector<double>&) {
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      dlogits[k] = fwd.probs[k] - (static_cast<int>(k) == labels[i] ? 1.0 : 0.0);
    }
  };
  auto after_epoch = [&](int epoch) {
    double loss = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
      const ForwardResult fwd = net.forward(features.rows[i]);
      loss += cross_entropy(fwd.probs, labels[i]);
      if (result.dynamics) {
        const double gold = fwd.probs[labels[i]];
        const int predicted = decide(fwd.prob_toxic()).label == Label::toxic ? 1 : 0;
        result.dynamics->push_back({ids.empty() ? std::to_string(i) : ids[i], epoch, gold,
                                    predicted == labels[i]});
      }
    }
    result.epoch_loss.push_back(loss / static_cast<double>(features.size()) +
                                net.weight_penalty(config.l2));
  };
  detail::run_epochs(net, features, config, per_example, [](double) {}, after_epoch);
  net.export_to(result.model);
  return result;
}

std::vector<int> labels_of(const Dataset& dataset) {
  std::vector<int> y;
  y.reserve(dataset.size());
  for (const auto& inst : dataset.instances) y.push_back(label_value(inst));
  return y;
}

std::vector<std::string> ids_of(const Dataset& dataset) {
  std::vector<std::string> ids;
  ids.reserve(dataset.size());
  for (const auto& inst : dataset.instances) ids.push_back(inst.id);
  return ids;
}

TrainResult train_probe(const Dataset& dataset, const Featurizer& featurizer,
                        const ProbeConfig& config) {
  const auto labels = labels_of(dataset);
  TrainResult r = train_probe(featurizer.apply(dataset), labels, config, ids_of(dataset));
  r.model.featurizer = featurizer;
  return r;
}

TrainResult train_probe(const Dataset& dataset, const FeatureSpace& space,
                        const ProbeConfig& config) {
  space.validate();
  return train_probe(dataset, Featurizer::hashed(space), config);
}

Prediction decide(double prob_toxic) {
  return {prob_toxic > 0.5 ? Label::toxic : Label::nontoxic, prob_toxic};
}

std::vector<Prediction> predict(const ProbeModel& model, const FeatureMatrix& features) {
  if (!model.is_finite()) throw DataError("model has non-finite parameters");
  std::vector<Prediction> out;
  out.reserve(features.size());
  for (const auto& row : features.rows) {
    check_indices(model, row);
    out.push_back(decide(forward_unchecked(model, row).prob_toxic()));
  }
  return out;
}

std::vector<Prediction> predict(const ProbeModel& model, const Dataset& dataset) {
  return predict(model, model.featurizer.apply(dataset));
}

std::vector<Prediction> predict(const ProbeModel& model, const Dataset& dataset,
                                const FeatureSpace& space) {
  return predict(model, featurize_dataset(dataset, space));
}

double probe_objective(const ProbeModel& model, const FeatureMatrix& features,
                       const std::vector<int>& labels, double l2) {
  double loss = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    loss += cross_entropy(forward_unchecked(model, features.rows[i]).probs, labels[i]);
  }
  double penalty = 0.0;
  for (double w : model.w1) penalty += w * w;
  for (double w : model.w2) penalty += w * w;
  return loss / static_cast<double>(features.size()) + l2 * penalty;
}

ProbeGradient probe_gradient(const ProbeModel& model, const FeatureMatrix& features,
                             const std::vector<int>& labels, double l2) {
  detail::Network net(model);
  const double weight = 1.0 / static_cast<double>(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto fwd = net.forward(features.rows[i]);
    ClassProbs d;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      d[k] = fwd.probs[k] - (static_cast<int>(k) == labels[i] ? 1.0 : 0.0);
    }
    net.backward(features.rows[i], fwd, d, {}, weight);
  }
  ProbeGradient g = net.pending_gradient();
  for (std::size_t i = 0; i < g.w1.size(); ++i) g.w1[i] += 2.0 * l2 * model.w1[i];
  for (std::size_t i = 0; i < g.w2.size(); ++i) g.w2[i] += 2.0 * l2 * model.w2[i];
  return g;
}

// --- bias-only models ---------------------------------------------------

std::string_view to_string(BiasKind kind) {
  switch (kind) {
    case BiasKind::toxtrig: return "toxtrig";
    case BiasKind::oni_only: return "oni_only";
    case BiasKind::noi_only: return "noi_only";
    case BiasKind::oi_only: return "oi_only";
    case BiasKind::dialect: return "dialect";
  }
  return "toxtrig";
}

std::optional<BiasKind> parse_bias_kind(std::string_view s) {
  for (auto k : {BiasKind::toxtrig, BiasKind::oni_only, BiasKind::noi_only, BiasKind::oi_only,
                 BiasKind::dialect}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

ProbeConfig default_bias_only_config(std::uint64_t seed) {
  ProbeConfig c;
  c.hidden_size = 0;
  c.epochs = 20;
  c.learning_rate = 0.5;
  c.batch_size = 32;
  c.l2 = 1e-4;
  c.seed = seed;
  return c;
}

Featurizer bias_featurizer(BiasKind kind, const Lexicon* lexicon) {
  Featurizer f;
  if (kind == BiasKind::dialect) {
    f.kind = FeatureKind::dialect;
    return f;
  }
  if (!lexicon || lexicon->empty()) {
    throw DataError(std::string("bias-only kind '") + std::string(to_string(kind)) +
                    "' requires a lexicon");
  }
  f.kind = FeatureKind::toxtrig;
  f.lexicon = *lexicon;
  switch (kind) {
    case BiasKind::oni_only: f.categories = {Category::OnI}; break;
    case BiasKind::noi_only: f.categories = {Category::nOI}; break;
    case BiasKind::oi_only: f.categories = {Category::OI}; break;
    default: break;
  }
  return f;
}

ProbeModel train_bias_only(const Dataset& dataset, BiasKind kind, const Lexicon* lexicon,
                           const ProbeConfig& config) {
  ProbeConfig linear = config;
  linear.hidden_size = 0;
  linear.record_dynamics = false;
  return train_probe(dataset, bias_featurizer(kind, lexicon), linear).model;
}

// --- files ----------------------------------------------------------------

void save_probe(const ProbeModel& model, const std::filesystem::path& path) {
  json header = {{"format", "toxdebias.probe"},
                 {"input_dim", model.input_dim},
                 {"hidden_size", model.hidden_size},
                 {"config", model.config.to_json()},
                 {"featurizer", model.featurizer.to_json()}};
  write_file(path, encode_array_file(header, {{"w1", &model.w1},
                                              {"b1", &model.b1},
                                              {"w2", &model.w2},
                                              {"b2", &model.b2}}));
}

ProbeModel load_probe(const std::filesystem::path& path) {
  const ArrayFile file = decode_array_file(read_file(path));
  if (file.header.value("format", "") != "toxdebias.probe") {
    throw DataError("'" + path.string() + "' is not a probe model file");
  }
  ProbeModel m;
  m.input_dim = file.header.at("input_dim").get<std::uint32_t>();
  m.hidden_size = file.header.at("hidden_size").get<std::size_t>();
  m.config = ProbeConfig::from_json(file.header.at("config"));
  m.featurizer = Featurizer::from_json(file.header.at("featurizer"));
  m.w1 = file.at("w1");
  m.b1 = file.at("b1");
  m.w2 = file.at("w2");
  m.b2 = file.at("b2");
  const std::size_t rep = m.representation_size();
  if (m.w2.size() != kNumClasses * rep || m.b2.size() != kNumClasses ||
      m.w1.size() != static_cast<std::size_t>(m.input_dim) * m.hidden_size ||
      m.b1.size() != m.hidden_size) {
    throw DataError("'" + path.string() + "': parameter shapes do not match header");
  }
  return m;
}

std::string dynamics_to_jsonl(const DynamicsLog& log) {
  std::string out;
  for (const auto& r : log) {
    json j = {{"id", r.id}, {"epoch", r.epoch}, {"prob_gold", r.prob_gold}, {"correct", r.correct}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

DynamicsLog parse_dynamics_jsonl(std::string_view content) {
  DynamicsLog log;
  std::size_t line = 0;
  for (auto row : split_lines(content)) {
    ++line;
    if (trim(row).empty()) continue;
    try {
      const json j = json::parse(row);
      DynamicsRecord r;
      r.id = j.at("id").get<std::string>();
      r.epoch = j.at("epoch").get<int>();
      r.prob_gold = j.at("prob_gold").get<double>();
      r.correct = j.at("correct").get<bool>();
      if (!std::isfinite(r.prob_gold) || r.prob_gold < 0.0 || r.prob_gold > 1.0) {
        throw DataError("prob_gold outside [0,1]");
      }
      log.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw DataError("dynamics line " + std::to_string(line) + ": " + e.what());
    }
  }
  return log;
}

void save_dynamics(const DynamicsLog& log, const std::filesystem::path& path) {
  write_file(path, dynamics_to_jsonl(log));
}

DynamicsLog load_dynamics(const std::filesystem::path& path) {
  return parse_dynamics_jsonl(read_file(path));
}

std::string predictions_to_jsonl(const Dataset& dataset, const std::vector<Prediction>& preds) {
  if (dataset.size() != preds.size()) throw DataError("predictions do not match dataset size");
  std::string out;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    json j = {{"id", dataset[i].id},
              {"label", to_string(preds[i].label)},
              {"prob_toxic", preds[i].prob_toxic}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<Prediction> parse_predictions_jsonl(std::string_view content, const Dataset& dataset) {
  std::unordered_map<std::string, Prediction> by_id;
  std::size_t line = 0;
  for (auto row : split_lines(content)) {
    ++line;
    if (trim(row).empty()) continue;
    try {
      const json j = json::parse(row);
      Prediction p;
      auto label = parse_label(j.at("label").get<std::string>());
      if (!label || *label == Label::unlabeled) throw DataError("label must be toxic or nontoxic");
      p.label = *label;
      p.prob_toxic = j.value("prob_toxic", p.label == Label::toxic ? 1.0 : 0.0);
      by_id[j.at("id").get<std::string>()] = p;
    } catch (const std::exception& e) {
      throw DataError("predictions line " + std::to_string(line) + ": " + e.what());
    }
  }
  std::vector<Prediction> out;
  out.reserve(dataset.size());
  for (const auto& inst : dataset.instances) {
    auto it = by_id.find(inst.id);
    if (it == by_id.end()) throw DataError("no prediction for instance '" + inst.id + "'");
    out.push_back(it->second);
  }
  return out;
}

}  // namespace toxdebias

#include "toxdebias/biasmetrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "toxdebias/errors.hpp"
#include "toxdebias/text_io.hpp"

namespace toxdebias {

using nlohmann::json;

double pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw UndefinedStatistic("correlation inputs differ in length");
  if (x.size() < 2) throw UndefinedStatistic("correlation needs at least 2 observations");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedStatistic("correlation undefined: zero variance");
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

ClassificationMetrics classification_metrics(const std::vector<int>& preds,
                                             const std::vector<int>& golds) {
  if (preds.size() != golds.size()) throw DataError("predictions and golds differ in length");
  if (preds.empty()) throw DataError("classification metrics need at least one instance");
  std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == golds[i]) ++correct;
    if (preds[i] == 1 && golds[i] == 1) ++tp;
    if (preds[i] == 1 && golds[i] == 0) ++fp;
    if (preds[i] == 0 && golds[i] == 1) ++fn;
  }
  ClassificationMetrics m;
  m.n = preds.size();
  m.accuracy = static_cast<double>(correct) / static_cast<double>(m.n);
  m.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  if (m.precision + m.recall == 0.0) {
    m.f1_toxic = 0.0;
    m.f1_degenerate = true;
  } else {
    m.f1_toxic = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  return m;
}

double subset_fpr(const std::vector<int>& preds, const std::vector<int>& golds,
                  const std::vector<int>& mask) {
  if (preds.size() != golds.size() || mask.size() != golds.size()) {
    throw DataError("predictions, golds and mask differ in length");
  }
  std::size_t fp = 0, negatives = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!mask[i] || golds[i] != 0) continue;
    ++negatives;
    if (preds[i] == 1) ++fp;
  }
  if (negatives == 0) throw UndefinedStatistic("FPR undefined: no gold-negative instance in subset");
  return static_cast<double>(fp) / static_cast<double>(negatives);
}

namespace {

std::vector<int> aae_mask(const Dataset& dataset) {
  std::vector<int> mask(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    mask[i] = argmax_dialect(dataset[i]) == Dialect::aae ? 1 : 0;
  }
  return mask;
}

template <typename F>
auto nullable(F&& f) -> std::optional<decltype(f())> {
  try {
    return f();
  } catch (const UndefinedStatistic&) {
    return std::nullopt;
  }
}

bool all_labeled(const Dataset& d) {
  for (const auto& inst : d.instances) {
    if (inst.label == Label::unlabeled) return false;
  }
  return !d.empty();
}

bool all_have_dialect(const Dataset& d) {
  for (const auto& inst : d.instances) {
    if (!inst.dialect) return false;
  }
  return !d.empty();
}

std::vector<double> as_real(const std::vector<int>& v) { return {v.begin(), v.end()}; }

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> get_opt(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

}  // namespace

std::vector<int> prediction_values(const std::vector<Prediction>& preds) {
  std::vector<int> out;
  out.reserve(preds.size());
  for (const auto& p : preds) out.push_back(p.label == Label::toxic ? 1 : 0);
  return out;
}

double dialect_fpr(const std::vector<int>& preds, const Dataset& dataset) {
  return subset_fpr(preds, labels_of(dataset), aae_mask(dataset));
}

Disparity disparity_from_rates(double w_rate, double aa_rate) {
  Disparity d;
  d.w_rate = w_rate;
  d.aa_rate = aa_rate;
  d.delta = aa_rate - w_rate;
  if (w_rate > 0.0) d.ratio = aa_rate / w_rate;
  return d;
}

Disparity race_disparity(const std::vector<int>& preds, const Dataset& dataset) {
  if (preds.size() != dataset.size()) throw DataError("predictions do not match dataset size");
  std::size_t n[2] = {0, 0}, flagged[2] = {0, 0};
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& g = dataset[i].author_group;
    if (!g) continue;
    const int k = *g == AuthorGroup::white ? 0 : 1;
    ++n[k];
    if (preds[i] == 1) ++flagged[k];
  }
  if (n[0] == 0) throw UndefinedStatistic("no instances by white authors");
  if (n[1] == 0) throw UndefinedStatistic("no instances by African American authors");
  Disparity d = disparity_from_rates(static_cast<double>(flagged[0]) / static_cast<double>(n[0]),
                                     static_cast<double>(flagged[1]) / static_cast<double>(n[1]));
  d.n_white = n[0];
  d.n_african_american = n[1];
  return d;
}

BiasReport dataset_association_report(const Dataset& dataset, const Lexicon& lexicon) {
  BiasReport r;
  r.name = dataset.split_name;
  r.n = dataset.size();
  const auto labels = as_real(labels_of(dataset));
  const auto presence = presence_matrix(dataset, lexicon);
  for (int c = 0; c < 3; ++c) {
    r.category_counts[c] = static_cast<std::size_t>(
        std::count(presence[c].begin(), presence[c].end(), 1));
    r.r_category[c] = nullable([&] { return pearson_r(labels, as_real(presence[c])); });
  }
  if (all_have_dialect(dataset)) {
    std::vector<double> p_aae;
    p_aae.reserve(dataset.size());
    for (const auto& inst : dataset.instances) p_aae.push_back((*inst.dialect)[Dialect::aae]);
    r.r_aae = nullable([&] { return pearson_r(labels, p_aae); });
    const auto mask = aae_mask(dataset);
    r.aae_count = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
  }
  return r;
}

BiasReport full_report(const std::vector<Prediction>& preds, const Dataset& dataset,
                       const Lexicon& lexicon, const ReportInputs& extra) {
  if (preds.size() != dataset.size()) throw DataError("predictions do not match dataset size");
  BiasReport r;
  r.name = dataset.split_name;
  r.n = dataset.size();
  const auto p = prediction_values(preds);
  const bool labeled = all_labeled(dataset);
  const bool dialects = all_have_dialect(dataset);
  const auto presence = presence_matrix(dataset, lexicon);
  for (int c = 0; c < 3; ++c) {
    r.category_counts[c] = static_cast<std::size_t>(
        std::count(presence[c].begin(), presence[c].end(), 1));
  }
  if (dialects) {
    const auto mask = aae_mask(dataset);
    r.aae_count = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
  }
  if (labeled) {
    const auto golds = labels_of(dataset);
    const auto m = classification_metrics(p, golds);
    r.accuracy = m.accuracy;
    r.f1_toxic = m.f1_toxic;
    r.f1_degenerate = m.f1_degenerate;
    const auto assoc = dataset_association_report(dataset, lexicon);
    r.r_category = assoc.r_category;
    r.r_aae = assoc.r_aae;
    for (int c = 0; c < 3; ++c) {
      r.fpr_category[c] = nullable([&] { return subset_fpr(p, golds, presence[c]); });
      std::vector<int> sp, sg;
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (presence[c][i]) {
          sp.push_back(p[i]);
          sg.push_back(golds[i]);
        }
      }
      if (!sp.empty()) r.f1_category[c] = classification_metrics(sp, sg).f1_toxic;
    }
    if (dialects) r.fpr_aae = nullable([&] { return dialect_fpr(p, dataset); });
  }
  r.disparity = nullable([&] { return race_disparity(p, dataset); });
  if (extra.challenge && extra.challenge_preds) {
    const auto m = classification_metrics(prediction_values(*extra.challenge_preds),
                                          labels_of(*extra.challenge));
    r.challenge_f1 = m.f1_toxic;
    r.challenge_accuracy = m.accuracy;
  }
  return r;
}

json BiasReport::to_json() const {
  json cats = json::object();
  for (auto c : kCategories) {
    const int k = static_cast<int>(c);
    cats[std::string(to_string(c))] = {{"r", opt(r_category[k])},
                                       {"fpr", opt(fpr_category[k])},
                                       {"f1", opt(f1_category[k])},
                                       {"count", category_counts[k]}};
  }
  json j = {{"schema_version", kSchemaVersion},
            {"name", name},
            {"n", n},
            {"categories", cats},
            {"r_aae", opt(r_aae)},
            {"fpr_aae", opt(fpr_aae)},
            {"aae_count", aae_count},
            {"accuracy", opt(accuracy)},
            {"f1_toxic", opt(f1_toxic)},
            {"f1_degenerate", f1_degenerate},
            {"challenge_f1", opt(challenge_f1)},
            {"challenge_accuracy", opt(challenge_accuracy)}};
  if (disparity) {
    j["disparity"] = {{"w_rate", disparity->w_rate},
                      {"aa_rate", disparity->aa_rate},
                      {"delta", disparity->delta},
                      {"ratio", opt(disparity->ratio)},
                      {"n_white", disparity->n_white},
                      {"n_african_american", disparity->n_african_american}};
  } else {
    j["disparity"] = nullptr;
  }
  return j;
}

BiasReport BiasReport::from_json(const json& j) {
  if (j.value("schema_version", 0) != kSchemaVersion) {
    throw DataError("unsupported report schema version");
  }
  BiasReport r;
  r.name = j.value("name", "");
  r.n = j.at("n").get<std::size_t>();
  for (auto c : kCategories) {
    const int k = static_cast<int>(c);
    const auto& cj = j.at("categories").at(std::string(to_string(c)));
    r.r_category[k] = get_opt(cj, "r");
    r.fpr_category[k] = get_opt(cj, "fpr");
    r.f1_category[k] = get_opt(cj, "f1");
    r.category_counts[k] = cj.at("count").get<std::size_t>();
  }
  r.r_aae = get_opt(j, "r_aae");
  r.fpr_aae = get_opt(j, "fpr_aae");
  r.aae_count = j.value("aae_count", std::size_t{0});
  r.accuracy = get_opt(j, "accuracy");
  r.f1_toxic = get_opt(j, "f1_toxic");
  r.f1_degenerate = j.value("f1_degenerate", false);
  r.challenge_f1 = get_opt(j, "challenge_f1");
  r.challenge_accuracy = get_opt(j, "challenge_accuracy");
  if (auto it = j.find("disparity"); it != j.end() && !it->is_null()) {
    Disparity d;
    d.w_rate = it->at("w_rate").get<double>();
    d.aa_rate = it->at("aa_rate").get<double>();
    d.delta = it->at("delta").get<double>();
    d.ratio = get_opt(*it, "ratio");
    d.n_white = it->value("n_white", std::size_t{0});
    d.n_african_american = it->value("n_african_american", std::size_t{0});
    r.disparity = d;
  }
  return r;
}

bool operator==(const BiasReport& a, const BiasReport& b) { return a.to_json() == b.to_json(); }

namespace {

std::string cell_pct(const std::optional<double>& v) { return v ? format_percent(*v) : "n/a"; }

std::string cell_fixed(const std::optional<double>& v, int digits) {
  if (!v) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, *v);
  return buf;
}

void row(std::ostringstream& os, const std::vector<std::string>& cells) {
  os << '|';
  for (const auto& c : cells) os << ' ' << c << " |";
  os << '\n';
}

void header(std::ostringstream& os, const std::vector<std::string>& cells) {
  row(os, cells);
  os << '|';
  for (std::size_t i = 0; i < cells.size(); ++i) os << (i == 0 ? " --- |" : " ---: |");
  os << '\n';
}

}  // namespace

std::string render_markdown(const std::vector<BiasReport>& reports) {
  std::ostringstream os;
  auto any = [&](auto pred) { return std::any_of(reports.begin(), reports.end(), pred); };

  if (any([](const BiasReport& r) { return r.r_category[0] || r.r_category[1] || r.r_category[2] || r.r_aae; })) {
    os << "### Associations with toxicity (Pearson R)\n\n";
    header(os, {"Dataset", "R_nOI", "R_OI", "R_OnI", "R_AAE"});
    for (const auto& r : reports) {
      row(os, {r.name, cell_fixed(r.r_category[0], 4), cell_fixed(r.r_category[1], 4),
               cell_fixed(r.r_category[2], 4), cell_fixed(r.r_aae, 4)});
    }
    os << '\n';
  }
  if (any([](const BiasReport& r) { return r.accuracy.has_value(); })) {
    os << "### Lexical bias (test)\n\n";
    header(os, {"Model", "Acc.", "F1", "F1 nOI", "FPR nOI", "F1 OI", "FPR OI", "F1 OnI", "FPR OnI",
                "Challenge F1"});
    for (const auto& r : reports) {
      row(os, {r.name, cell_pct(r.accuracy), cell_pct(r.f1_toxic), cell_pct(r.f1_category[0]),
               cell_pct(r.fpr_category[0]), cell_pct(r.f1_category[1]), cell_pct(r.fpr_category[1]),
               cell_pct(r.f1_category[2]), cell_pct(r.fpr_category[2]), cell_pct(r.challenge_f1)});
    }
    row(os, {"count", "", "", std::to_string(reports.front().category_counts[0]), "",
             std::to_string(reports.front().category_counts[1]), "",
             std::to_string(reports.front().category_counts[2]), "", ""});
    os << '\n';
  }
  if (any([](const BiasReport& r) { return r.fpr_aae.has_value(); })) {
    os << "### Dialectal bias (test)\n\n";
    header(os, {"Model", "R_AAE", "Acc.", "F1", "FPR_AAE"});
    for (const auto& r : reports) {
      row(os, {r.name, cell_fixed(r.r_aae, 4), cell_pct(r.accuracy), cell_pct(r.f1_toxic),
               cell_pct(r.fpr_aae)});
    }
    os << '\n';
  }
  if (any([](const BiasReport& r) { return r.disparity.has_value(); })) {
    os << "### Racial disparity in toxicity prediction\n\n";
    header(os, {"Model", "W-Tox.", "AA-Tox.", "Delta", "AA/W"});
    for (const auto& r : reports) {
      if (!r.disparity) {
        row(os, {r.name, "n/a", "n/a", "n/a", "n/a"});
        continue;
      }
      const auto& d = *r.disparity;
      row(os, {r.name, format_percent(d.w_rate), format_percent(d.aa_rate),
               format_percent(d.delta), cell_fixed(d.ratio, 2)});
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace toxdebias

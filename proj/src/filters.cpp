#include "toxdebias/filters.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "toxdebias/errors.hpp"
#include "toxdebias/rng.hpp"
#include "toxdebias/text_io.hpp"

namespace toxdebias {

using nlohmann::json;

json FilterManifest::to_json() const {
  json removed_j = json::array();
  for (const auto& r : removed) {
    removed_j.push_back({{"id", r.id},
                         {"score", r.score ? json(*r.score) : json(nullptr)},
                         {"iteration", r.iteration}});
  }
  json stats_j = json::array();
  for (const auto& s : stats) {
    stats_j.push_back({{"iteration", s.iteration},
                       {"size", s.size},
                       {"mean_score", s.mean_score},
                       {"nontoxic", s.class_counts[0]},
                       {"toxic", s.class_counts[1]},
                       {"above_threshold", s.above_threshold},
                       {"removed", s.removed}});
  }
  return {{"method", method},
          {"retained", retained_ids},
          {"removed", removed_j},
          {"config", config},
          {"stats", stats_j},
          {"threshold_never_met", threshold_never_met}};
}

FilterManifest FilterManifest::from_json(const json& j) {
  FilterManifest m;
  m.method = j.value("method", "");
  m.retained_ids = j.at("retained").get<std::vector<std::string>>();
  for (const auto& r : j.at("removed")) {
    RemovedInstance ri;
    ri.id = r.at("id").get<std::string>();
    if (!r.at("score").is_null()) ri.score = r.at("score").get<double>();
    ri.iteration = r.at("iteration").get<int>();
    m.removed.push_back(std::move(ri));
  }
  m.config = j.value("config", json::object());
  for (const auto& s : j.value("stats", json::array())) {
    IterationStats st;
    st.iteration = s.at("iteration").get<int>();
    st.size = s.at("size").get<std::size_t>();
    st.mean_score = s.at("mean_score").get<double>();
    st.class_counts = {s.at("nontoxic").get<std::size_t>(), s.at("toxic").get<std::size_t>()};
    st.above_threshold = s.at("above_threshold").get<std::size_t>();
    st.removed = s.at("removed").get<std::size_t>();
    m.stats.push_back(st);
  }
  m.threshold_never_met = j.value("threshold_never_met", false);
  return m;
}

void save_manifest(const FilterManifest& manifest, const std::filesystem::path& path) {
  write_file(path, manifest.to_json().dump(2) + "\n");
}

FilterManifest load_manifest(const std::filesystem::path& path) {
  try {
    return FilterManifest::from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed manifest: " + e.what());
  }
}

void check_partition(const FilterManifest& manifest, const Dataset& dataset) {
  std::unordered_set<std::string> ids;
  for (const auto& inst : dataset.instances) ids.insert(inst.id);
  std::unordered_set<std::string> seen;
  auto visit = [&](const std::string& id) {
    if (!ids.contains(id)) throw DataError("manifest id '" + id + "' is not in the dataset");
    if (!seen.insert(id).second) throw DataError("manifest lists id '" + id + "' twice");
  };
  for (const auto& id : manifest.retained_ids) visit(id);
  for (const auto& r : manifest.removed) visit(r.id);
  if (seen.size() != ids.size()) throw DataError("manifest does not cover every dataset id");
}

Dataset apply_manifest(const Dataset& dataset, const FilterManifest& manifest) {
  std::unordered_set<std::string> keep(manifest.retained_ids.begin(), manifest.retained_ids.end());
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (keep.contains(dataset[i].id)) idx.push_back(i);
  }
  if (idx.size() != keep.size()) throw DataError("manifest retains ids missing from the dataset");
  return subset(dataset, idx);
}

FilterManifest manifest_from_indices(const Dataset& dataset, const std::vector<std::size_t>& kept,
                                     std::string method) {
  FilterManifest m;
  m.method = std::move(method);
  std::vector<char> is_kept(dataset.size(), 0);
  for (std::size_t i : kept) is_kept.at(i) = 1;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (is_kept[i]) {
      m.retained_ids.push_back(dataset[i].id);
    } else {
      m.removed.push_back({dataset[i].id, std::nullopt, 0});
    }
  }
  return m;
}

ProbeConfig AFLiteConfig::default_member_config() {
  ProbeConfig c;
  c.hidden_size = 0;
  c.epochs = 3;
  c.learning_rate = 0.5;
  c.batch_size = 32;
  c.l2 = 1e-4;
  return c;
}

void AFLiteConfig::validate() const {
  if (!(target_fraction > 0.0 && target_fraction < 1.0)) {
    throw UsageError("AFLite target fraction must be in (0, 1)");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw UsageError("AFLite train fraction must be in (0, 1)");
  }
  if (!(threshold > 0.0)) throw UsageError("AFLite threshold must be positive");
  if (!(removal_cap > 0.0 && removal_cap <= 1.0)) {
    throw UsageError("AFLite removal cap must be in (0, 1]");
  }
  if (ensemble_size < 2) throw UsageError("AFLite ensemble size must be at least 2");
  member.validate();
}

json AFLiteConfig::to_json() const {
  return {{"target_fraction", target_fraction},
          {"ensemble_size", ensemble_size},
          {"train_fraction", train_fraction},
          {"threshold", threshold},
          {"removal_cap", removal_cap},
          {"min_out_of_sample_evals", min_out_of_sample_evals},
          {"seed", seed},
          {"preserve_label_proportions", preserve_label_proportions},
          {"member", member.to_json()}};
}

PredictabilityScores predictability_scores(const FeatureMatrix& features,
                                           const std::vector<int>& labels, std::size_t m,
                                           double train_fraction, std::size_t min_evals,
                                           std::uint64_t seed, const ProbeConfig& member,
                                           std::size_t jobs) {
  const std::size_t n = features.size();
  if (n != labels.size()) throw DataError("features and labels differ in length");
  if (n < 10) throw DataError("predictability scores need at least 10 instances");
  {
    const auto ones = std::count(labels.begin(), labels.end(), 1);
    if (ones == 0 || static_cast<std::size_t>(ones) == n) {
      throw DataError("predictability scores need both classes");
    }
  }
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n))), 1, n - 1);

  // Per round: +1 correct, -1 wrong, 0 in the training split.
  std::vector<std::vector<signed char>> outcome(m);
  auto run_round = [&](std::size_t r) {
    Rng rng(derive_seed(seed, 0x524f554e44ULL, r));  // "ROUND"
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span(perm));
    std::vector<std::size_t> train(perm.begin(), perm.begin() + n_train);
    std::sort(train.begin(), train.end());
    std::vector<int> y;
    y.reserve(train.size());
    for (std::size_t i : train) y.push_back(labels[i]);
    auto& out = outcome[r];
    out.assign(n, 0);
    const bool has_both = std::count(y.begin(), y.end(), 1) > 0 &&
                          std::count(y.begin(), y.end(), 0) > 0;
    if (!has_both) return;
    ProbeConfig cfg = member;
    cfg.hidden_size = 0;
    cfg.record_dynamics = false;
    cfg.seed = derive_seed(seed, 0x4d454d424552ULL, r);  // "MEMBER"
    const ProbeModel model = train_probe(features.select(train), y, cfg).model;
    std::vector<std::size_t> held(perm.begin() + n_train, perm.end());
    const auto preds = predict(model, features.select(held));
    for (std::size_t h = 0; h < held.size(); ++h) {
      const int p = preds[h].label == Label::toxic ? 1 : 0;
      out[held[h]] = p == labels[held[h]] ? 1 : -1;
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, m));
  if (workers == 1) {
    for (std::size_t r = 0; r < m; ++r) run_round(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t r = next++; r < m; r = next++) run_round(r);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  PredictabilityScores s;
  s.score.assign(n, 0.0);
  s.correct.assign(n, 0);
  s.evaluations.assign(n, 0);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      if (outcome[r][i] == 0) continue;
      ++s.evaluations[i];
      if (outcome[r][i] > 0) ++s.correct[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (s.evaluations[i] >= std::max<std::size_t>(min_evals, 1)) {
      s.score[i] = static_cast<double>(s.correct[i]) / static_cast<double>(s.evaluations[i]);
    }
  }
  return s;
}

FilterManifest aflite_filter(const Dataset& dataset, const FeatureMatrix& features,
                             const AFLiteConfig& config) {
  config.validate();
  if (features.size() != dataset.size()) throw DataError("features do not match dataset size");
  const auto labels = labels_of(dataset);
  const std::size_t n = dataset.size();

  // Target sizes, per class when preserving proportions.
  std::array<std::size_t, 2> target_c{};
  std::size_t target_total;
  if (config.preserve_label_proportions) {
    target_c = class_quotas(dataset, config.target_fraction);
    target_total = target_c[0] + target_c[1];
  } else {
    target_total = static_cast<std::size_t>(
        std::llround(config.target_fraction * static_cast<double>(n)));
    if (target_total == 0) throw DataError("target fraction leaves no instances");
  }

  FilterManifest manifest;
  manifest.method = "aflite";
  manifest.config = config.to_json();

  std::vector<std::size_t> current(n);
  std::iota(current.begin(), current.end(), 0);
  std::vector<double> last_score(n, 0.0);
  std::vector<std::size_t> removal_order;  // dataset indices
  std::vector<int> removal_iteration;

  auto class_counts = [&](const std::vector<std::size_t>& idx) {
    std::array<std::size_t, 2> c{};
    for (std::size_t i : idx) ++c[labels[i]];
    return c;
  };

  int iteration = 0;
  while (current.size() > target_total) {
    ++iteration;
    std::vector<int> y;
    y.reserve(current.size());
    for (std::size_t i : current) y.push_back(labels[i]);
    const auto scores = predictability_scores(
        features.select(current), y, config.ensemble_size, config.train_fraction,
        config.min_out_of_sample_evals, derive_seed(config.seed, 0x4954ULL, iteration),
        config.member, config.jobs);

    IterationStats st;
    st.iteration = iteration;
    st.size = current.size();
    st.class_counts = class_counts(current);
    st.mean_score = std::accumulate(scores.score.begin(), scores.score.end(), 0.0) /
                    static_cast<double>(current.size());

    // Candidates at or above the threshold, most predictable first.
    std::vector<std::size_t> cand;  // positions in `current`
    for (std::size_t p = 0; p < current.size(); ++p) {
      last_score[current[p]] = scores.score[p];
      if (scores.score[p] >= config.threshold) cand.push_back(p);
    }
    st.above_threshold = cand.size();
    std::stable_sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) {
      return scores.score[a] > scores.score[b];
    });

    std::size_t budget = std::max<std::size_t>(
        1, static_cast<std::size_t>(config.removal_cap * static_cast<double>(current.size())));
    budget = std::min(budget, current.size() - target_total);

    std::vector<char> drop(current.size(), 0);
    std::size_t dropped = 0;
    if (config.preserve_label_proportions) {
      const auto counts = st.class_counts;
      const double frac = static_cast<double>(budget) / static_cast<double>(current.size());
      auto quota = largest_remainder_quotas({counts[0], counts[1]}, frac);
      for (int c = 0; c < 2; ++c) quota[c] = std::min(quota[c], counts[c] - target_c[c]);
      std::array<std::size_t, 2> taken{};
      for (std::size_t p : cand) {
        const int c = y[p];
        if (taken[c] < quota[c]) {
          drop[p] = 1;
          ++taken[c];
          ++dropped;
        }
      }
    } else {
      for (std::size_t k = 0; k < cand.size() && dropped < budget; ++k) {
        drop[cand[k]] = 1;
        ++dropped;
      }
    }
    st.removed = dropped;
    manifest.stats.push_back(st);
    if (dropped == 0) {
      if (iteration == 1 && cand.empty()) manifest.threshold_never_met = true;
      break;
    }
    for (std::size_t p : cand) {
      if (drop[p]) {
        removal_order.push_back(current[p]);
        removal_iteration.push_back(iteration);
      }
    }
    std::vector<std::size_t> next;
    next.reserve(current.size() - dropped);
    for (std::size_t p = 0; p < current.size(); ++p) {
      if (!drop[p]) next.push_back(current[p]);
    }
    current = std::move(next);
  }

  // Exact target size: sample down if filtering stopped early, or restore the
  // latest (least predictable) removals if a class fell short.
  std::vector<char> restored(removal_order.size(), 0);
  auto restore = [&](int cls, std::size_t count) {
    for (std::size_t k = removal_order.size(); k-- > 0 && count > 0;) {
      if (!restored[k] && (cls < 0 || labels[removal_order[k]] == cls)) {
        restored[k] = 1;
        current.push_back(removal_order[k]);
        --count;
      }
    }
  };
  std::vector<std::size_t> downsampled;
  Rng rng(derive_seed(config.seed, 0x46494e414cULL));  // "FINAL"
  if (config.preserve_label_proportions) {
    const auto counts = class_counts(current);
    for (int c = 0; c < 2; ++c) {
      if (counts[c] < target_c[c]) restore(c, target_c[c] - counts[c]);
    }
    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i : current) by_class[labels[i]].push_back(i);
    current.clear();
    for (int c = 0; c < 2; ++c) {
      auto& v = by_class[c];
      std::sort(v.begin(), v.end());
      if (v.size() > target_c[c]) {
        rng.shuffle(std::span(v));
        downsampled.insert(downsampled.end(), v.begin() + target_c[c], v.end());
        v.resize(target_c[c]);
      }
      current.insert(current.end(), v.begin(), v.end());
    }
  } else {
    if (current.size() < target_total) restore(-1, target_total - current.size());
    std::sort(current.begin(), current.end());
    if (current.size() > target_total) {
      rng.shuffle(std::span(current));
      downsampled.assign(current.begin() + target_total, current.end());
      current.resize(target_total);
    }
  }
  std::sort(current.begin(), current.end());
  std::sort(downsampled.begin(), downsampled.end());

  std::vector<char> kept(n, 0);
  for (std::size_t i : current) kept[i] = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (kept[i]) manifest.retained_ids.push_back(dataset[i].id);
  }
  for (std::size_t k = 0; k < removal_order.size(); ++k) {
    if (restored[k]) continue;
    const std::size_t i = removal_order[k];
    manifest.removed.push_back({dataset[i].id, last_score[i], removal_iteration[k]});
  }
  for (std::size_t i : downsampled) {
    manifest.removed.push_back({dataset[i].id, last_score[i], 0});
  }
  return manifest;
}

FilterManifest aflite_filter(const Dataset& dataset, const FeatureSpace& space,
                             const AFLiteConfig& config) {
  return aflite_filter(dataset, featurize_dataset(dataset, space), config);
}

FilterManifest random_filter(const Dataset& dataset, double target_fraction, std::uint64_t seed,
                             bool preserve_label_proportions) {
  SamplingSpec spec{target_fraction, preserve_label_proportions, seed};
  FilterManifest m =
      manifest_from_indices(dataset, stratified_sample_indices(dataset, spec), "random");
  m.config = {{"target_fraction", target_fraction},
              {"seed", seed},
              {"preserve_label_proportions", preserve_label_proportions}};
  return m;
}

}  // namespace toxdebias

// toxdebias: file-staged pipeline for measuring and reducing lexical and
// dialectal bias in toxicity corpora.

#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "toxdebias/biasmetrics.hpp"
#include "toxdebias/cartography.hpp"
#include "toxdebias/corpus.hpp"
#include "toxdebias/errors.hpp"
#include "toxdebias/features.hpp"
#include "toxdebias/filters.hpp"
#include "toxdebias/lexicon.hpp"
#include "toxdebias/lmixin.hpp"
#include "toxdebias/probe.hpp"
#include "toxdebias/relabel.hpp"
#include "toxdebias/synth.hpp"
#include "toxdebias/text_io.hpp"

using namespace toxdebias;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };
Level g_level = Level::info;

template <typename... Args>
void log(Level level, const Args&... args) {
  if (level > g_level) return;
  static constexpr const char* kNames[] = {"error", "warn", "info", "debug"};
  std::ostringstream os;
  os << "[" << kNames[static_cast<int>(level)] << "] ";
  (os << ... << args);
  std::cerr << os.str() << '\n';
}

struct Globals {
  std::size_t jobs = 1;
  std::string log_level = "info";
  bool print_config = false;
};

DatasetFormat format_for(const fs::path& path, const std::string& explicit_format) {
  if (!explicit_format.empty()) {
    auto f = parse_format(explicit_format);
    if (!f) throw UsageError("unknown format '" + explicit_format + "'");
    return *f;
  }
  return path.extension() == ".tsv" ? DatasetFormat::tsv : DatasetFormat::jsonl;
}

Dataset load(const fs::path& path, const std::string& format = {}) {
  return load_dataset(path, format_for(path, format));
}

void save(const Dataset& d, const fs::path& path) {
  save_dataset(d, path, format_for(path, {}));
}

Lexicon lexicon_or_default(const std::string& path) {
  return path.empty() ? default_lexicon() : load_lexicon(path);
}

// Resolved configuration lands next to the primary output.
void write_config(const fs::path& output, const json& config) {
  write_file(output.string() + ".config.json", config.dump(2) + "\n");
}

struct ProbeFlags {
  std::size_t hidden = 0;
  int epochs = 6;
  double lr = 0.1;
  std::size_t batch = 32;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
  int dim_bits = 18;
  std::vector<int> ngrams = {1, 2};
  std::uint64_t hash_seed = 0;
  bool no_normalize = false;

  void add(CLI::App* app) {
    app->add_option("--hidden", hidden, "Hidden units (0 = linear)")->capture_default_str();
    app->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    app->add_option("--lr", lr, "Learning rate")->capture_default_str();
    app->add_option("--batch-size", batch, "Mini-batch size")->capture_default_str();
    app->add_option("--l2", l2, "L2 penalty on weights")->capture_default_str();
    app->add_option("--seed", seed, "Random seed")->capture_default_str();
    app->add_option("--dim-bits", dim_bits, "log2 of the hashed feature dimension")
        ->capture_default_str()
        ->check(CLI::Range(1, 30));
    app->add_option("--ngrams", ngrams, "Token n-gram orders")->delimiter(',')->capture_default_str();
    app->add_option("--hash-seed", hash_seed, "Feature hashing seed")->capture_default_str();
    app->add_flag("--no-normalize", no_normalize, "Skip L2 normalization of feature vectors");
  }

  ProbeConfig config() const {
    ProbeConfig c;
    c.hidden_size = hidden;
    c.epochs = epochs;
    c.learning_rate = lr;
    c.batch_size = batch;
    c.l2 = l2;
    c.seed = seed;
    c.validate();
    return c;
  }

  FeatureSpace space() const {
    FeatureSpace s;
    s.dimension = 1u << dim_bits;
    s.ngram_orders = std::set<int>(ngrams.begin(), ngrams.end());
    s.hash_seed = hash_seed;
    s.l2_normalize = !no_normalize;
    s.validate();
    return s;
  }
};

BiasKind bias_kind_or_throw(const std::string& s) {
  auto k = parse_bias_kind(s);
  if (!k) throw UsageError("unknown bias kind '" + s + "'");
  return *k;
}

// Reports a configuration and stops when --print-config was given.
bool printed(const Globals& g, const json& config) {
  if (!g.print_config) return false;
  std::cout << config.dump(2) << '\n';
  return true;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"toxdebias: bias measurement and debiasing for toxicity corpora"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--jobs", g.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--log-level", g.log_level, "error, warn, info or debug")
      ->capture_default_str()
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));
  app.add_flag("--print-config", g.print_config, "Print the resolved configuration and exit");

  std::function<int()> action;

  // ingest
  struct {
    std::string in, out, format;
    double fraction = 1.0;
    std::uint64_t seed = 0;
    bool no_preserve = false;
  } ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Validate a corpus, fold annotator labels, optionally subsample");
  c_ingest->add_option("--in", ingest.in, "Input corpus (.jsonl or .tsv)")->required();
  c_ingest->add_option("--out", ingest.out, "Output corpus")->required();
  c_ingest->add_option("--format", ingest.format, "Input format override (jsonl, tsv)");
  c_ingest->add_option("--fraction", ingest.fraction, "Stratified sample fraction")->capture_default_str();
  c_ingest->add_option("--seed", ingest.seed, "Sampling seed")->capture_default_str();
  c_ingest->add_flag("--no-preserve", ingest.no_preserve, "Sample without preserving label proportions");
  c_ingest->callback([&] {
    action = [&] {
      json cfg = {{"subcommand", "ingest"}, {"in", ingest.in}, {"out", ingest.out},
                  {"fraction", ingest.fraction}, {"seed", ingest.seed},
                  {"preserve_label_proportions", !ingest.no_preserve}};
      if (printed(g, cfg)) return 0;
      auto agg = aggregate_labels(load(ingest.in, ingest.format));
      Dataset out = agg.dataset;
      if (ingest.fraction != 1.0) {
        out = stratified_sample(out, {ingest.fraction, !ingest.no_preserve, ingest.seed});
      }
      cfg["counts"] = {{"hateful_to_toxic", agg.counts.hateful_to_toxic},
                       {"abusive_to_toxic", agg.counts.abusive_to_toxic},
                       {"neither_to_nontoxic", agg.counts.neither_to_nontoxic},
                       {"spam_dropped", agg.counts.spam_dropped},
                       {"unlabeled_kept", agg.counts.unlabeled_kept},
                       {"written", out.size()}};
      save(out, ingest.out);
      write_config(ingest.out, cfg);
      log(Level::info, "ingest: wrote ", out.size(), " instances (", agg.counts.spam_dropped,
          " spam dropped)");
      return 0;
    };
  });

  // measure-data
  struct {
    std::string in, lexicon, out, markdown, name;
  } measure;
  auto* c_measure = app.add_subcommand("measure-data", "Label associations with lexicon categories and AAE");
  c_measure->add_option("--in", measure.in, "Labeled corpus")->required();
  c_measure->add_option("--lexicon", measure.lexicon, "Lexicon CSV (default: built-in)");
  c_measure->add_option("--out", measure.out, "Report JSON")->required();
  c_measure->add_option("--markdown", measure.markdown, "Also write a markdown table");
  c_measure->add_option("--name", measure.name, "Row name in the report");
  c_measure->callback([&] {
    action = [&] {
      json cfg = {{"subcommand", "measure-data"}, {"in", measure.in},
                  {"lexicon", measure.lexicon.empty() ? json("built-in") : json(measure.lexicon)},
                  {"out", measure.out}};
      if (printed(g, cfg)) return 0;
      auto report = dataset_association_report(load(measure.in), lexicon_or_default(measure.lexicon));
      report.name = measure.name.empty() ? fs::path(measure.in).stem().string() : measure.name;
      write_file(measure.out, report.to_json().dump(2) + "\n");
      if (!measure.markdown.empty()) write_file(measure.markdown, render_markdown({report}));
      write_config(measure.out, cfg);
      return 0;
    };
  });

  // train
  ProbeFlags train_flags;
  struct {
    std::string in, out, dynamics;
  } train;
  auto* c_train = app.add_subcommand("train", "Train a probe classifier on hashed n-grams");
  c_train->add_option("--in", train.in, "Training corpus")->required();
  c_train->add_option("--out", train.out, "Model file")->required();
  c_train->add_option("--dynamics", train.dynamics, "Write per-epoch training dynamics (JSONL)");
  train_flags.add(c_train);
  c_train->callback([&] {
    action = [&] {
      ProbeConfig pc = train_flags.config();
      pc.record_dynamics = !train.dynamics.empty();
      const FeatureSpace space = train_flags.space();
      json cfg = {{"subcommand", "train"}, {"in", train.in}, {"out", train.out},
                  {"dynamics", train.dynamics}, {"probe", pc.to_json()}, {"space", space.to_json()}};
      if (printed(g, cfg)) return 0;
      auto result = train_probe(load(train.in), space, pc);
      save_probe(result.model, train.out);
      if (result.dynamics) save_dynamics(*result.dynamics, train.dynamics);
      cfg["epoch_loss"] = result.epoch_loss;
      write_config(train.out, cfg);
      log(Level::info, "train: final loss ", result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back());
      return 0;
    };
  });

  // eval
  struct {
    std::string model, in, out, model_type = "probe", mode = "full_only";
  } eval;
  auto* c_eval = app.add_subcommand("eval", "Predict a corpus with a trained model");
  c_eval->add_option("--model", eval.model, "Model file")->required();
  c_eval->add_option("--in", eval.in, "Corpus to predict")->required();
  c_eval->add_option("--out", eval.out, "Predictions JSONL")->required();
  c_eval->add_option("--model-type", eval.model_type, "probe or lmixin")
      ->capture_default_str()
      ->check(CLI::IsMember({"probe", "lmixin"}));
  c_eval->add_option("--mode", eval.mode, "lmixin prediction: full_only or joint")
      ->capture_default_str()
      ->check(CLI::IsMember({"full_only", "joint"}));
  c_eval->callback([&] {
    action = [&] {
      json cfg = {{"subcommand", "eval"}, {"model", eval.model}, {"in", eval.in},
                  {"out", eval.out}, {"model_type", eval.model_type}, {"mode", eval.mode}};
      if (printed(g, cfg)) return 0;
      const Dataset d = load(eval.in);
      std::vector<Prediction> preds;
      if (eval.model_type == "probe") {
        preds = predict(load_probe(eval.model), d);
      } else {
        preds = lmixin_predict(load_lmixin(eval.model), d, *parse_mixin_mode(eval.mode));
      }
      write_file(eval.out, predictions_to_jsonl(d, preds));
      write_config(eval.out, cfg);
      return 0;
    };
  });

  // lmixin-train
  ProbeFlags lm_flags;
  struct {
    std::string in, out, lexicon, bias_kind = "toxtrig";
    double alpha = 0.03;
    int bias_epochs = 20;
    double bias_lr = 0.5;
    bool allow_identity_bias = false;
  } lm;
  auto* c_lm = app.add_subcommand("lmixin-train", "Debiased training against a frozen bias-only model");
  c_lm->add_option("--in", lm.in, "Training corpus")->required();
  c_lm->add_option("--out", lm.out, "Model file")->required();
  c_lm->add_option("--lexicon", lm.lexicon, "Lexicon CSV (default: built-in)");
  c_lm->add_option("--bias-kind", lm.bias_kind, "toxtrig, oni_only, noi_only, oi_only or dialect")
      ->capture_default_str();
  c_lm->add_option("--alpha", lm.alpha, "Entropy penalty weight")->capture_default_str();
  c_lm->add_option("--bias-epochs", lm.bias_epochs, "Bias-only model epochs")->capture_default_str();
  c_lm->add_option("--bias-lr", lm.bias_lr, "Bias-only model learning rate")->capture_default_str();
  c_lm->add_flag("--allow-identity-bias", lm.allow_identity_bias,
                 "Permit identity-term bias kinds (noi_only, oi_only)");
  lm_flags.add(c_lm);
  c_lm->callback([&] {
    action = [&] {
      LMixinConfig lc;
      lc.alpha = lm.alpha;
      lc.base = lm_flags.config();
      lc.bias_kind = bias_kind_or_throw(lm.bias_kind);
      if ((lc.bias_kind == BiasKind::noi_only || lc.bias_kind == BiasKind::oi_only) &&
          !lm.allow_identity_bias) {
        throw UsageError("bias kind '" + lm.bias_kind + "' needs --allow-identity-bias");
      }
      lc.bias_config = default_bias_only_config(lm_flags.seed);
      lc.bias_config.epochs = lm.bias_epochs;
      lc.bias_config.learning_rate = lm.bias_lr;
      lc.validate();
      const FeatureSpace space = lm_flags.space();
      json cfg = {{"subcommand", "lmixin-train"}, {"in", lm.in}, {"out", lm.out},
                  {"lexicon", lm.lexicon.empty() ? json("built-in") : json(lm.lexicon)},
                  {"lmixin", lc.to_json()}, {"space", space.to_json()}};
      if (printed(g, cfg)) return 0;
      const Lexicon lex = lexicon_or_default(lm.lexicon);
      auto model = train_lmixin(load(lm.in), space, &lex, lc);
      save_lmixin(model, lm.out);
      write_config(lm.out, cfg);
      return 0;
    };
  });

  // aflite
  ProbeFlags af_flags;
  AFLiteConfig afc;
  struct {
    std::string in, out, subset_out;
    bool no_preserve = false;
    int member_epochs = AFLiteConfig::default_member_config().epochs;
    double member_lr = AFLiteConfig::default_member_config().learning_rate;
  } af;
  auto* c_af = app.add_subcommand("aflite", "Adversarial filtering to a target fraction");
  c_af->add_option("--in", af.in, "Training corpus")->required();
  c_af->add_option("--out", af.out, "Manifest JSON")->required();
  c_af->add_option("--subset-out", af.subset_out, "Also write the retained corpus");
  c_af->add_option("--target-fraction", afc.target_fraction, "Fraction to retain")->capture_default_str();
  c_af->add_option("--ensemble-size", afc.ensemble_size, "Rounds per iteration")->capture_default_str();
  c_af->add_option("--train-fraction", afc.train_fraction, "Per-round training split")->capture_default_str();
  c_af->add_option("--threshold", afc.threshold, "Predictability threshold")->capture_default_str();
  c_af->add_option("--removal-cap", afc.removal_cap, "Max fraction removed per iteration")
      ->capture_default_str();
  c_af->add_option("--min-evals", afc.min_out_of_sample_evals, "Held-out evaluations needed per instance")
      ->capture_default_str();
  c_af->add_option("--member-epochs", af.member_epochs, "Member probe epochs")->capture_default_str();
  c_af->add_option("--member-lr", af.member_lr, "Member probe learning rate")->capture_default_str();
  c_af->add_option("--seed", afc.seed, "Random seed")->capture_default_str();
  c_af->add_flag("--no-preserve", af.no_preserve, "Do not preserve label proportions");
  c_af->add_option("--dim-bits", af_flags.dim_bits, "log2 of the hashed feature dimension")
      ->capture_default_str();
  c_af->add_option("--ngrams", af_flags.ngrams, "Token n-gram orders")->delimiter(',');
  c_af->callback([&] {
    action = [&] {
      afc.preserve_label_proportions = !af.no_preserve;
      afc.jobs = g.jobs;
      afc.member.epochs = af.member_epochs;
      afc.member.learning_rate = af.member_lr;
      afc.validate();
      const FeatureSpace space = af_flags.space();
      json cfg = {{"subcommand", "aflite"}, {"in", af.in}, {"out", af.out},
                  {"subset_out", af.subset_out}, {"aflite", afc.to_json()}, {"space", space.to_json()}};
      if (printed(g, cfg)) return 0;
      const Dataset d = load(af.in);
      auto manifest = aflite_filter(d, space, afc);
      if (manifest.threshold_never_met) {
        log(Level::warn, "aflite: no instance reached the threshold; subset is a random sample");
      }
      save_manifest(manifest, af.out);
      if (!af.subset_out.empty()) save(apply_manifest(d, manifest), af.subset_out);
      write_config(af.out, cfg);
      log(Level::info, "aflite: retained ", manifest.retained_ids.size(), " of ", d.size(), " after ",
          manifest.stats.size(), " iterations");
      return 0;
    };
  });

  // cartography
  struct {
    std::string dynamics, out;
  } carto;
  auto* c_carto = app.add_subcommand("cartography", "Confidence and variability from training dynamics");
  c_carto->add_option("--dynamics", carto.dynamics, "Dynamics JSONL written by train")->required();
  c_carto->add_option("--out", carto.out, "Coordinates TSV")->required();
  c_carto->callback([&] {
    action = [&] {
      json cfg = {{"subcommand", "cartography"}, {"dynamics", carto.dynamics}, {"out", carto.out}};
      if (printed(g, cfg)) return 0;
      save_coordinates(compute_coordinates(load_dynamics(carto.dynamics)), carto.out);
      write_config(carto.out, cfg);
      return 0;
    };
  });

  // select-region
  struct {
    std::string coords, in, region, out, subset_out;
    double fraction = 0.33;
    std::uint64_t seed = 0;
    bool no_preserve = false;
  } sel;
  auto* c_sel = app.add_subcommand("select-region", "Select an easy, ambiguous or hard subset");
  c_sel->add_option("--coords", sel.coords, "Coordinates TSV")->required();
  c_sel->add_option("--in", sel.in, "Corpus the coordinates describe")->required();
  c_sel->add_option("--region", sel.region, "easy, ambiguous or hard")
      ->required()
      ->check(CLI::IsMember({"easy", "ambiguous", "hard"}));
  c_sel->add_option("--fraction", sel.fraction, "Fraction to select")->capture_default_str();
  c_sel->add_option("--seed", sel.seed, "Tie-break seed")->capture_default_str();
  c_sel->add_flag("--no-preserve", sel.no_preserve, "Do not preserve label proportions");
  c_sel->add_option("--out", sel.out, "Manifest JSON")->required();
  c_sel->add_option("--subset-out", sel.subset_out, "Also write the selected corpus");
  c_sel->callback([&] {
    action = [&] {
      json cfg = {{"subcommand", "select-region"}, {"coords", sel.coords}, {"in", sel.in},
                  {"region", sel.region}, {"fraction", sel.fraction}, {"seed", sel.seed},
                  {"preserve_label_proportions", !sel.no_preserve}, {"out", sel.out},
                  {"subset_out", sel.subset_out}};
      if (printed(g, cfg)) return 0;
      const Dataset d = load(sel.in);
      auto m = select_region(load_coordinates(sel.coords), d, *parse_region(sel.region),
                             sel.fraction, !sel.no_preserve, sel.seed);
      save_manifest(m, sel.out);
      if (!sel.subset_out.empty()) save(apply_manifest(d, m), sel.subset_out);
      write_config(sel.out, cfg);
      return 0;
    };
  });

  // downsample
  struct {
    std::string in, out, subset_out, manifest;
    double fraction = 0.33;
    std::uint64_t seed = 0;
    bool no_preserve = false;
  } down;
  auto* c_down = app.add_subcommand("downsample", "Random subset, or apply an existing manifest");
  c_down->add_option("--in", down.in, "Corpus")->required();
  c_down->add_option("--fraction", down.fraction, "Fraction to keep")->capture_default_str();
  c_down->add_option("--seed", down.seed, "Sampling seed")->capture_default_str();
  c_down->add_flag("--no-preserve", down.no_preserve, "Do not preserve label proportions");
  c_down->add_option("--apply", down.manifest, "Apply this manifest instead of sampling");
  c_down->add_option("--out", down.out, "Manifest JSON (sampling mode)");
  c_down->add_option("--subset-out", down.subset_out, "Retained corpus");
  c_down->callback([&] {
    action = [&] {
      json cfg = {{"subcommand", "downsample"}, {"in", down.in}, {"fraction", down.fraction},
                  {"seed", down.seed}, {"preserve_label_proportions", !down.no_preserve},
                  {"apply", down.manifest}, {"out", down.out}, {"subset_out", down.subset_out}};
      if (down.out.empty() && down.subset_out.empty()) {
        throw UsageError("downsample needs --out or --subset-out");
      }
      if (printed(g, cfg)) return 0;
      const Dataset d = load(down.in);
      FilterManifest m;
      if (!down.manifest.empty()) {
        m = load_manifest(down.manifest);
        check_partition(m, d);
      } else {
        m = random_filter(d, down.fraction, down.seed, !down.no_preserve);
      }
      if (!down.out.empty()) save_manifest(m, down.out);
      if (!down.subset_out.empty()) save(apply_manifest(d, m), down.subset_out);
      write_config(down.out.empty() ? down.subset_out : down.out, cfg);
      return 0;
    };
  });

  // translate
  struct {
    std::string in, backend = "file_lookup", lookup, cache, failures, audit_log, selector = "aae";
    std::size_t max_in_flight = 1;
    int retries = 2;
    double timeout = 30.0;
    bool acknowledged = false;
  } tr;
  auto* c_tr = app.add_subcommand("translate", "Translate AAE-assigned instances to WAE");
  c_tr->add_option("--in", tr.in, "Corpus")->required();
  c_tr->add_option("--backend", tr.backend, "file_lookup, identity_mock or remote_completion")
      ->capture_default_str()
      ->check(CLI::IsMember({"file_lookup", "identity_mock", "remote_completion"}));
  c_tr->add_option("--lookup", tr.lookup, "Translation TSV for file_lookup");
  c_tr->add_option("--cache", tr.cache, "Translation cache TSV (written)")->required();
  c_tr->add_option("--failures", tr.failures, "Failure manifest JSON");
  c_tr->add_option("--selector", tr.selector, "aae (all AAE-assigned) or toxic-aae")
      ->capture_default_str()
      ->check(CLI::IsMember({"aae", "toxic-aae"}));
  c_tr->add_option("--max-in-flight", tr.max_in_flight, "Concurrent requests")->capture_default_str();
  c_tr->add_option("--retries", tr.retries, "Retries per failed request")->capture_default_str();
  c_tr->add_option("--timeout", tr.timeout, "Request timeout in seconds")->capture_default_str();
  c_tr->add_option("--audit-log", tr.audit_log, "JSONL of remote requests and responses");
  c_tr->add_flag("--i-understand-the-limitations", tr.acknowledged,
                 "Enable the remote backend (see README)");
  c_tr->callback([&] {
    action = [&] {
      json cfg = {{"subcommand", "translate"}, {"in", tr.in}, {"backend", tr.backend},
                  {"lookup", tr.lookup}, {"cache", tr.cache}, {"selector", tr.selector},
                  {"max_in_flight", tr.max_in_flight}, {"retries", tr.retries},
                  {"timeout_seconds", tr.timeout}};
      std::unique_ptr<TranslationClient> client;
      if (tr.backend == "file_lookup") {
        if (tr.lookup.empty()) throw UsageError("file_lookup needs --lookup");
      } else if (tr.backend == "remote_completion") {
        if (!tr.acknowledged) {
          throw UsageError(
              "the remote backend is disabled; pass --i-understand-the-limitations to enable it");
        }
      }
      if (printed(g, cfg)) return 0;
      if (tr.backend == "file_lookup") {
        client = std::make_unique<FileLookupClient>(FileLookupClient::from_file(tr.lookup));
      } else if (tr.backend == "identity_mock") {
        client = std::make_unique<IdentityMockClient>();
      } else {
        RemoteConfig rc = RemoteConfig::from_environment();
        rc.timeout_seconds = tr.timeout;
        if (!tr.audit_log.empty()) rc.audit_log = tr.audit_log;
        cfg["remote"] = rc.to_json();
        client = std::make_unique<RemoteCompletionClient>(rc, tr.acknowledged);
      }
      InstanceSelector selector = is_aae_assigned;
      if (tr.selector == "toxic-aae") {
        selector = [](const Instance& i) { return i.label == Label::toxic && is_aae_assigned(i); };
      }
      TranslateOptions opts;
      opts.max_in_flight = tr.max_in_flight;
      opts.retries = tr.retries;
      opts.cache = tr.cache;
      auto result = translate_corpus(load(tr.in), *client, selector, opts);
      cfg["translated"] = result.translations.size();
      cfg["from_cache"] = result.from_cache;
      cfg["failed"] = result.failures.size();
      write_config(tr.cache, cfg);
      if (!result.failures.empty()) {
        json f = json::array();
        for (const auto& fail : result.failures) {
          f.push_back({{"id", fail.id}, {"error", fail.error}, {"attempts", fail.attempts}});
        }
        const std::string path = tr.failures.empty() ? tr.cache + ".failures.json" : tr.failures;
        write_file(path, f.dump(2) + "\n");
        log(Level::error, "translate: ", result.failures.size(), " instances failed; see ", path);
        return tr.backend == "remote_completion" ? 3 : 2;
      }
      log(Level::info, "translate: ", result.translations.size(), " translations (",
          result.from_cache, " from cache)");
      return 0;
    };
  });

  // relabel
  ProbeFlags rl_flags;
  struct {
    std::string in, translations, vanilla, translated, translated_out, out, decisions;
    bool translated_only = false;
  } rl;
  auto* c_rl = app.add_subcommand("relabel", "Flip toxic AAE labels whose translations read as nontoxic");
  c_rl->add_option("--in", rl.in, "Training corpus")->required();
  c_rl->add_option("--translations", rl.translations, "Translation TSV")->required();
  c_rl->add_option("--vanilla", rl.vanilla, "Probe trained on the original corpus")->required();
  c_rl->add_option("--translated-model", rl.translated,
                   "Probe trained on translated text (trained here when omitted)");
  c_rl->add_option("--translated-model-out", rl.translated_out, "Where to save a model trained here");
  c_rl->add_flag("--translated-only", rl.translated_only,
                 "Train the translated model on translated AAE instances only");
  c_rl->add_option("--out", rl.out, "Relabeled corpus")->required();
  c_rl->add_option("--decisions", rl.decisions, "Decision log JSONL");
  c_rl->callback([&] {
    action = [&] {
      json cfg = {{"subcommand", "relabel"}, {"in", rl.in}, {"translations", rl.translations},
                  {"vanilla", rl.vanilla}, {"translated_model", rl.translated},
                  {"translated_only", rl.translated_only}, {"out", rl.out},
                  {"decisions", rl.decisions}};
      if (printed(g, cfg)) return 0;
      const Dataset d = load(rl.in);
      const auto table = load_translations(rl.translations);
      const ProbeModel vanilla = load_probe(rl.vanilla);
      ProbeModel translated;
      if (!rl.translated.empty()) {
        translated = load_probe(rl.translated);
      } else {
        const Dataset corpus = build_translated_training_corpus(d, table, rl.translated_only);
        translated = train_probe(corpus, vanilla.featurizer, vanilla.config).model;
        if (!rl.translated_out.empty()) save_probe(translated, rl.translated_out);
      }
      auto result = relabel_dataset(d, table, vanilla, translated);
      save(result.dataset, rl.out);
      if (!rl.decisions.empty()) write_file(rl.decisions, decisions_to_jsonl(result.decisions));
      std::size_t changed = 0;
      for (const auto& dec : result.decisions) changed += dec.changed ? 1 : 0;
      cfg["candidates"] = result.decisions.size();
      cfg["relabeled"] = changed;
      write_config(rl.out, cfg);
      log(Level::info, "relabel: ", changed, " of ", result.decisions.size(), " candidates relabeled");
      return 0;
    };
  });

  // report
  struct {
    std::string preds, in, lexicon, out, markdown, name, challenge, challenge_preds;
    std::vector<std::string> combine;
  } rep;
  auto* c_rep = app.add_subcommand("report", "Bias and performance report for predictions");
  c_rep->add_option("--preds", rep.preds, "Predictions JSONL");
  c_rep->add_option("--in", rep.in, "Corpus the predictions cover");
  c_rep->add_option("--lexicon", rep.lexicon, "Lexicon CSV (default: built-in)");
  c_rep->add_option("--name", rep.name, "Row name");
  c_rep->add_option("--challenge", rep.challenge, "Challenge corpus");
  c_rep->add_option("--challenge-preds", rep.challenge_preds, "Predictions on the challenge corpus");
  c_rep->add_option("--combine", rep.combine, "Existing report JSON files to tabulate together");
  c_rep->add_option("--out", rep.out, "Report JSON");
  c_rep->add_option("--markdown", rep.markdown, "Markdown tables");
  c_rep->callback([&] {
    action = [&] {
      json cfg = {{"subcommand", "report"}, {"preds", rep.preds}, {"in", rep.in},
                  {"lexicon", rep.lexicon.empty() ? json("built-in") : json(rep.lexicon)},
                  {"name", rep.name}, {"challenge", rep.challenge},
                  {"challenge_preds", rep.challenge_preds}, {"combine", rep.combine},
                  {"out", rep.out}, {"markdown", rep.markdown}};
      const bool single = !rep.preds.empty() || !rep.in.empty();
      if (single && (rep.preds.empty() || rep.in.empty())) {
        throw UsageError("report needs both --preds and --in");
      }
      if (!single && rep.combine.empty()) throw UsageError("report needs --preds/--in or --combine");
      if (single && rep.out.empty()) throw UsageError("report needs --out");
      if (rep.challenge.empty() != rep.challenge_preds.empty()) {
        throw UsageError("--challenge and --challenge-preds go together");
      }
      if (printed(g, cfg)) return 0;
      std::vector<BiasReport> reports;
      for (const auto& path : rep.combine) {
        try {
          reports.push_back(BiasReport::from_json(json::parse(read_file(path))));
        } catch (const json::exception& e) {
          throw DataError(path + ": malformed report: " + e.what());
        }
      }
      if (single) {
        const Dataset d = load(rep.in);
        const auto preds = parse_predictions_jsonl(read_file(rep.preds), d);
        ReportInputs extra;
        Dataset challenge;
        std::vector<Prediction> challenge_preds;
        if (!rep.challenge.empty()) {
          challenge = load(rep.challenge);
          challenge_preds = parse_predictions_jsonl(read_file(rep.challenge_preds), challenge);
          extra.challenge = &challenge;
          extra.challenge_preds = &challenge_preds;
        }
        auto report = full_report(preds, d, lexicon_or_default(rep.lexicon), extra);
        report.name = rep.name.empty() ? fs::path(rep.preds).stem().string() : rep.name;
        write_file(rep.out, report.to_json().dump(2) + "\n");
        write_config(rep.out, cfg);
        reports.push_back(std::move(report));
      }
      if (!rep.markdown.empty()) {
        write_file(rep.markdown, render_markdown(reports));
        if (!single) write_config(rep.markdown, cfg);
      }
      return 0;
    };
  });

  // synth
  LexicalSynthConfig lex_cfg;
  DialectSynthConfig dia_cfg;
  struct {
    std::string kind, out_dir;
    std::uint64_t seed = 0;
    std::size_t n_train = 5000, n_test = 2000;
  } syn;
  auto* c_syn = app.add_subcommand("synth", "Generate a planted-bias corpus");
  c_syn->add_option("--kind", syn.kind, "lexical or dialect")
      ->required()
      ->check(CLI::IsMember({"lexical", "dialect"}));
  c_syn->add_option("--out-dir", syn.out_dir, "Output directory")->required();
  c_syn->add_option("--seed", syn.seed, "Generator seed")->capture_default_str();
  c_syn->add_option("--n-train", syn.n_train, "Training instances")->capture_default_str();
  c_syn->add_option("--n-test", syn.n_test, "Test instances")->capture_default_str();
  c_syn->add_option("--planted-token", lex_cfg.planted_token, "lexical: planted token")
      ->capture_default_str();
  c_syn->add_option("--p-token-toxic", lex_cfg.p_token_given_toxic, "lexical: P(token | toxic)")
      ->capture_default_str();
  c_syn->add_option("--p-token-nontoxic", lex_cfg.p_token_given_nontoxic,
                    "lexical: P(token | nontoxic)")
      ->capture_default_str();
  c_syn->add_option("--annotation-bias", dia_cfg.annotation_bias,
                    "dialect: P(toxic label | benign AAE) in train")
      ->capture_default_str();
  c_syn->callback([&] {
    action = [&] {
      json cfg;
      SynthCorpus corpus;
      if (syn.kind == "lexical") {
        lex_cfg.seed = syn.seed;
        lex_cfg.n_train = syn.n_train;
        lex_cfg.n_test = syn.n_test;
        cfg = lex_cfg.to_json();
        if (printed(g, cfg)) return 0;
        corpus = synth_lexical(lex_cfg);
      } else {
        dia_cfg.seed = syn.seed;
        dia_cfg.n_train = syn.n_train;
        dia_cfg.n_test = syn.n_test;
        cfg = dia_cfg.to_json();
        if (printed(g, cfg)) return 0;
        corpus = synth_dialect(dia_cfg);
      }
      write_synth(corpus, syn.out_dir);
      write_file(fs::path(syn.out_dir) / "synth.config.json", cfg.dump(2) + "\n");
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (g.log_level == "error") g_level = Level::error;
  if (g.log_level == "warn") g_level = Level::warn;
  if (g.log_level == "debug") g_level = Level::debug;
  return action();
}

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    log(Level::error, e.what());
    return 1;
  } catch (const DataError& e) {
    log(Level::error, e.what());
    return 2;
  } catch (const RemoteError& e) {
    log(Level::error, e.what());
    return 3;
  } catch (const std::exception& e) {
    log(Level::error, e.what());
    return 2;
  }
}

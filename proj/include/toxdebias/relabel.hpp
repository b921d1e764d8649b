#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "toxdebias/corpus.hpp"
#include "toxdebias/errors.hpp"
#include "toxdebias/probe.hpp"

namespace toxdebias {

// Few-shot AAE -> WAE prompt ending in "AAE: <text>\nWAE:".
std::string build_prompt(std::string_view text);

// First line of a completion, trimmed.
std::string clean_completion(std::string_view completion);

class MissingTranslation : public DataError {
 public:
  explicit MissingTranslation(const std::string& id)
      : DataError("no translation for instance '" + id + "'"), id_(id) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

// translate() may be called from several threads at once.
class TranslationClient {
 public:
  virtual ~TranslationClient() = default;
  virtual std::string_view backend() const = 0;
  // Throws MissingTranslation or RemoteError.
  virtual std::string translate(const std::string& id, const std::string& text) = 0;
};

using TranslationTable = std::map<std::string, std::string>;

std::string translations_to_tsv(const TranslationTable& table,
                                const std::vector<std::string>& order = {});
TranslationTable parse_translations_tsv(std::string_view content);
TranslationTable load_translations(const std::filesystem::path& path);
void save_translations(const TranslationTable& table, const std::filesystem::path& path,
                       const std::vector<std::string>& order = {});

class FileLookupClient : public TranslationClient {
 public:
  explicit FileLookupClient(TranslationTable table) : table_(std::move(table)) {}
  static FileLookupClient from_file(const std::filesystem::path& path);
  std::string_view backend() const override { return "file_lookup"; }
  std::string translate(const std::string& id, const std::string& text) override;

 private:
  TranslationTable table_;
};

class IdentityMockClient : public TranslationClient {
 public:
  std::string_view backend() const override { return "identity_mock"; }
  std::string translate(const std::string&, const std::string& text) override { return text; }
};

struct RemoteConfig {
  std::string endpoint;  // full URL of a completion endpoint
  std::string api_key;
  double temperature = 0.5;
  double top_p = 0.95;
  int max_tokens = 128;
  double timeout_seconds = 30.0;
  std::optional<std::filesystem::path> audit_log;  // JSONL of every request/response

  // Reads TRANSLATE_ENDPOINT and TRANSLATE_API_KEY. Throws UsageError when
  // the endpoint is unset.
  static RemoteConfig from_environment();
  nlohmann::json to_json() const;  // without the key
};

class RemoteCompletionClient : public TranslationClient {
 public:
  // Throws UsageError unless `acknowledged` is set.
  RemoteCompletionClient(RemoteConfig config, bool acknowledged);
  std::string_view backend() const override { return "remote_completion"; }
  std::string translate(const std::string& id, const std::string& text) override;

 private:
  void audit(const nlohmann::json& entry);

  RemoteConfig config_;
  std::mutex audit_mutex_;
};

struct TranslateOptions {
  std::size_t max_in_flight = 1;
  int retries = 2;  // extra attempts after a RemoteError
  std::optional<std::filesystem::path> cache;
};

struct TranslationFailure {
  std::string id;
  std::string error;
  int attempts = 0;
};

struct TranslationResult {
  TranslationTable translations;  // every selected id that succeeded
  std::vector<TranslationFailure> failures;
  std::size_t from_cache = 0;
};

using InstanceSelector = std::function<bool(const Instance&)>;

// Dialect probabilities present and argmax is AAE.
bool is_aae_assigned(const Instance& instance);

// Translates every selected instance (default: AAE-assigned). Ids already in
// the cache are not re-requested; the cache is rewritten with all successes.
// Failures are returned, never dropped.
TranslationResult translate_corpus(const Dataset& dataset, TranslationClient& client,
                                   const InstanceSelector& selector = is_aae_assigned,
                                   const TranslateOptions& options = {});

struct RelabelDecision {
  std::string id;
  Label original_label = Label::toxic;
  std::string translation;
  Label pred_vanilla = Label::toxic;
  Label pred_translated_model = Label::toxic;
  Label new_label = Label::toxic;
  bool changed = false;

  nlohmann::json to_json() const;
};

struct RelabelResult {
  Dataset dataset;
  std::vector<RelabelDecision> decisions;
};

// Toxic AAE-assigned instances become nontoxic when either model predicts
// their translation nontoxic; their raw_label becomes unlabeled so the
// corpus stays consistent. Everything else is copied unchanged. Throws
// MissingTranslation for a candidate without a translation.
RelabelResult relabel_dataset(const Dataset& dataset, const TranslationTable& translations,
                              const ProbeModel& model_vanilla,
                              const ProbeModel& model_translated);

std::string decisions_to_jsonl(const std::vector<RelabelDecision>& decisions);

// AAE-assigned texts replaced by their translations, labels unchanged. With
// translated_only, the result holds just those instances.
Dataset build_translated_training_corpus(const Dataset& dataset,
                                         const TranslationTable& translations,
                                         bool translated_only = false);

}  // namespace toxdebias

#include "toxdebias/relabel.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <thread>
#include <unordered_set>

#include "toxdebias/text_io.hpp"

namespace toxdebias {

namespace {

struct ExamplePair {
  std::string_view aae;
  std::string_view wae;
};

constexpr std::array<ExamplePair, 4> kExamples = {{
    {"Get your triflin’ ass out of here.", "Get your trifling self out of here."},
    {"I saw his ass yesterday.", "I saw him yesterday."},
    {"His ass is gonna get fried.", "He is gonna get fried"},
    {"Wassup, nigga?", "What's up bro?"},
}};

}  // namespace

std::string build_prompt(std::string_view text) {
  std::string out;
  for (const auto& ex : kExamples) {
    out += "AAE: ";
    out += ex.aae;
    out += "\nWAE: ";
    out += ex.wae;
    out += "\n\n";
  }
  out += "AAE: ";
  out += text;
  out += "\nWAE:";
  return out;
}

std::string clean_completion(std::string_view completion) {
  completion = trim(completion);
  const auto nl = completion.find('\n');
  if (nl != std::string_view::npos) completion = trim(completion.substr(0, nl));
  return std::string(completion);
}

std::string translations_to_tsv(const TranslationTable& table,
                                const std::vector<std::string>& order) {
  std::string out = "id\ttranslation\n";
  auto row = [&](const std::string& id, const std::string& t) {
    out += escape_tsv(id);
    out += '\t';
    out += escape_tsv(t);
    out += '\n';
  };
  std::unordered_set<std::string> written;
  for (const auto& id : order) {
    auto it = table.find(id);
    if (it != table.end() && written.insert(id).second) row(id, it->second);
  }
  for (const auto& [id, t] : table) {
    if (!written.contains(id)) row(id, t);
  }
  return out;
}

TranslationTable parse_translations_tsv(std::string_view content) {
  TranslationTable table;
  const auto lines = split_lines(content);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (ln == 0 && lines[0] == "id\ttranslation") continue;
    if (lines[ln].empty()) continue;
    const auto f = split_tsv_row(lines[ln]);
    if (f.size() != 2) {
      throw DataError("translations line " + std::to_string(ln + 1) + ": expected id and translation");
    }
    auto id = unescape_tsv(f[0]);
    if (!table.emplace(id, unescape_tsv(f[1])).second) {
      throw DataError("translations line " + std::to_string(ln + 1) + ": duplicate id '" + id + "'");
    }
  }
  return table;
}

TranslationTable load_translations(const std::filesystem::path& path) {
  return parse_translations_tsv(read_file(path));
}

void save_translations(const TranslationTable& table, const std::filesystem::path& path,
                       const std::vector<std::string>& order) {
  write_file(path, translations_to_tsv(table, order));
}

FileLookupClient FileLookupClient::from_file(const std::filesystem::path& path) {
  return FileLookupClient(load_translations(path));
}

std::string FileLookupClient::translate(const std::string& id, const std::string&) {
  auto it = table_.find(id);
  if (it == table_.end()) throw MissingTranslation(id);
  return it->second;
}

bool is_aae_assigned(const Instance& instance) {
  return instance.dialect && argmax_dialect(instance) == Dialect::aae;
}

TranslationResult translate_corpus(const Dataset& dataset, TranslationClient& client,
                                   const InstanceSelector& selector,
                                   const TranslateOptions& options) {
  TranslationResult result;
  TranslationTable cached;
  if (options.cache && std::filesystem::exists(*options.cache)) {
    cached = load_translations(*options.cache);
  }

  std::vector<std::size_t> todo;
  std::vector<std::string> order;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& inst = dataset[i];
    if (!selector(inst)) continue;
    order.push_back(inst.id);
    auto it = cached.find(inst.id);
    if (it != cached.end()) {
      result.translations.emplace(inst.id, it->second);
      ++result.from_cache;
    } else {
      todo.push_back(i);
    }
  }

  struct Slot {
    std::optional<std::string> text;
    std::string error;
    int attempts = 0;
  };
  std::vector<Slot> slots(todo.size());
  auto work = [&](std::size_t k) {
    const auto& inst = dataset[todo[k]];
    auto& slot = slots[k];
    for (int attempt = 0; attempt <= std::max(0, options.retries); ++attempt) {
      ++slot.attempts;
      try {
        slot.text = client.translate(inst.id, inst.text);
        return;
      } catch (const RemoteError& e) {
        slot.error = e.what();
      } catch (const MissingTranslation& e) {
        slot.error = e.what();
        return;
      }
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(options.max_in_flight, todo.size()));
  if (workers <= 1) {
    for (std::size_t k = 0; k < todo.size(); ++k) work(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t k = next++; k < todo.size(); k = next++) work(k);
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

  for (std::size_t k = 0; k < todo.size(); ++k) {
    const auto& id = dataset[todo[k]].id;
    if (slots[k].text) {
      result.translations.emplace(id, *slots[k].text);
    } else {
      result.failures.push_back({id, slots[k].error, slots[k].attempts});
    }
  }

  if (options.cache) {
    TranslationTable merged = cached;
    for (const auto& [id, t] : result.translations) merged[id] = t;
    save_translations(merged, *options.cache, order);
  }
  return result;
}

nlohmann::json RelabelDecision::to_json() const {
  return {{"id", id},
          {"original_label", to_string(original_label)},
          {"translation", translation},
          {"pred_vanilla", to_string(pred_vanilla)},
          {"pred_translated_model", to_string(pred_translated_model)},
          {"new_label", to_string(new_label)},
          {"changed", changed}};
}

RelabelResult relabel_dataset(const Dataset& dataset, const TranslationTable& translations,
                              const ProbeModel& model_vanilla,
                              const ProbeModel& model_translated) {
  RelabelResult out;
  out.dataset = dataset;
  for (auto& inst : out.dataset.instances) {
    if (inst.label != Label::toxic || !is_aae_assigned(inst)) continue;
    auto it = translations.find(inst.id);
    if (it == translations.end()) throw MissingTranslation(inst.id);
    RelabelDecision d;
    d.id = inst.id;
    d.original_label = inst.label;
    d.translation = it->second;
    d.pred_vanilla =
        decide(forward(model_vanilla, model_vanilla.featurizer.apply_text(it->second)).prob_toxic())
            .label;
    d.pred_translated_model =
        decide(forward(model_translated, model_translated.featurizer.apply_text(it->second))
                   .prob_toxic())
            .label;
    const bool flip =
        d.pred_vanilla == Label::nontoxic || d.pred_translated_model == Label::nontoxic;
    d.new_label = flip ? Label::nontoxic : Label::toxic;
    d.changed = flip;
    inst.label = d.new_label;
    // the annotator label no longer holds; the decision log keeps it
    if (flip) inst.raw_label = RawLabel::unlabeled;
    out.decisions.push_back(std::move(d));
  }
  if (!out.dataset.provenance.empty()) out.dataset.provenance += " | ";
  out.dataset.provenance += "relabeled";
  return out;
}

std::string decisions_to_jsonl(const std::vector<RelabelDecision>& decisions) {
  std::string out;
  for (const auto& d : decisions) {
    out += d.to_json().dump();
    out += '\n';
  }
  return out;
}

Dataset build_translated_training_corpus(const Dataset& dataset,
                                         const TranslationTable& translations,
                                         bool translated_only) {
  Dataset out;
  out.provenance = dataset.provenance;
  out.split_name = dataset.split_name;
  for (const auto& inst : dataset.instances) {
    if (!is_aae_assigned(inst)) {
      if (!translated_only) out.instances.push_back(inst);
      continue;
    }
    auto it = translations.find(inst.id);
    if (it == translations.end()) throw MissingTranslation(inst.id);
    Instance copy = inst;
    copy.text = it->second;
    out.instances.push_back(std::move(copy));
  }
  return out;
}

}  // namespace toxdebias

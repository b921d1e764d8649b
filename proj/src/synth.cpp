#include "toxdebias/synth.hpp"

#include <array>

#include "toxdebias/errors.hpp"
#include "toxdebias/rng.hpp"
#include "toxdebias/text_io.hpp"

namespace toxdebias {

namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstv";
constexpr std::string_view kVowels = "aeiou";

// Distinct three-syllable pseudo-word for each index below 65^3.
std::string pseudo_word(std::size_t index) {
  const std::size_t syllables = kConsonants.size() * kVowels.size();
  std::string w;
  for (int k = 0; k < 3; ++k) {
    const std::size_t s = index % syllables;
    index /= syllables;
    w += kConsonants[s / kVowels.size()];
    w += kVowels[s % kVowels.size()];
  }
  return w;
}

struct Vocab {
  std::vector<std::string> benign;
  std::vector<std::string> toxic;
};

Vocab make_vocab(std::size_t n_benign, std::size_t n_toxic) {
  if (n_benign == 0 || n_toxic == 0) throw UsageError("vocabulary sizes must be positive");
  Vocab v;
  for (std::size_t i = 0; i < n_benign; ++i) v.benign.push_back(pseudo_word(i));
  for (std::size_t i = 0; i < n_toxic; ++i) v.toxic.push_back(pseudo_word(n_benign + i));
  return v;
}

const std::string& pick(Rng& rng, const std::vector<std::string>& words) {
  return words[rng.below(words.size())];
}

// Content words shuffled together; toxic words are mixed into the sentence.
std::vector<std::string> base_words(Rng& rng, const Vocab& vocab, bool toxic) {
  const std::size_t length = 6 + rng.below(7);
  std::vector<std::string> words;
  for (std::size_t k = 0; k < length; ++k) words.push_back(pick(rng, vocab.benign));
  if (toxic) {
    words.push_back(pick(rng, vocab.toxic));
    words.push_back(pick(rng, vocab.toxic));
    if (rng.uniform() < 0.3) words.push_back(pick(rng, vocab.toxic));
  }
  return words;
}

std::string join_shuffled(Rng& rng, std::vector<std::string> words) {
  rng.shuffle(std::span(words));
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

void check_rate(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw UsageError(std::string(name) + " must be in [0, 1]");
}

Instance make_instance(std::string id, std::string text, bool toxic) {
  Instance inst;
  inst.id = std::move(id);
  inst.text = std::move(text);
  inst.raw_label = toxic ? RawLabel::abusive : RawLabel::neither;
  inst.label = toxic ? Label::toxic : Label::nontoxic;
  return inst;
}

struct Marker {
  std::string_view aae;
  std::string_view wae;
};

constexpr std::array<Marker, 7> kMarkers = {{
    {"finna", "going to"},
    {"tryna", "trying to"},
    {"ion", "i don't"},
    {"bruh", "bro"},
    {"deadass", "seriously"},
    {"lowkey", "kind of"},
    {"gon", "going to"},
}};

}  // namespace

nlohmann::json LexicalSynthConfig::to_json() const {
  return {{"kind", "lexical"},
          {"n_train", n_train},
          {"n_test", n_test},
          {"toxic_rate", toxic_rate},
          {"p_token_given_toxic", p_token_given_toxic},
          {"p_token_given_nontoxic", p_token_given_nontoxic},
          {"benign_vocab", benign_vocab},
          {"toxic_vocab", toxic_vocab},
          {"train_label_noise", train_label_noise},
          {"planted_token", planted_token},
          {"seed", seed}};
}

nlohmann::json DialectSynthConfig::to_json() const {
  return {{"kind", "dialect"},
          {"n_train", n_train},
          {"n_test", n_test},
          {"aae_rate", aae_rate},
          {"toxic_rate", toxic_rate},
          {"annotation_bias", annotation_bias},
          {"max_markers", max_markers},
          {"train_label_noise", train_label_noise},
          {"benign_vocab", benign_vocab},
          {"toxic_vocab", toxic_vocab},
          {"seed", seed}};
}

SynthCorpus synth_lexical(const LexicalSynthConfig& config) {
  check_rate(config.toxic_rate, "toxic rate");
  check_rate(config.p_token_given_toxic, "token rate given toxic");
  check_rate(config.p_token_given_nontoxic, "token rate given nontoxic");
  check_rate(config.train_label_noise, "label noise");
  if (config.planted_token.empty()) throw UsageError("planted token is empty");
  const Vocab vocab = make_vocab(config.benign_vocab, config.toxic_vocab);
  Rng rng(derive_seed(config.seed, 0x4c4558ULL));  // "LEX"

  SynthCorpus out;
  auto generate = [&](std::size_t n, const std::string& split, bool noisy) {
    Dataset d;
    d.split_name = split;
    d.provenance = "synth:lexical";
    for (std::size_t i = 0; i < n; ++i) {
      const bool toxic = rng.uniform() < config.toxic_rate;
      auto words = base_words(rng, vocab, toxic);
      const double p_token =
          toxic ? config.p_token_given_toxic : config.p_token_given_nontoxic;
      if (rng.uniform() < p_token) words.push_back(config.planted_token);
      bool label = toxic;
      if (noisy && rng.uniform() < config.train_label_noise) label = !label;
      d.instances.push_back(
          make_instance(split + "-" + std::to_string(i), join_shuffled(rng, std::move(words)), label));
    }
    return d;
  };
  out.train = generate(config.n_train, "train", true);
  out.test = generate(config.n_test, "test", false);
  out.lexicon = Lexicon({LexiconEntry{config.planted_token, Category::OnI, 1}});
  return out;
}

SynthCorpus synth_dialect(const DialectSynthConfig& config) {
  check_rate(config.aae_rate, "AAE rate");
  check_rate(config.toxic_rate, "toxic rate");
  check_rate(config.annotation_bias, "annotation bias");
  check_rate(config.train_label_noise, "label noise");
  if (config.max_markers == 0) throw UsageError("max markers must be positive");
  const Vocab vocab = make_vocab(config.benign_vocab, config.toxic_vocab);
  Rng rng(derive_seed(config.seed, 0x44494131ULL));  // "DIA1"

  SynthCorpus out;
  auto generate = [&](std::size_t n, const std::string& split, bool biased) {
    Dataset d;
    d.split_name = split;
    d.provenance = "synth:dialect";
    for (std::size_t i = 0; i < n; ++i) {
      const bool aae = rng.uniform() < config.aae_rate;
      const bool toxic = rng.uniform() < config.toxic_rate;
      auto words = base_words(rng, vocab, toxic);
      std::vector<std::size_t> markers;
      if (aae) {
        const std::size_t count = 1 + rng.below(config.max_markers);
        for (std::size_t k = 0; k < count; ++k) {
          markers.push_back(rng.below(kMarkers.size()));
          words.push_back(std::string(kMarkers[markers.back()].aae));
        }
      }
      bool label = toxic;
      if (biased && !toxic) {
        for (std::size_t k = 0; k < markers.size() && !label; ++k) {
          label = rng.uniform() < config.annotation_bias;
        }
      }
      if (biased && rng.uniform() < config.train_label_noise) label = !label;
      const std::string id = split + "-" + std::to_string(i);
      Instance inst = make_instance(id, join_shuffled(rng, std::move(words)), label);

      DialectProbs probs;
      if (aae) {
        const double a = rng.uniform(0.55, 0.9);
        const double w = (1.0 - a) * rng.uniform(0.3, 0.8);
        const double h = (1.0 - a - w) * rng.uniform();
        probs.p = {a, w, h, 1.0 - a - w - h};
      } else {
        const double w = rng.uniform(0.5, 0.8);
        const double a = rng.uniform(0.0, 0.2);
        const double h = (1.0 - a - w) * rng.uniform();
        probs.p = {a, w, h, 1.0 - a - w - h};
      }
      inst.dialect = probs;
      const bool aa_author = aae ? rng.uniform() < 0.9 : rng.uniform() < 0.1;
      inst.author_group = aa_author ? AuthorGroup::african_american : AuthorGroup::white;

      if (aae) {
        std::string translated;
        for (std::string_view rest = inst.text; !rest.empty();) {
          const auto sp = rest.find(' ');
          const auto word = rest.substr(0, sp);
          rest = sp == std::string_view::npos ? std::string_view{} : rest.substr(sp + 1);
          std::string_view replacement = word;
          for (const auto& m : kMarkers) {
            if (word == m.aae) replacement = m.wae;
          }
          if (!translated.empty()) translated += ' ';
          translated += replacement;
        }
        out.translations.emplace(id, std::move(translated));
      }
      d.instances.push_back(std::move(inst));
    }
    return d;
  };
  out.train = generate(config.n_train, "train", true);
  out.test = generate(config.n_test, "test", false);
  out.lexicon = default_lexicon();
  return out;
}

void write_synth(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  save_dataset(corpus.train, dir / "train.jsonl", DatasetFormat::jsonl);
  save_dataset(corpus.test, dir / "test.jsonl", DatasetFormat::jsonl);
  write_file(dir / "lexicon.csv", to_lexicon_csv(corpus.lexicon));
  if (!corpus.translations.empty()) {
    std::vector<std::string> order;
    for (const auto& inst : corpus.train.instances) order.push_back(inst.id);
    for (const auto& inst : corpus.test.instances) order.push_back(inst.id);
    save_translations(corpus.translations, dir / "translations.tsv", order);
  }
}

}  // namespace toxdebias

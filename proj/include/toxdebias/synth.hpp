#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "toxdebias/corpus.hpp"
#include "toxdebias/lexicon.hpp"
#include "toxdebias/relabel.hpp"

namespace toxdebias {

// Planted lexical bias: gold toxicity comes from a set of toxic content
// words, and one planted token co-occurs with toxic labels far more often
// than with nontoxic ones. The lexicon lists the planted token as OnI.
struct LexicalSynthConfig {
  std::size_t n_train = 5000;
  std::size_t n_test = 2000;
  double toxic_rate = 0.4;
  double p_token_given_toxic = 0.7;
  double p_token_given_nontoxic = 0.08;
  std::size_t benign_vocab = 1000;
  std::size_t toxic_vocab = 30;
  double train_label_noise = 0.05;  // flips on train only
  std::string planted_token = "zonk";
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

// Planted dialectal bias: AAE-assigned texts carry 1..max_markers dialect
// marker words, and in the training split each marker independently gets a
// benign text labeled toxic with probability annotation_bias. Test labels are
// gold. Translations replace each marker
// with its WAE counterpart.
struct DialectSynthConfig {
  std::size_t n_train = 5000;
  std::size_t n_test = 2000;
  double aae_rate = 0.3;
  double toxic_rate = 0.3;
  double annotation_bias = 0.3;
  std::size_t max_markers = 4;
  double train_label_noise = 0.05;  // flips on train only
  std::size_t benign_vocab = 1000;
  std::size_t toxic_vocab = 30;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

struct SynthCorpus {
  Dataset train;
  Dataset test;
  Lexicon lexicon;
  TranslationTable translations;  // AAE-assigned instances of both splits
};

SynthCorpus synth_lexical(const LexicalSynthConfig& config);
SynthCorpus synth_dialect(const DialectSynthConfig& config);

// train.jsonl, test.jsonl, lexicon.csv and, when non-empty, translations.tsv.
void write_synth(const SynthCorpus& corpus, const std::filesystem::path& dir);

}  // namespace toxdebias

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qb/corpus.h"
#include "qb/ir.h"

namespace qb::synth {

// A generated quiz corpus with learnable structure: each answer owns a
// vocabulary of clue words and a few related entities; each fine type owns
// cue words. Clues get denser in later sentences.
struct SynthConfig {
  std::size_t answers = 50;
  std::size_t questions_per_answer = 20;
  std::size_t sentences = 4;
  std::size_t words_per_sentence = 12;
  std::size_t clue_words = 30;       // per answer
  std::size_t related_entities = 3;  // per answer
  std::size_t noise_words = 400;
  // Probability that a word is a clue, for the first and last sentence;
  // interpolated in between.
  double first_clue_rate = 0.12;
  double last_clue_rate = 0.45;
  std::uint64_t seed = 1;
};

struct MentionRow {
  std::string surface;
  double keyphraseness = 0.0;
  double link_probability = 0.0;
  std::string entity;
};

struct SynthCorpus {
  std::vector<corpus::QuestionRecord> records;
  std::vector<ir::WikiPage> wiki;
  std::vector<MentionRow> mentions;
  std::vector<std::pair<std::string, std::vector<std::string>>> types;  // title -> fine paths
  std::vector<std::pair<std::string, std::string>> aliases;            // alias -> title
};

SynthCorpus generate(const SynthConfig& config);

// dataset.jsonl, wiki.txt, mentions.tsv, types.tsv, aliases.tsv under `dir`.
void write_corpus(const std::string& dir, const SynthCorpus& corpus);

}  // namespace qb::synth

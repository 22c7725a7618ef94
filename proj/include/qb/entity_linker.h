#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "qb/textproc.h"

namespace qb::linker {

struct MentionEntry {
  double keyphraseness = 0.0;     // P(phrase is an anchor | phrase occurs)
  double link_probability = 0.0;  // P(entity | phrase is an anchor)
  std::string entity;
};

inline constexpr std::size_t kMaxPhraseTokens = 8;

class MentionDictionary {
 public:
  // Rows: surface<TAB>keyphraseness<TAB>link_probability<TAB>entity_title.
  // Duplicate surfaces keep the last row and add a warning.
  static MentionDictionary load(const std::string& path, std::vector<std::string>* warnings = nullptr);

  // Surface is tokenized and lowercased so lookups match token n-grams.
  void add(const std::string& surface, MentionEntry entry);
  const MentionEntry* find(const std::string& normalized) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t max_tokens() const { return max_tokens_; }

 private:
  std::unordered_map<std::string, MentionEntry> entries_;
  std::size_t max_tokens_ = 0;
};

struct EntityMention {
  std::string entity;
  std::string surface;
  std::size_t begin = 0;  // token span [begin, end)
  std::size_t end = 0;
};

struct Thresholds {
  double keyphraseness_min = 0.02;  // strict: keyphraseness > min
  double link_probability_min = 0.95;  // inclusive: link_probability >= min
};

// Greedy left-to-right longest match. The longest dictionary phrase at a
// position consumes its tokens whether or not it passes the thresholds, so
// raising a threshold can only remove mentions.
std::vector<EntityMention> detect_entities(const textproc::TokenizedText& tt, const MentionDictionary& dict,
                                           Thresholds thresholds = {});

std::string normalize_surface(const std::string& surface);

// A question tokenized once with its mentions, from which any token prefix
// can be viewed without re-running detection.
struct AnalyzedQuestion {
  std::string id;
  std::string text;
  textproc::TokenizedText tt;
  std::vector<EntityMention> mentions;

  std::size_t num_tokens() const { return tt.tokens.size(); }
  // Lowercased words of the first n tokens.
  std::vector<std::string> words(std::size_t n) const;
  // Entities whose mention lies entirely within the first n tokens.
  std::vector<std::string> entities(std::size_t n) const;
  std::string prefix_text(std::size_t n) const;
};

AnalyzedQuestion analyze(std::string id, std::string text, const MentionDictionary& dict,
                         Thresholds thresholds = {});

}  // namespace qb::linker

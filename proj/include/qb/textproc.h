#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace qb::textproc {

struct Token {
  std::string surface;
  std::string lower;
  std::string stem;
  int sentence_index = 0;
  std::size_t char_offset = 0;  // byte offset of the first character
  std::size_t char_end = 0;     // one past the last byte
};

// Half-open byte range of one sentence in the source text.
struct SentenceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct TokenizedText {
  std::vector<Token> tokens;
  std::vector<SentenceSpan> sentences;
  int sentence_count = 0;

  std::vector<std::string> lowered() const;
};

// Static word lists shipped under data/.
struct Resources {
  std::unordered_set<std::string> stopwords;
  std::vector<std::string> noun_suffixes;
  std::unordered_set<std::string> abbreviations;

  bool is_stopword(std::string_view w) const { return stopwords.count(std::string(w)) > 0; }

  static Resources load(const std::string& data_dir);
  // Loaded once from the compiled-in data directory (or $QB_DATA_DIR).
  static const Resources& defaults();
};

std::vector<std::string> load_word_list(const std::string& path);

// Lowercases ASCII and Latin-1 letters; other bytes pass through.
std::string casefold(std::string_view s);

TokenizedText tokenize(std::string_view text, const Resources& res = Resources::defaults());

// English Snowball (Porter2) stemmer over a lowercased word.
std::string stem(std::string_view word);

// tokenize -> lowercase -> drop stopwords -> stem.
std::vector<std::string> ir_terms(std::string_view text, const Resources& res = Resources::defaults());
std::vector<std::string> ir_terms(const TokenizedText& tt, const Resources& res = Resources::defaults());

inline constexpr char kBigramJoiner = '_';
std::vector<std::string> bigrams(const std::vector<std::string>& terms);

enum class PosTag { kOther, kNoun, kProperNoun };

class Tagger {
 public:
  virtual ~Tagger() = default;
  virtual std::vector<PosTag> tag(const TokenizedText& tt) const = 0;
};

// Capitalization and suffix heuristics standing in for a statistical tagger.
class HeuristicTagger : public Tagger {
 public:
  explicit HeuristicTagger(const Resources& res = Resources::defaults()) : res_(&res) {}
  std::vector<PosTag> tag(const TokenizedText& tt) const override;

 private:
  const Resources* res_;
};

std::vector<std::string> extract_nouns(const TokenizedText& tt, const Tagger& tagger);
std::vector<std::string> extract_proper_nouns(const TokenizedText& tt, const Tagger& tagger);
std::vector<std::string> extract_nouns(const TokenizedText& tt);
std::vector<std::string> extract_proper_nouns(const TokenizedText& tt);

}  // namespace qb::textproc

#include <unordered_set>

#include "qb/textproc.h"

namespace qb::textproc {

std::vector<std::string> ir_terms(const TokenizedText& tt, const Resources& res) {
  std::vector<std::string> out;
  out.reserve(tt.tokens.size());
  for (const auto& t : tt.tokens) {
    if (res.is_stopword(t.lower)) continue;
    out.push_back(t.stem);
  }
  return out;
}

std::vector<std::string> ir_terms(std::string_view text, const Resources& res) {
  return ir_terms(tokenize(text, res), res);
}

std::vector<std::string> bigrams(const std::vector<std::string>& terms) {
  std::vector<std::string> out;
  if (terms.size() < 2) return out;
  out.reserve(terms.size() - 1);
  for (std::size_t i = 0; i + 1 < terms.size(); ++i) {
    out.push_back(terms[i] + kBigramJoiner + terms[i + 1]);
  }
  return out;
}

namespace {

bool starts_upper(const std::string& surface) {
  if (surface.empty()) return false;
  auto c = static_cast<unsigned char>(surface[0]);
  if (c >= 'A' && c <= 'Z') return true;
  // Latin-1 capitals U+00C0..U+00DE.
  if (c == 0xC3 && surface.size() > 1) {
    auto c1 = static_cast<unsigned char>(surface[1]);
    return c1 >= 0x80 && c1 <= 0x9E && c1 != 0x97;
  }
  return false;
}

bool sentence_initial(const TokenizedText& tt, std::size_t i) {
  return i == 0 || tt.tokens[i - 1].sentence_index != tt.tokens[i].sentence_index;
}

bool has_noun_suffix(const std::string& lower, const std::vector<std::string>& suffixes) {
  for (const auto& s : suffixes) {
    // Require a stem of at least three characters before the suffix.
    if (lower.size() >= s.size() + 3 && lower.compare(lower.size() - s.size(), s.size(), s) == 0) {
      return true;
    }
  }
  return false;
}

std::vector<std::string> collect(const TokenizedText& tt, const std::vector<PosTag>& tags,
                                 bool proper_only) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < tt.tokens.size(); ++i) {
    if (tags[i] == PosTag::kProperNoun || (!proper_only && tags[i] == PosTag::kNoun)) {
      out.push_back(tt.tokens[i].stem);
    }
  }
  return out;
}

}  // namespace

std::vector<PosTag> HeuristicTagger::tag(const TokenizedText& tt) const {
  std::vector<PosTag> tags(tt.tokens.size(), PosTag::kOther);
  // Lowercased forms seen capitalized away from a sentence start.
  std::unordered_set<std::string> capitalized_mid;
  for (std::size_t i = 0; i < tt.tokens.size(); ++i) {
    if (!sentence_initial(tt, i) && starts_upper(tt.tokens[i].surface)) {
      capitalized_mid.insert(tt.tokens[i].lower);
    }
  }
  for (std::size_t i = 0; i < tt.tokens.size(); ++i) {
    const Token& t = tt.tokens[i];
    if (res_->is_stopword(t.lower)) continue;
    if (starts_upper(t.surface) &&
        (!sentence_initial(tt, i) || capitalized_mid.count(t.lower) > 0)) {
      tags[i] = PosTag::kProperNoun;
    } else if (has_noun_suffix(t.lower, res_->noun_suffixes)) {
      tags[i] = PosTag::kNoun;
    }
  }
  return tags;
}

std::vector<std::string> extract_nouns(const TokenizedText& tt, const Tagger& tagger) {
  return collect(tt, tagger.tag(tt), false);
}

std::vector<std::string> extract_proper_nouns(const TokenizedText& tt, const Tagger& tagger) {
  return collect(tt, tagger.tag(tt), true);
}

std::vector<std::string> extract_nouns(const TokenizedText& tt) {
  return extract_nouns(tt, HeuristicTagger());
}

std::vector<std::string> extract_proper_nouns(const TokenizedText& tt) {
  return extract_proper_nouns(tt, HeuristicTagger());
}

}  // namespace qb::textproc

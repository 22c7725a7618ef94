// English Snowball stemmer ("Porter2"), following the algorithm description
// published with the Snowball project.

#include <array>
#include <string>
#include <string_view>
#include <utility>

#include "qb/textproc.h"

namespace qb::textproc {
namespace {

bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
}

bool ends_with(const std::string& w, std::string_view suffix) {
  return w.size() >= suffix.size() && w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_double(const std::string& w) {
  if (w.size() < 2) return false;
  char c = w.back();
  if (c != w[w.size() - 2]) return false;
  return c == 'b' || c == 'd' || c == 'f' || c == 'g' || c == 'm' || c == 'n' || c == 'p' ||
         c == 'r' || c == 't';
}

bool is_li_ending(char c) {
  return c == 'c' || c == 'd' || c == 'e' || c == 'g' || c == 'h' || c == 'k' || c == 'm' ||
         c == 'n' || c == 'r' || c == 't';
}

// Short syllable ending at position end-1 of w[0, end).
bool short_syllable_at(const std::string& w, std::size_t end) {
  if (end == 2) return is_vowel(w[0]) && !is_vowel(w[1]);
  if (end < 3) return false;
  char a = w[end - 3], b = w[end - 2], c = w[end - 1];
  return !is_vowel(a) && is_vowel(b) && !is_vowel(c) && c != 'w' && c != 'x' && c != 'Y';
}

// Start of the region after the first non-vowel that follows a vowel at or
// beyond `from`.
std::size_t region_after(const std::string& w, std::size_t from) {
  for (std::size_t i = from + 1; i < w.size(); ++i) {
    if (!is_vowel(w[i]) && is_vowel(w[i - 1])) return i + 1;
  }
  return w.size();
}

class Stemmer {
 public:
  explicit Stemmer(std::string w) : w_(std::move(w)) {}

  std::string run();

 private:
  bool in_r1(std::size_t suffix_len) const { return w_.size() - suffix_len >= r1_; }
  bool in_r2(std::size_t suffix_len) const { return w_.size() - suffix_len >= r2_; }
  bool is_short_word() const { return r1_ >= w_.size() && short_syllable_at(w_, w_.size()); }
  void chop(std::size_t n) { w_.resize(w_.size() - n); }
  void replace(std::size_t n, std::string_view with) {
    chop(n);
    w_ += with;
  }

  void step0();
  bool step1a();
  void step1b();
  void step1c();
  void step2();
  void step3();
  void step4();
  void step5();

  std::string w_;
  std::size_t r1_ = 0;
  std::size_t r2_ = 0;
};

void Stemmer::step0() {
  for (std::string_view s : {"'s'", "'s", "'"}) {
    if (ends_with(w_, s)) {
      chop(s.size());
      return;
    }
  }
}

bool Stemmer::step1a() {
  if (ends_with(w_, "sses")) {
    replace(4, "ss");
  } else if (ends_with(w_, "ied") || ends_with(w_, "ies")) {
    replace(3, w_.size() > 4 ? "i" : "ie");
  } else if (ends_with(w_, "us") || ends_with(w_, "ss")) {
    // unchanged
  } else if (ends_with(w_, "s")) {
    for (std::size_t i = 0; i + 2 < w_.size(); ++i) {
      if (is_vowel(w_[i])) {
        chop(1);
        break;
      }
    }
  }
  static constexpr std::array<std::string_view, 8> kInvariant = {
      "inning", "outing", "canning", "herring", "earring", "proceed", "exceed", "succeed"};
  for (auto s : kInvariant) {
    if (w_ == s) return true;
  }
  return false;
}

void Stemmer::step1b() {
  if (ends_with(w_, "eedly")) {
    if (in_r1(5)) replace(5, "ee");
    return;
  }
  if (ends_with(w_, "eed")) {
    if (in_r1(3)) replace(3, "ee");
    return;
  }
  std::size_t n = 0;
  for (std::string_view s : {"ingly", "edly", "ing", "ed"}) {
    if (ends_with(w_, s)) {
      n = s.size();
      break;
    }
  }
  if (n == 0) return;
  bool has_vowel = false;
  for (std::size_t i = 0; i + n < w_.size(); ++i) has_vowel |= is_vowel(w_[i]);
  if (!has_vowel) return;
  chop(n);
  if (ends_with(w_, "at") || ends_with(w_, "bl") || ends_with(w_, "iz")) {
    w_ += 'e';
  } else if (is_double(w_)) {
    chop(1);
  } else if (is_short_word()) {
    w_ += 'e';
  }
}

void Stemmer::step1c() {
  if (w_.size() > 2 && (w_.back() == 'y' || w_.back() == 'Y') && !is_vowel(w_[w_.size() - 2])) {
    w_.back() = 'i';
  }
}

void Stemmer::step2() {
  static constexpr std::array<std::pair<std::string_view, std::string_view>, 24> kRules = {{
      {"ization", "ize"}, {"ational", "ate"}, {"fulness", "ful"}, {"ousness", "ous"},
      {"iveness", "ive"}, {"tional", "tion"}, {"biliti", "ble"},  {"lessli", "less"},
      {"entli", "ent"},   {"ation", "ate"},   {"alism", "al"},    {"aliti", "al"},
      {"ousli", "ous"},   {"iviti", "ive"},   {"fulli", "ful"},   {"enci", "ence"},
      {"anci", "ance"},   {"abli", "able"},   {"izer", "ize"},    {"ator", "ate"},
      {"alli", "al"},     {"bli", "ble"},     {"ogi", "og"},      {"li", ""},
  }};
  for (const auto& [suffix, repl] : kRules) {
    if (!ends_with(w_, suffix)) continue;
    if (!in_r1(suffix.size())) return;
    if (suffix == "ogi") {
      if (w_.size() > 3 && w_[w_.size() - 4] == 'l') replace(3, repl);
    } else if (suffix == "li") {
      if (w_.size() > 2 && is_li_ending(w_[w_.size() - 3])) chop(2);
    } else {
      replace(suffix.size(), repl);
    }
    return;
  }
}

void Stemmer::step3() {
  static constexpr std::array<std::pair<std::string_view, std::string_view>, 9> kRules = {{
      {"ational", "ate"}, {"tional", "tion"}, {"alize", "al"}, {"icate", "ic"}, {"iciti", "ic"},
      {"ative", ""},      {"ical", "ic"},     {"ness", ""},    {"ful", ""},
  }};
  for (const auto& [suffix, repl] : kRules) {
    if (!ends_with(w_, suffix)) continue;
    if (!in_r1(suffix.size())) return;
    if (suffix == "ative") {
      if (in_r2(5)) chop(5);
    } else {
      replace(suffix.size(), repl);
    }
    return;
  }
}

void Stemmer::step4() {
  static constexpr std::array<std::string_view, 18> kSuffixes = {
      "ement", "ance", "ence", "able", "ible", "ment", "ant", "ent", "ism", "ate",
      "iti",   "ous",  "ive",  "ize",  "ion",  "al",   "er",  "ic"};
  for (auto suffix : kSuffixes) {
    if (!ends_with(w_, suffix)) continue;
    if (!in_r2(suffix.size())) return;
    if (suffix == "ion") {
      char c = w_.size() > 3 ? w_[w_.size() - 4] : '\0';
      if (c == 's' || c == 't') chop(3);
    } else {
      chop(suffix.size());
    }
    return;
  }
}

void Stemmer::step5() {
  if (ends_with(w_, "e")) {
    if (in_r2(1) || (in_r1(1) && !short_syllable_at(w_, w_.size() - 1))) chop(1);
  } else if (ends_with(w_, "l")) {
    if (in_r2(1) && w_.size() > 1 && w_[w_.size() - 2] == 'l') chop(1);
  }
}

std::string Stemmer::run() {
  if (w_.size() <= 2) return w_;
  static constexpr std::array<std::pair<std::string_view, std::string_view>, 18> kExceptions = {{
      {"skis", "ski"},     {"skies", "sky"},   {"dying", "die"},    {"lying", "lie"},
      {"tying", "tie"},    {"idly", "idl"},    {"gently", "gentl"}, {"ugly", "ugli"},
      {"early", "earli"},  {"only", "onli"},   {"singly", "singl"}, {"sky", "sky"},
      {"news", "news"},    {"howe", "howe"},   {"atlas", "atlas"},  {"cosmos", "cosmos"},
      {"bias", "bias"},    {"andes", "andes"},
  }};
  for (const auto& [word, stemmed] : kExceptions) {
    if (w_ == word) return std::string(stemmed);
  }
  if (w_[0] == '\'') w_.erase(0, 1);
  if (w_.empty()) return w_;
  if (w_[0] == 'y') w_[0] = 'Y';
  for (std::size_t i = 1; i < w_.size(); ++i) {
    if (w_[i] == 'y' && is_vowel(w_[i - 1])) w_[i] = 'Y';
  }

  r1_ = w_.size();
  for (std::string_view prefix : {"gener", "commun", "arsen"}) {
    if (w_.starts_with(prefix)) {
      r1_ = prefix.size();
      break;
    }
  }
  if (r1_ == w_.size()) r1_ = region_after(w_, 0);
  r2_ = r1_ < w_.size() ? region_after(w_, r1_) : w_.size();

  step0();
  if (!step1a()) {
    step1b();
    step1c();
    step2();
    step3();
    step4();
    step5();
  }
  for (auto& c : w_) {
    if (c == 'Y') c = 'y';
  }
  return w_;
}

}  // namespace

std::string stem(std::string_view word) { return Stemmer(std::string(word)).run(); }

}  // namespace qb::textproc

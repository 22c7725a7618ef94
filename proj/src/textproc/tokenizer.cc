#include <cstdint>
#include <cstdlib>
#include <fstream>

#include "qb/error.h"
#include "qb/textproc.h"

namespace qb::textproc {
namespace {

// Decodes one UTF-8 code point starting at s[i]; advances i. Invalid bytes
// decode as themselves.
char32_t next_codepoint(std::string_view s, std::size_t& i) {
  auto b0 = static_cast<unsigned char>(s[i]);
  int len = 1;
  char32_t cp = b0;
  if (b0 >= 0xF0 && b0 < 0xF8) {
    len = 4;
    cp = b0 & 0x07;
  } else if (b0 >= 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if (b0 >= 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  }
  if (len > 1 && i + len <= s.size()) {
    for (int k = 1; k < len; ++k) {
      auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) {
        ++i;
        return b0;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    i += len;
    return cp;
  }
  ++i;
  return b0;
}

bool is_word_char(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9');
  }
  if (cp <= 0xBF) return false;                   // Latin-1 punctuation and symbols
  if (cp == 0xD7 || cp == 0xF7) return false;     // multiplication, division
  if (cp >= 0x2000 && cp <= 0x2BFF) return false; // general punctuation, arrows, symbols
  if (cp >= 0x3000 && cp <= 0x303F) return false; // CJK punctuation
  return true;
}

bool is_apostrophe(char32_t cp) { return cp == '\'' || cp == 0x2019; }

bool is_upper(char32_t cp) {
  return (cp >= 'A' && cp <= 'Z') || (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7);
}

bool is_sentence_final(char32_t cp) { return cp == '.' || cp == '?' || cp == '!'; }

// Closing quotes/brackets allowed between a terminator and the following space.
bool is_closer(char32_t cp) {
  return cp == '"' || cp == '\'' || cp == ')' || cp == ']' || cp == 0x2019 || cp == 0x201D;
}

bool is_opener(char32_t cp) {
  return cp == '"' || cp == '\'' || cp == '(' || cp == '[' || cp == '`' || cp == 0x2018 ||
         cp == 0x201C;
}

bool is_space(char32_t cp) { return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == 0xA0; }

}  // namespace

std::string casefold(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto c = static_cast<unsigned char>(s[i]);
    if (c >= 'A' && c <= 'Z') {
      out.push_back(static_cast<char>(c + 32));
    } else if (c == 0xC3 && i + 1 < s.size()) {
      // U+00C0..U+00DE encode as C3 80..C3 9E; lowercase is +0x20.
      auto c1 = static_cast<unsigned char>(s[i + 1]);
      out.push_back(static_cast<char>(c));
      if (c1 >= 0x80 && c1 <= 0x9E && c1 != 0x97) c1 += 0x20;
      out.push_back(static_cast<char>(c1));
      ++i;
    } else {
      out.push_back(static_cast<char>(c));
    }
  }
  return out;
}

std::vector<std::string> TokenizedText::lowered() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.lower);
  return out;
}

std::vector<std::string> load_word_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read word list " + path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    words.push_back(line);
  }
  return words;
}

Resources Resources::load(const std::string& data_dir) {
  Resources r;
  for (auto& w : load_word_list(data_dir + "/stopwords.txt")) r.stopwords.insert(std::move(w));
  r.noun_suffixes = load_word_list(data_dir + "/noun_suffixes.txt");
  for (auto& w : load_word_list(data_dir + "/abbreviations.txt")) r.abbreviations.insert(std::move(w));
  return r;
}

const Resources& Resources::defaults() {
  static const Resources res = [] {
    const char* env = std::getenv("QB_DATA_DIR");
    return Resources::load(env != nullptr ? env : QB_DATA_DIR);
  }();
  return res;
}

TokenizedText tokenize(std::string_view text, const Resources& res) {
  TokenizedText tt;
  int sentence = 0;
  bool pending_break = false;
  std::size_t sentence_begin = std::string_view::npos;
  std::size_t last_token_end = 0;

  auto close_sentence = [&](std::size_t end) {
    if (sentence_begin != std::string_view::npos) {
      tt.sentences.push_back({sentence_begin, end});
      sentence_begin = std::string_view::npos;
    }
  };

  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t start = i;
    char32_t cp = next_codepoint(text, i);
    if (is_word_char(cp)) {
      std::size_t end = i;
      while (i < text.size()) {
        std::size_t j = i;
        char32_t c = next_codepoint(text, j);
        if (is_word_char(c)) {
          i = end = j;
          continue;
        }
        if (is_apostrophe(c) && j < text.size()) {
          std::size_t k = j;
          if (is_word_char(next_codepoint(text, k))) {
            i = end = k;
            continue;
          }
        }
        break;
      }
      if (pending_break) {
        close_sentence(last_token_end);
        ++sentence;
        pending_break = false;
      }
      if (sentence_begin == std::string_view::npos) sentence_begin = start;
      Token tok;
      tok.surface = std::string(text.substr(start, end - start));
      tok.lower = casefold(tok.surface);
      tok.stem = stem(tok.lower);
      tok.sentence_index = sentence;
      tok.char_offset = start;
      tok.char_end = end;
      tt.tokens.push_back(std::move(tok));
      last_token_end = end;
      continue;
    }
    if (!is_sentence_final(cp) || tt.tokens.empty() || pending_break) continue;

    // Candidate boundary: terminator, optional closers, whitespace, optional
    // openers, then an uppercase letter.
    const Token& prev = tt.tokens.back();
    if (cp == '.') {
      if (res.abbreviations.count(prev.lower) > 0) continue;
      bool single_initial = prev.surface.size() == 1 && prev.surface[0] >= 'A' && prev.surface[0] <= 'Z';
      if (single_initial && prev.char_end == start) continue;
    }
    std::size_t j = i;
    std::size_t sentence_end = i;
    bool saw_space = false;
    bool boundary = false;
    while (j < text.size()) {
      std::size_t k = j;
      char32_t c = next_codepoint(text, k);
      if (!saw_space && (is_closer(c) || is_sentence_final(c))) {
        j = k;
        sentence_end = k;
        continue;
      }
      if (is_space(c)) {
        saw_space = true;
        j = k;
        continue;
      }
      if (saw_space && is_opener(c)) {
        j = k;
        continue;
      }
      boundary = saw_space && is_upper(c);
      break;
    }
    if (boundary) {
      pending_break = true;
      last_token_end = sentence_end;
    }
  }
  if (!tt.tokens.empty()) {
    // Trailing punctuation belongs to the final sentence.
    std::size_t end = tt.tokens.back().char_end;
    std::size_t j = end;
    while (j < text.size()) {
      std::size_t k = j;
      char32_t c = next_codepoint(text, k);
      if (is_space(c)) break;
      j = k;
    }
    close_sentence(pending_break ? last_token_end : j);
  }
  tt.sentence_count = tt.tokens.empty() ? 0 : sentence + 1;
  return tt;
}

}  // namespace qb::textproc

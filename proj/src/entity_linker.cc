#include <algorithm>
#include <charconv>
#include <fstream>

#include "qb/entity_linker.h"
#include "qb/error.h"

namespace qb::linker {
namespace {

double parse_probability(const std::string& field, const std::string& path, std::size_t lineno) {
  double v = 0.0;
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParseError(path, lineno, "not a number: " + field);
  if (!(v >= 0.0 && v <= 1.0)) throw ParseError(path, lineno, "probability out of [0,1]: " + field);
  return v;
}

std::string join_lower(const textproc::TokenizedText& tt, std::size_t begin, std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out.push_back(' ');
    out += tt.tokens[i].lower;
  }
  return out;
}

}  // namespace

std::string normalize_surface(const std::string& surface) {
  auto tt = textproc::tokenize(surface);
  return join_lower(tt, 0, tt.tokens.size());
}

MentionDictionary MentionDictionary::load(const std::string& path, std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read mention dictionary " + path);
  MentionDictionary dict;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 4) throw ParseError(path, lineno, "expected 4 tab-separated fields");
    MentionEntry entry;
    entry.keyphraseness = parse_probability(fields[1], path, lineno);
    entry.link_probability = parse_probability(fields[2], path, lineno);
    entry.entity = fields[3];
    if (entry.entity.empty()) throw ParseError(path, lineno, "empty entity title");
    std::string key = normalize_surface(fields[0]);
    if (key.empty()) throw ParseError(path, lineno, "empty surface");
    if (dict.find(key) != nullptr && warnings != nullptr) {
      warnings->push_back(path + ":" + std::to_string(lineno) + ": duplicate surface '" + key +
                          "', keeping last");
    }
    dict.add(fields[0], std::move(entry));
  }
  return dict;
}

void MentionDictionary::add(const std::string& surface, MentionEntry entry) {
  auto tt = textproc::tokenize(surface);
  if (tt.tokens.empty()) return;
  std::size_t n = std::min(tt.tokens.size(), kMaxPhraseTokens);
  max_tokens_ = std::max(max_tokens_, n);
  entries_[join_lower(tt, 0, tt.tokens.size())] = std::move(entry);
}

const MentionEntry* MentionDictionary::find(const std::string& normalized) const {
  auto it = entries_.find(normalized);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<EntityMention> detect_entities(const textproc::TokenizedText& tt, const MentionDictionary& dict,
                                           Thresholds thresholds) {
  std::vector<EntityMention> out;
  const std::size_t n_tokens = tt.tokens.size();
  std::size_t i = 0;
  while (i < n_tokens) {
    std::size_t longest = std::min(dict.max_tokens(), n_tokens - i);
    std::size_t matched = 0;
    for (std::size_t len = longest; len >= 1; --len) {
      const MentionEntry* e = dict.find(join_lower(tt, i, i + len));
      if (e == nullptr) continue;
      matched = len;
      if (e->keyphraseness > thresholds.keyphraseness_min &&
          e->link_probability >= thresholds.link_probability_min) {
        EntityMention m;
        m.entity = e->entity;
        m.begin = i;
        m.end = i + len;
        m.surface = std::string(tt.tokens[i].surface);
        for (std::size_t k = i + 1; k < i + len; ++k) m.surface += " " + tt.tokens[k].surface;
        out.push_back(std::move(m));
      }
      break;
    }
    i += matched > 0 ? matched : 1;
  }
  return out;
}

std::vector<std::string> AnalyzedQuestion::words(std::size_t n) const {
  n = std::min(n, tt.tokens.size());
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(tt.tokens[i].lower);
  return out;
}

std::vector<std::string> AnalyzedQuestion::entities(std::size_t n) const {
  std::vector<std::string> out;
  for (const auto& m : mentions) {
    if (m.end <= n) out.push_back(m.entity);
  }
  return out;
}

std::string AnalyzedQuestion::prefix_text(std::size_t n) const {
  if (n >= tt.tokens.size()) return text;
  if (n == 0) return {};
  return text.substr(0, tt.tokens[n - 1].char_end);
}

AnalyzedQuestion analyze(std::string id, std::string text, const MentionDictionary& dict, Thresholds thresholds) {
  AnalyzedQuestion q;
  q.id = std::move(id);
  q.text = std::move(text);
  q.tt = textproc::tokenize(q.text);
  q.mentions = detect_entities(q.tt, dict, thresholds);
  return q;
}

}  // namespace qb::linker

#include <cstdio>
#include <map>

#include "qb/match.h"

namespace qb::match {

std::size_t prefix_tokens(const linker::AnalyzedQuestion& q, int k) {
  if (k <= 0) return q.num_tokens();
  std::size_t n = 0;
  for (const auto& t : q.tt.tokens) {
    if (t.sentence_index >= k) break;
    ++n;
  }
  return n;
}

EvalRow evaluate(const std::vector<EvalQuestion>& questions, const Ranker& ranker, std::string name) {
  EvalRow row;
  row.name = std::move(name);
  row.questions = questions.size();
  if (questions.empty()) return row;
  std::array<std::size_t, kPrefixLevels.size()> hits{};
  for (const auto& eq : questions) {
    std::map<std::size_t, int> cache;  // short questions share prefixes across levels
    for (std::size_t l = 0; l < kPrefixLevels.size(); ++l) {
      std::size_t n = prefix_tokens(*eq.question, kPrefixLevels[l]);
      auto it = cache.find(n);
      if (it == cache.end()) it = cache.emplace(n, ranker(*eq.question, n)).first;
      if (it->second == eq.gold && eq.gold >= 0) ++hits[l];
    }
  }
  for (std::size_t l = 0; l < hits.size(); ++l)
    row.accuracy[l] = static_cast<double>(hits[l]) / static_cast<double>(questions.size());
  return row;
}

std::string EvalReport::format() const {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-24s %6s %6s %6s %6s %6s\n", "model", "1", "1-2", "1-3", "full", "n");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-24s %6.3f %6.3f %6.3f %6.3f %6zu\n", r.name.c_str(), r.accuracy[0],
                  r.accuracy[1], r.accuracy[2], r.accuracy[3], r.questions);
    out += buf;
  }
  return out;
}

}  // namespace qb::match

#include <cstdlib>
#include <fstream>

#include "qb/corpus.h"
#include "qb/error.h"

namespace qb::corpus {

const std::array<std::string_view, kNumCoarseTypes> kCoarseTypes = {
    "person", "organization", "location", "product", "art", "event", "building", "other"};

namespace {

std::string strip_slashes(std::string_view s) {
  while (!s.empty() && s.front() == '/') s.remove_prefix(1);
  while (!s.empty() && s.back() == '/') s.remove_suffix(1);
  return std::string(s);
}

}  // namespace

TypeSystem TypeSystem::load(const std::string& data_dir) {
  TypeSystem ts;
  for (const auto& line : textproc::load_word_list(data_dir + "/figer_types.txt")) {
    std::string t = strip_slashes(line);
    ts.fine_index_.emplace(t, static_cast<int>(ts.fine_.size()));
    ts.fine_.push_back(std::move(t));
  }
  const std::string map_path = data_dir + "/coarse_types.tsv";
  std::size_t lineno = 0;
  std::ifstream in(map_path);
  if (!in) throw Error("cannot read " + map_path);
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(map_path, lineno, "expected segment<TAB>coarse");
    std::string coarse = line.substr(tab + 1);
    if (ts.coarse_index(coarse) < 0) throw ParseError(map_path, lineno, "unknown coarse type " + coarse);
    ts.segment_to_coarse_[line.substr(0, tab)] = coarse;
  }
  return ts;
}

const TypeSystem& TypeSystem::defaults() {
  static const TypeSystem ts = [] {
    const char* env = std::getenv("QB_DATA_DIR");
    return TypeSystem::load(env != nullptr ? env : QB_DATA_DIR);
  }();
  return ts;
}

int TypeSystem::fine_index(std::string_view type) const {
  auto it = fine_index_.find(strip_slashes(type));
  return it == fine_index_.end() ? -1 : it->second;
}

int TypeSystem::coarse_index(std::string_view type) const {
  for (int i = 0; i < kNumCoarseTypes; ++i) {
    if (kCoarseTypes[static_cast<std::size_t>(i)] == type) return i;
  }
  return -1;
}

std::string TypeSystem::coarse_of(std::string_view fine_type) const {
  std::string t = strip_slashes(fine_type);
  std::string segment = t.substr(0, t.find('/'));
  auto it = segment_to_coarse_.find(segment);
  return it == segment_to_coarse_.end() ? "other" : it->second;
}

int TypeSystem::primary_coarse(const TypeEntry& entry) const {
  for (int i = 0; i < kNumCoarseTypes; ++i) {
    if (entry.coarse.count(std::string(kCoarseTypes[static_cast<std::size_t>(i)])) > 0) return i;
  }
  return -1;
}

TypeAssignment TypeAssignment::load(const std::string& path, const TypeSystem& types) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read type mapping " + path);
  TypeAssignment ta;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path, lineno, "expected title<TAB>types");
    std::vector<std::string> paths;
    std::string rest = line.substr(tab + 1);
    std::size_t start = 0;
    while (start <= rest.size()) {
      auto comma = rest.find(',', start);
      std::string p = rest.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (!p.empty()) paths.push_back(p);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    for (const auto& p : paths) {
      if (types.fine_index(p) < 0) throw ParseError(path, lineno, "type not in inventory: " + p);
    }
    ta.set(line.substr(0, tab), paths, types);
  }
  return ta;
}

void TypeAssignment::set(const std::string& title, const std::vector<std::string>& fine_paths,
                         const TypeSystem& types) {
  TypeEntry entry;
  for (const auto& p : fine_paths) {
    std::string t = strip_slashes(p);
    if (t.empty()) continue;
    entry.coarse.insert(types.coarse_of(t));
    entry.fine.insert(std::move(t));
  }
  map_[title] = std::move(entry);
}

const TypeEntry& TypeAssignment::assign_types(std::string_view title) const {
  static const TypeEntry kEmpty;
  auto it = map_.find(std::string(title));
  return it == map_.end() ? kEmpty : it->second;
}

}  // namespace qb::corpus

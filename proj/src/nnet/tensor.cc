#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "qb/error.h"
#include "qb/nnet.h"

namespace qb::nnet {

void Matrix::fill_uniform(float lo, float hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> dist(lo, hi);
  for (auto& v : data_) v = dist(rng);
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

std::uint64_t fnv1a(std::span<const std::byte> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (std::byte b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t checksum(const Matrix& m) {
  auto h = fnv1a(std::as_bytes(m.values()));
  std::uint64_t shape[2] = {m.rows(), m.cols()};
  return fnv1a(std::as_bytes(std::span<const std::uint64_t>(shape)), h);
}

std::uint64_t vocabulary_hash(const std::vector<std::string>& tokens) {
  std::uint64_t h = 14695981039346656037ull;
  for (const auto& t : tokens) {
    h = fnv1a(std::as_bytes(std::span<const char>(t.data(), t.size())), h);
    const char sep = '\n';
    h = fnv1a(std::as_bytes(std::span<const char>(&sep, 1)), h);
  }
  return h;
}

EmbeddingTable::EmbeddingTable(std::vector<std::string> tokens, std::size_t dim)
    : tokens_(std::move(tokens)), table_(tokens_.size(), dim) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw Error("duplicate embedding token " + tokens_[i]);
    }
  }
}

int EmbeddingTable::index(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? -1 : it->second;
}

EmbeddingTable EmbeddingTable::load(const std::string& path, std::size_t dim) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read embeddings " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path, 1, "missing header");
  std::size_t count = 0, declared = 0;
  {
    std::istringstream hs(line);
    if (!(hs >> count >> declared)) throw ParseError(path, 1, "header must be 'count dim'");
  }
  if (declared != dim) {
    throw ParseError(path, 1, "declared dim " + std::to_string(declared) + " != expected " + std::to_string(dim));
  }
  std::vector<std::string> tokens;
  std::vector<float> values;
  tokens.reserve(count);
  values.reserve(count * dim);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t pos = line.find(' ');
    if (pos == std::string::npos) throw ParseError(path, lineno, "no vector values");
    tokens.push_back(line.substr(0, pos));
    std::size_t got = 0;
    const char* p = line.data() + pos;
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      float v = 0.0f;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc() || (next != end && *next != ' ')) throw ParseError(path, lineno, "non-numeric field");
      values.push_back(v);
      ++got;
      p = next;
    }
    if (got != dim) {
      throw ParseError(path, lineno, "expected " + std::to_string(dim) + " values, got " + std::to_string(got));
    }
  }
  if (tokens.size() != count) {
    throw ParseError(path, lineno, "header declares " + std::to_string(count) + " rows, found " +
                                       std::to_string(tokens.size()));
  }
  EmbeddingTable table;
  table.table_ = Matrix(tokens.size(), dim);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!table.index_.emplace(tokens[i], static_cast<int>(i)).second) {
      throw ParseError(path, i + 2, "duplicate token " + tokens[i]);
    }
  }
  std::copy(values.begin(), values.end(), table.table_.values().begin());
  table.tokens_ = std::move(tokens);
  return table;
}

void EmbeddingTable::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << tokens_.size() << ' ' << dim() << '\n';
  char buf[32];
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    out << tokens_[i];
    for (float v : table_.row(i)) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(end - buf));
    }
    out << '\n';
  }
}

std::string entity_token(std::string_view title) {
  std::string out(kEntityPrefix);
  for (char c : title) out.push_back(c == ' ' ? '_' : c);
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

}  // namespace qb::nnet

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace qb::nnet {

// Dense row-major float32 matrix. A vector is a 1×n or n×1 matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, float fill = 0.0f) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }

  void fill(float v) { std::fill(data_.begin(), data_.end(), v); }
  void fill_uniform(float lo, float hi, std::mt19937_64& rng);
  bool all_finite() const;
  bool operator==(const Matrix& o) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

// A trainable tensor and its gradient accumulator.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool frozen = false;

  Parameter() = default;
  Parameter(std::string n, std::size_t rows, std::size_t cols) : name(std::move(n)), value(rows, cols), grad(rows, cols) {}
  void zero_grad() { grad.fill(0.0f); }
};

// FNV-1a over the raw bytes; used for checksums and vocabulary hashes.
std::uint64_t fnv1a(std::span<const std::byte> bytes, std::uint64_t seed = 14695981039346656037ull);
std::uint64_t checksum(const Matrix& m);
std::uint64_t vocabulary_hash(const std::vector<std::string>& tokens);

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<std::string> tokens, std::size_t dim);

  // Text format: first line "count dim", then "token v1 ... vdim".
  static EmbeddingTable load(const std::string& path, std::size_t dim);
  void save(const std::string& path) const;

  int index(std::string_view token) const;  // -1 when out of vocabulary
  const std::string& token(std::size_t i) const { return tokens_[i]; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t vocab_size() const { return tokens_.size(); }
  std::size_t dim() const { return table_.cols(); }

  Matrix& table() { return table_; }
  const Matrix& table() const { return table_; }

  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  Matrix table_;
  bool frozen_ = false;
};

inline constexpr std::string_view kEntityPrefix = "ENTITY/";
// "The Metamorphosis (novella)" -> "ENTITY/The_Metamorphosis_(novella)".
std::string entity_token(std::string_view title);

struct OptimizerConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static OptimizerConfig adam() { return {}; }
  static OptimizerConfig adamax() { return {2e-3, 0.9, 0.999, 1e-8}; }
};

struct OptimizerState {
  std::vector<std::vector<float>> first_moment;
  std::vector<std::vector<float>> second_moment;  // infinity norm for Adamax
  std::int64_t step = 0;
};

// Bias-corrected Adam.
class Adam {
 public:
  explicit Adam(OptimizerConfig config = OptimizerConfig::adam()) : config_(config) {}
  void step(std::span<Parameter* const> params);
  const OptimizerState& state() const { return state_; }

 private:
  OptimizerConfig config_;
  OptimizerState state_;
};

// Adam with the infinity-norm second moment.
class Adamax {
 public:
  explicit Adamax(OptimizerConfig config = OptimizerConfig::adamax()) : config_(config) {}
  void step(std::span<Parameter* const> params);
  const OptimizerState& state() const { return state_; }

 private:
  OptimizerConfig config_;
  OptimizerState state_;
};

// Single-tensor update rules underlying the optimizers.
void adam_update(std::span<float> params, std::span<const float> grads, std::span<float> m, std::span<float> v,
                 std::int64_t step, const OptimizerConfig& config);
void adamax_update(std::span<float> params, std::span<const float> grads, std::span<float> m,
                   std::span<float> u, std::int64_t step, const OptimizerConfig& config);

std::vector<double> softmax(std::span<const double> logits);
double sigmoid(double x);
inline double relu(double x) { return x > 0.0 ? x : 0.0; }
// log(sigmoid(x)) without overflow.
double log_sigmoid(double x);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst;  // "param[index]"
};

// Central finite differences against the gradients left in each
// Parameter::grad by `loss_and_grad`. `loss` must be deterministic. Samples up
// to `samples_per_param` coordinates per parameter.
GradCheckResult gradient_check(const std::function<double()>& loss, const std::function<void()>& loss_and_grad,
                               std::span<Parameter* const> params, double eps = 1e-3,
                               std::size_t samples_per_param = 20, std::uint64_t seed = 7);

// Model persistence: <dir>/<stem>.json manifest naming each tensor, plus one
// little-endian float32 sidecar per tensor.
void save_tensors(const std::string& dir, const std::string& stem, const nlohmann::json& meta,
                  const std::vector<std::pair<std::string, const Matrix*>>& tensors);
struct LoadedTensors {
  nlohmann::json meta;
  std::map<std::string, Matrix> tensors;
};
LoadedTensors load_tensors(const std::string& dir, const std::string& stem);

void write_lines(const std::string& path, const std::vector<std::string>& lines);
std::vector<std::string> read_lines(const std::string& path);

}  // namespace qb::nnet

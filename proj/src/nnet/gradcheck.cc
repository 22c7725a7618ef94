#include <algorithm>
#include <cmath>
#include <numeric>

#include "qb/nnet.h"

namespace qb::nnet {

GradCheckResult gradient_check(const std::function<double()>& loss, const std::function<void()>& loss_and_grad,
                               std::span<Parameter* const> params, double eps, std::size_t samples_per_param,
                               std::uint64_t seed) {
  for (Parameter* p : params) p->zero_grad();
  loss_and_grad();

  std::mt19937_64 rng(seed);
  GradCheckResult result;
  for (Parameter* p : params) {
    if (p->frozen) continue;
    auto values = p->value.values();
    std::vector<std::size_t> coords(values.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (coords.size() > samples_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(samples_per_param);
    }
    for (std::size_t c : coords) {
      const float original = values[c];
      const auto plus = static_cast<float>(original + eps);
      const auto minus = static_cast<float>(original - eps);
      values[c] = plus;
      const double f_plus = loss();
      values[c] = minus;
      const double f_minus = loss();
      values[c] = original;
      // Step measured on the float grid so rounding of the perturbation
      // does not bias the estimate.
      const double numeric = (f_plus - f_minus) / (static_cast<double>(plus) - static_cast<double>(minus));
      const double analytic = p->grad.values()[c];
      const double rel = std::abs(analytic - numeric) / std::max(std::abs(numeric), 1e-6);
      ++result.coordinates;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst = p->name + "[" + std::to_string(c) + "]";
      }
    }
  }
  return result;
}

}  // namespace qb::nnet

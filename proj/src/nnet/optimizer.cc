#include <algorithm>
#include <cmath>

#include "qb/error.h"
#include "qb/nnet.h"

namespace qb::nnet {
namespace {

void check_shapes(std::span<const float> params, std::span<const float> grads, std::span<const float> m,
                  std::span<const float> v) {
  if (params.size() != grads.size() || params.size() != m.size() || params.size() != v.size()) {
    throw Error("optimizer: parameter/gradient/moment shape mismatch");
  }
}

void ensure_state(OptimizerState& state, std::span<Parameter* const> params) {
  if (state.first_moment.empty()) {
    for (const Parameter* p : params) {
      state.first_moment.emplace_back(p->value.size(), 0.0f);
      state.second_moment.emplace_back(p->value.size(), 0.0f);
    }
  }
  if (state.first_moment.size() != params.size()) throw Error("optimizer: parameter list changed");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->value.size() != params[i]->grad.size() ||
        params[i]->value.size() != state.first_moment[i].size()) {
      throw Error("optimizer: shape mismatch for " + params[i]->name);
    }
  }
}

}  // namespace

void adam_update(std::span<float> params, std::span<const float> grads, std::span<float> m, std::span<float> v,
                 std::int64_t step, const OptimizerConfig& c) {
  check_shapes(params, grads, m, v);
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    const double mi = c.beta1 * m[i] + (1.0 - c.beta1) * g;
    const double vi = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
    m[i] = static_cast<float>(mi);
    v[i] = static_cast<float>(vi);
    const double m_hat = mi / bc1;
    const double v_hat = vi / bc2;
    params[i] = static_cast<float>(params[i] - c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon));
  }
}

void adamax_update(std::span<float> params, std::span<const float> grads, std::span<float> m, std::span<float> u,
                   std::int64_t step, const OptimizerConfig& c) {
  check_shapes(params, grads, m, u);
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    const double mi = c.beta1 * m[i] + (1.0 - c.beta1) * g;
    const double ui = std::max(c.beta2 * u[i], std::abs(g));
    m[i] = static_cast<float>(mi);
    u[i] = static_cast<float>(ui);
    params[i] = static_cast<float>(params[i] - (c.learning_rate / bc1) * mi / (ui + c.epsilon));
  }
}

void Adam::step(std::span<Parameter* const> params) {
  ensure_state(state_, params);
  ++state_.step;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->frozen) continue;
    adam_update(params[i]->value.values(), params[i]->grad.values(), state_.first_moment[i],
                state_.second_moment[i], state_.step, config_);
  }
}

void Adamax::step(std::span<Parameter* const> params) {
  ensure_state(state_, params);
  ++state_.step;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->frozen) continue;
    adamax_update(params[i]->value.values(), params[i]->grad.values(), state_.first_moment[i],
                  state_.second_moment[i], state_.step, config_);
  }
}

}  // namespace qb::nnet

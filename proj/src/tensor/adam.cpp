#include "bpvae/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "bpvae/error.hpp"

namespace bpvae {

AdamState make_adam_state(std::span<const Tensor> params, AdamOptions options) {
  AdamState state;
  state.options = options;
  state.first_moment.reserve(params.size());
  state.second_moment.reserve(params.size());
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.numel(), 0.0f);
    state.second_moment.emplace_back(p.numel(), 0.0f);
  }
  return state;
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (params.size() != state.first_moment.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) +
                     " parameters but state tracks " +
                     std::to_string(state.first_moment.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw std::invalid_argument("adam_step: parameter " + std::to_string(i) + " " +
                                  shape_to_string(params[i].shape()) + " has no gradient");
    }
    if (state.first_moment[i].size() != params[i].numel()) {
      throw ShapeError("adam_step: moment size mismatch for parameter " + std::to_string(i));
    }
  }

  const auto& opt = state.options;
  ++state.step_count;
  const auto t = static_cast<double>(state.step_count);
  const auto correction1 = static_cast<float>(1.0 - std::pow(static_cast<double>(opt.beta1), t));
  const auto correction2 = static_cast<float>(1.0 - std::pow(static_cast<double>(opt.beta2), t));

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].data();
    const auto grads = params[i].grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const float g = grads[j];
      m[j] = opt.beta1 * m[j] + (1.0f - opt.beta1) * g;
      v[j] = opt.beta2 * v[j] + (1.0f - opt.beta2) * g * g;
      const float m_hat = m[j] / correction1;
      const float v_hat = v[j] / correction2;
      values[j] -= opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.epsilon);
    }
  }
}

void zero_grads(std::span<Tensor> params) {
  for (auto& p : params) p.zero_grad();
}

}  // namespace bpvae

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bpvae/tensor.hpp"

namespace bpvae {

struct AdamOptions {
  float learning_rate = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

struct AdamState {
  AdamOptions options;
  std::uint64_t step_count = 0;
  std::vector<std::vector<float>> first_moment;
  std::vector<std::vector<float>> second_moment;
};

AdamState make_adam_state(std::span<const Tensor> params, AdamOptions options = {});

// One bias-corrected Adam update of every parameter in place. Gradients are
// left untouched; call zero_grads() before the next accumulation.
void adam_step(std::span<Tensor> params, AdamState& state);

void zero_grads(std::span<Tensor> params);

}  // namespace bpvae

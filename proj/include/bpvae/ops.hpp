#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bpvae/tape.hpp"
#include "bpvae/tensor.hpp"

// Differentiable tensor operations. Every op takes the Tape that records it;
// nothing is recorded when no input requires a gradient or the tape has
// recording disabled.
namespace bpvae::ops {

// The single global stability constant: log() clamps its argument to at
// least this value and propagates zero gradient where the clamp is active.
inline constexpr float kStabilityEpsilon = 1e-7f;

inline constexpr float kDefaultLeakySlope = 0.01f;

// Elementwise binary ops. `b` may either match `a` exactly or match a
// trailing suffix of `a`'s shape, in which case it is broadcast over the
// leading dimensions (e.g. a [D] bias over an [N, D] activation).
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);

Tensor add_scalar(Tape& tape, const Tensor& a, float value);
Tensor mul_scalar(Tape& tape, const Tensor& a, float value);

// [M, K] x [K, N] -> [M, N].
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

enum class Padding { kValid, kSame };

struct Conv2dOptions {
  std::size_t stride = 1;  // 1 or 2
  Padding padding = Padding::kValid;
};

// input [N, C, H, W], weight [O, C, K, K], bias [O] or undefined.
// "same" pads so that the output is ceil(H / stride); odd padding totals put
// the extra row/column at the bottom/right.
Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& weight,
              const Tensor& bias, Conv2dOptions options = {});

struct ConvTranspose2dOptions {
  std::size_t stride = 1;   // 1 or 2
  std::size_t padding = 0;  // symmetric, removed from every border
};

// input [N, C, H, W], weight [C, O, K, K], bias [O] or undefined.
// Output spatial size is (H - 1) * stride - 2 * padding + K. This is the
// adjoint of conv2d with the same geometry.
Tensor conv_transpose2d(Tape& tape, const Tensor& input, const Tensor& weight,
                        const Tensor& bias, ConvTranspose2dOptions options = {});

Tensor leaky_relu(Tape& tape, const Tensor& x, float slope = kDefaultLeakySlope);
Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor exp(Tape& tape, const Tensor& x);
Tensor log(Tape& tape, const Tensor& x);
Tensor clamp(Tape& tape, const Tensor& x, float lo, float hi);

// Reduction of every element to a scalar tensor of shape {}.
Tensor sum(Tape& tape, const Tensor& x);
Tensor mean(Tape& tape, const Tensor& x);
// Sums all axes but the first: [N, ...] -> [N].
Tensor sum_per_sample(Tape& tape, const Tensor& x);

Tensor reshape(Tape& tape, const Tensor& x, Shape shape);
Tensor concat(Tape& tape, std::span<const Tensor> parts, std::size_t axis);
Tensor slice(Tape& tape, const Tensor& x, std::size_t axis, std::size_t start,
             std::size_t length);

}  // namespace bpvae::ops

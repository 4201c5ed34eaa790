#pragma once

// Randomized gradient-check cases, one per differentiable op configuration.
// Inputs keep clear of kinks (LeakyReLU at 0, clamp bounds) so that central
// differences are well defined.

#include <string>
#include <vector>

#include "oracles.hpp"

namespace bpvae::testing {

struct OpCase {
  std::string name;
  std::vector<Tensor> leaves;
  OutputFn fn;
};

inline Tensor away_from_zero(const Shape& shape, Rng& rng, float margin) {
  Tensor t = random_tensor(shape, rng, margin, 1.0f);
  std::bernoulli_distribution flip(0.5);
  for (auto& v : t.data()) v = flip(rng) ? -v : v;
  return t;
}

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

using OpCaseFactory = OpCase (*)(Rng&);

inline const std::vector<std::pair<std::string, OpCaseFactory>>& op_case_factories() {
  using namespace ops;
  static const std::vector<std::pair<std::string, OpCaseFactory>> factories = {
      {"add", [](Rng& r) {
         Shape s{pick(r, 1, 4), pick(r, 1, 6)};
         return OpCase{"add", {random_tensor(s, r), random_tensor(s, r)},
                       [](Tape& t, const std::vector<Tensor>& l) { return add(t, l[0], l[1]); }};
       }},
      {"add-broadcast", [](Rng& r) {
         const std::size_t c = pick(r, 1, 6);
         return OpCase{"add-broadcast", {random_tensor({pick(r, 1, 4), c}, r), random_tensor({c}, r)},
                       [](Tape& t, const std::vector<Tensor>& l) { return add(t, l[0], l[1]); }};
       }},
      {"sub", [](Rng& r) {
         Shape s{pick(r, 1, 4), pick(r, 1, 6)};
         return OpCase{"sub", {random_tensor(s, r), random_tensor(s, r)},
                       [](Tape& t, const std::vector<Tensor>& l) { return sub(t, l[0], l[1]); }};
       }},
      {"mul", [](Rng& r) {
         Shape s{pick(r, 1, 4), pick(r, 1, 6)};
         return OpCase{"mul", {random_tensor(s, r), random_tensor(s, r)},
                       [](Tape& t, const std::vector<Tensor>& l) { return mul(t, l[0], l[1]); }};
       }},
      {"mul-self", [](Rng& r) {
         return OpCase{"mul-self", {random_tensor({pick(r, 1, 4), pick(r, 1, 6)}, r)},
                       [](Tape& t, const std::vector<Tensor>& l) { return mul(t, l[0], l[0]); }};
       }},
      {"scalar-affine", [](Rng& r) {
         return OpCase{"scalar-affine", {random_tensor({pick(r, 1, 4), pick(r, 1, 6)}, r)},
                       [](Tape& t, const std::vector<Tensor>& l) {
                         return mul_scalar(t, add_scalar(t, l[0], 0.75f), -1.5f);
                       }};
       }},
      {"matmul", [](Rng& r) {
         const std::size_t m = pick(r, 1, 4), k = pick(r, 1, 4), n = pick(r, 1, 4);
         return OpCase{"matmul", {random_tensor({m, k}, r), random_tensor({k, n}, r)},
                       [](Tape& t, const std::vector<Tensor>& l) { return matmul(t, l[0], l[1]); }};
       }},
      {"conv2d-s1-valid", [](Rng& r) {
         return OpCase{"conv2d-s1-valid",
                       {random_tensor({1, 2, 5, 5}, r), random_tensor({2, 2, 2, 2}, r),
                        random_tensor({2}, r)},
                       [](Tape& t, const std::vector<Tensor>& l) {
                         return conv2d(t, l[0], l[1], l[2], {1, Padding::kValid});
                       }};
       }},
      {"conv2d-s1-same", [](Rng& r) {
         return OpCase{"conv2d-s1-same",
                       {random_tensor({1, 2, 4, 4}, r), random_tensor({2, 2, 3, 3}, r),
                        random_tensor({2}, r)},
                       [](Tape& t, const std::vector<Tensor>& l) {
                         return conv2d(t, l[0], l[1], l[2], {1, Padding::kSame});
                       }};
       }},
      {"conv2d-s2-valid", [](Rng& r) {
         return OpCase{"conv2d-s2-valid",
                       {random_tensor({2, 1, 6, 6}, r), random_tensor({2, 1, 2, 2}, r),
                        random_tensor({2}, r)},
                       [](Tape& t, const std::vector<Tensor>& l) {
                         return conv2d(t, l[0], l[1], l[2], {2, Padding::kValid});
                       }};
       }},
      {"conv2d-s2-same", [](Rng& r) {
         return OpCase{"conv2d-s2-same",
                       {random_tensor({1, 2, 6, 6}, r), random_tensor({2, 2, 4, 4}, r),
                        random_tensor({2}, r)},
                       [](Tape& t, const std::vector<Tensor>& l) {
                         return conv2d(t, l[0], l[1], l[2], {2, Padding::kSame});
                       }};
       }},
      {"conv-transpose-s1", [](Rng& r) {
         return OpCase{"conv-transpose-s1",
                       {random_tensor({1, 2, 3, 3}, r), random_tensor({2, 2, 2, 2}, r),
                        random_tensor({2}, r)},
                       [](Tape& t, const std::vector<Tensor>& l) {
                         return conv_transpose2d(t, l[0], l[1], l[2], {1, 0});
                       }};
       }},
      {"conv-transpose-s2-p1", [](Rng& r) {
         return OpCase{"conv-transpose-s2-p1",
                       {random_tensor({1, 2, 2, 2}, r), random_tensor({2, 2, 4, 4}, r),
                        random_tensor({2}, r)},
                       [](Tape& t, const std::vector<Tensor>& l) {
                         return conv_transpose2d(t, l[0], l[1], l[2], {2, 1});
                       }};
       }},
      {"leaky_relu", [](Rng& r) {
         return OpCase{"leaky_relu", {away_from_zero({pick(r, 1, 4), pick(r, 1, 8)}, r, 0.05f)},
                       [](Tape& t, const std::vector<Tensor>& l) { return leaky_relu(t, l[0], 0.1f); }};
       }},
      {"sigmoid", [](Rng& r) {
         return OpCase{"sigmoid", {random_tensor({pick(r, 1, 4), pick(r, 1, 8)}, r, -4.0f, 4.0f)},
                       [](Tape& t, const std::vector<Tensor>& l) { return sigmoid(t, l[0]); }};
       }},
      {"exp", [](Rng& r) {
         return OpCase{"exp", {random_tensor({pick(r, 1, 4), pick(r, 1, 8)}, r, -2.0f, 2.0f)},
                       [](Tape& t, const std::vector<Tensor>& l) { return exp(t, l[0]); }};
       }},
      {"log", [](Rng& r) {
         return OpCase{"log", {random_tensor({pick(r, 1, 4), pick(r, 1, 8)}, r, 0.2f, 3.0f)},
                       [](Tape& t, const std::vector<Tensor>& l) { return log(t, l[0]); }};
       }},
      {"clamp", [](Rng& r) {
         Tensor x = away_from_zero({pick(r, 1, 4), pick(r, 1, 8)}, r, 0.0f);
         // Keep every value at least 0.05 from the clamp bounds at +-0.5.
         for (auto& v : x.data()) {
           if (std::abs(std::abs(v) - 0.5f) < 0.05f) v *= 1.25f;
         }
         return OpCase{"clamp", {x}, [](Tape& t, const std::vector<Tensor>& l) {
                         return clamp(t, l[0], -0.5f, 0.5f);
                       }};
       }},
      {"sum", [](Rng& r) {
         return OpCase{"sum", {random_tensor({pick(r, 1, 4), pick(r, 1, 8)}, r)},
                       [](Tape& t, const std::vector<Tensor>& l) { return sum(t, l[0]); }};
       }},
      {"mean", [](Rng& r) {
         return OpCase{"mean", {random_tensor({pick(r, 1, 4), pick(r, 1, 8)}, r)},
                       [](Tape& t, const std::vector<Tensor>& l) { return mean(t, l[0]); }};
       }},
      {"sum_per_sample", [](Rng& r) {
         return OpCase{"sum_per_sample", {random_tensor({pick(r, 1, 4), 2, pick(r, 1, 4)}, r)},
                       [](Tape& t, const std::vector<Tensor>& l) { return sum_per_sample(t, l[0]); }};
       }},
      {"reshape", [](Rng& r) {
         const std::size_t a = pick(r, 1, 4), b = pick(r, 1, 4);
         return OpCase{"reshape", {random_tensor({a, b, 2}, r)},
                       [a, b](Tape& t, const std::vector<Tensor>& l) {
                         return reshape(t, l[0], {2 * b, a});
                       }};
       }},
      {"concat", [](Rng& r) {
         const std::size_t axis = pick(r, 0, 1), m = pick(r, 1, 3);
         Shape s1{m, 3}, s2{m, 3};
         s2[axis] = pick(r, 1, 3);
         return OpCase{"concat", {random_tensor(s1, r), random_tensor(s2, r)},
                       [axis](Tape& t, const std::vector<Tensor>& l) { return concat(t, l, axis); }};
       }},
      {"slice", [](Rng& r) {
         const std::size_t axis = pick(r, 0, 1);
         Shape s{pick(r, 2, 5), pick(r, 2, 5)};
         const std::size_t start = pick(r, 0, s[axis] - 1);
         const std::size_t length = pick(r, 1, s[axis] - start);
         return OpCase{"slice", {random_tensor(s, r)},
                       [axis, start, length](Tape& t, const std::vector<Tensor>& l) {
                         return slice(t, l[0], axis, start, length);
                       }};
       }},
  };
  return factories;
}

// Runs `trials_per_op` randomized checks of every case and returns the
// worst relative error per op.
struct OpCheckSummary {
  std::string op;
  double worst = 0.0;
  std::size_t trials = 0;
};

inline std::vector<OpCheckSummary> check_all_ops(std::size_t trials_per_op, std::uint64_t seed) {
  std::vector<OpCheckSummary> out;
  std::uint64_t stream = 0;
  for (const auto& [name, make] : op_case_factories()) {
    OpCheckSummary s{name, 0.0, 0};
    for (std::size_t t = 0; t < trials_per_op; ++t) {
      Rng rng(derive_seed(seed, stream++));
      OpCase c = make(rng);
      Tensor probe;
      {
        Tape tape;
        tape.set_recording(false);
        probe = c.fn(tape, c.leaves);
      }
      const Tensor weights = random_tensor(probe.shape(), rng);
      s.worst = std::max(s.worst, gradcheck_output(c.fn, c.leaves, weights).relative_error);
      ++s.trials;
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace bpvae::testing

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "bpvae/tensor.hpp"

namespace bpvae {

// Ordered record of executed differentiable operations. backward() walks
// the nodes in exact reverse insertion order, which is a valid reverse
// topological order because an op can only consume tensors that already
// exist. A Tape is not thread-safe; independent tapes may run in parallel.
class Tape {
 public:
  struct Node {
    std::string op;
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<void()> backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  // Records `output` if recording is on and any input requires a gradient.
  // Returns true when a node was recorded; the output is then marked as
  // requiring a gradient.
  bool record(std::string op, std::vector<Tensor> inputs, Tensor& output,
              std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 and propagates. Leaf gradients accumulate
  // across calls; intermediate gradients are reset at the start of each call.
  void backward(const Tensor& loss);

  void clear() { nodes_.clear(); }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }

  bool recording() const noexcept { return recording_; }
  void set_recording(bool value) noexcept { recording_ = value; }

 private:
  std::vector<Node> nodes_;
  bool recording_ = true;
};

// Disables recording on a tape for the guard's lifetime.
class NoRecordGuard {
 public:
  explicit NoRecordGuard(Tape& tape) : tape_(tape), previous_(tape.recording()) {
    tape_.set_recording(false);
  }
  ~NoRecordGuard() { tape_.set_recording(previous_); }
  NoRecordGuard(const NoRecordGuard&) = delete;
  NoRecordGuard& operator=(const NoRecordGuard&) = delete;

 private:
  Tape& tape_;
  bool previous_;
};

}  // namespace bpvae

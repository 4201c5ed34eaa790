#include "bpvae/tape.hpp"

#include <algorithm>
#include <utility>

#include "bpvae/error.hpp"

namespace bpvae {

bool Tape::record(std::string op, std::vector<Tensor> inputs, Tensor& output,
                  std::function<void()> backward) {
  output.mark_non_leaf();
  if (!recording_) return false;
  const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.requires_grad(); });
  if (!needs) return false;
  output.set_requires_grad(true);
  nodes_.push_back(Node{std::move(op), std::move(inputs), output, std::move(backward)});
  return true;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " +
                     (loss.defined() ? shape_to_string(loss.shape()) : "undefined"));
  }
  if (nodes_.empty()) throw std::logic_error("backward: tape is empty");
  if (!loss.requires_grad()) {
    throw std::logic_error("backward: loss does not depend on any parameter");
  }
  for (auto& node : nodes_) {
    if (node.output.has_grad()) node.output.zero_grad();
  }
  Tensor seed = loss;
  seed.mutable_grad()[0] += 1.0f;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!it->output.has_grad()) continue;  // not on the path to the loss
    it->backward();
  }
}

}  // namespace bpvae

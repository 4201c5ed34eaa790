#include "bpvae/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>
#include <utility>

#include "bpvae/error.hpp"

namespace bpvae {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, std::vector<float> data, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  for (std::size_t d : shape) {
    if (d == 0) {
      throw ShapeError("tensor: zero-sized dimension in shape " +
                       shape_to_string(shape));
    }
  }
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("tensor: shape " + shape_to_string(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " elements, got " +
                     std::to_string(data.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0f, requires_grad);
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  std::vector<float> data(shape_numel(shape), value);
  return Tensor(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<float>{value}, requires_grad);
}

detail::TensorImpl& Tensor::impl() const {
  if (!impl_) throw std::logic_error("tensor: use of undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("tensor: axis " + std::to_string(axis) +
                     " out of range for shape " + shape_to_string(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return impl().data.size(); }

std::span<float> Tensor::data() { return impl().data; }
std::span<const float> Tensor::data() const { return impl().data; }

float Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("tensor: item() on shape " + shape_to_string(shape()));
  }
  return impl().data[0];
}

bool Tensor::requires_grad() const { return impl().requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
  impl().requires_grad = value;
  return *this;
}

bool Tensor::is_leaf() const { return impl().is_leaf; }
void Tensor::mark_non_leaf() { impl().is_leaf = false; }

bool Tensor::has_grad() const { return !impl().grad.empty(); }

std::span<const float> Tensor::grad() const { return impl().grad; }

std::span<float> Tensor::mutable_grad() {
  auto& i = impl();
  if (i.grad.empty()) i.grad.assign(i.data.size(), 0.0f);
  return i.grad;
}

void Tensor::zero_grad() {
  auto& i = impl();
  std::fill(i.grad.begin(), i.grad.end(), 0.0f);
}

Tensor Tensor::clone() const {
  const auto& i = impl();
  Tensor copy(i.shape, i.data, i.requires_grad);
  copy.impl_->grad = i.grad;
  return copy;
}

Tensor Tensor::reshaped(Shape shape) const {
  return Tensor(std::move(shape), impl().data, false);
}

}  // namespace bpvae

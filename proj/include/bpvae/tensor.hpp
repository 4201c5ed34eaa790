#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace bpvae {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {
struct TensorImpl {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool is_leaf = true;
};
}  // namespace detail

// Dense row-major float32 array. Copies of a Tensor share storage; use
// clone() for an independent copy. The shape never changes after
// construction.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<float> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const noexcept { return impl_ != nullptr; }

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<float> data();
  std::span<const float> data() const;
  float item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool value);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const float> grad() const;
  // Allocates a zero gradient buffer on first use.
  std::span<float> mutable_grad();
  void zero_grad();

  Tensor clone() const;
  // Detached copy of this tensor's values under a new shape.
  Tensor reshaped(Shape shape) const;

  bool same_storage(const Tensor& other) const noexcept {
    return impl_ == other.impl_;
  }

  // Used by ops to mark tape-produced outputs.
  void mark_non_leaf();

 private:
  detail::TensorImpl& impl() const;
  std::shared_ptr<detail::TensorImpl> impl_;
};

}  // namespace bpvae

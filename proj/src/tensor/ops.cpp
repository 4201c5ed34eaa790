#include "bpvae/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "bpvae/error.hpp"

namespace bpvae::ops {
namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

void accumulate(Tensor& t, std::span<const float> g) {
  if (!t.requires_grad()) return;
  auto dst = t.mutable_grad();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

// Length of the broadcast period of `b` over `a`; throws on mismatch.
std::size_t broadcast_period(const char* op, const Tensor& a, const Tensor& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  bool ok = sb.size() <= sa.size() &&
            std::equal(sb.rbegin(), sb.rend(), sa.rbegin());
  if (!ok) {
    throw ShapeError(std::string(op) + ": incompatible shapes " +
                     shape_to_string(sa) + " and " + shape_to_string(sb));
  }
  return b.numel();
}

template <typename Forward, typename GradA, typename GradB>
Tensor binary(Tape& tape, const char* name, const Tensor& a, const Tensor& b,
              Forward forward, GradA grad_a, GradB grad_b) {
  const std::size_t period = broadcast_period(name, a, b);
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<float> values(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) values[i] = forward(av[i], bv[i % period]);
  Tensor out(a.shape(), std::move(values));
  tape.record(name, {a, b}, out, [a = a, b = b, out, period, grad_a, grad_b]() mutable {
    const auto g = out.grad();
    const auto av = a.data();
    const auto bv = b.data();
    if (a.requires_grad()) {
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += grad_a(g[i], av[i], bv[i % period]);
    }
    if (b.requires_grad()) {
      auto gb = b.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % period] += grad_b(g[i], av[i], bv[i % period]);
    }
  });
  return out;
}

template <typename Forward, typename Derivative>
Tensor unary(Tape& tape, const char* name, const Tensor& x, Forward forward,
             Derivative derivative) {
  const auto xv = x.data();
  std::vector<float> values(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) values[i] = forward(xv[i]);
  Tensor out(x.shape(), std::move(values));
  // derivative(x, y) gives dy/dx at one element.
  tape.record(name, {x}, out, [x = x, out, derivative]() mutable {
    const auto g = out.grad();
    const auto xv = x.data();
    const auto yv = out.data();
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * derivative(xv[i], yv[i]);
  });
  return out;
}

// Splits `shape` around `axis` into (outer, extent, inner) element counts.
struct AxisSplit {
  std::size_t outer;
  std::size_t extent;
  std::size_t inner;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary(
      tape, "add", a, b, [](float x, float y) { return x + y; },
      [](float g, float, float) { return g; }, [](float g, float, float) { return g; });
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary(
      tape, "sub", a, b, [](float x, float y) { return x - y; },
      [](float g, float, float) { return g; }, [](float g, float, float) { return -g; });
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary(
      tape, "mul", a, b, [](float x, float y) { return x * y; },
      [](float g, float, float y) { return g * y; },
      [](float g, float x, float) { return g * x; });
}

Tensor add_scalar(Tape& tape, const Tensor& a, float value) {
  return unary(
      tape, "add_scalar", a, [value](float x) { return x + value; },
      [](float, float) { return 1.0f; });
}

Tensor mul_scalar(Tape& tape, const Tensor& a, float value) {
  return unary(
      tape, "mul_scalar", a, [value](float x) { return x * value; },
      [value](float, float) { return value; });
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_to_string(a.shape()) +
                     " and " + shape_to_string(b.shape()));
  }
  const auto m = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto n = static_cast<Eigen::Index>(b.dim(1));
  Tensor out = Tensor::zeros({a.dim(0), b.dim(1)});
  MatrixMap(out.data().data(), m, n).noalias() =
      ConstMatrixMap(a.data().data(), m, k) * ConstMatrixMap(b.data().data(), k, n);
  tape.record("matmul", {a, b}, out, [a = a, b = b, out, m, k, n]() mutable {
    ConstMatrixMap g(out.grad().data(), m, n);
    if (a.requires_grad()) {
      MatrixMap(a.mutable_grad().data(), m, k).noalias() +=
          g * ConstMatrixMap(b.data().data(), k, n).transpose();
    }
    if (b.requires_grad()) {
      MatrixMap(b.mutable_grad().data(), k, n).noalias() +=
          ConstMatrixMap(a.data().data(), m, k).transpose() * g;
    }
  });
  return out;
}

Tensor leaky_relu(Tape& tape, const Tensor& x, float slope) {
  return unary(
      tape, "leaky_relu", x, [slope](float v) { return v > 0.0f ? v : slope * v; },
      [slope](float v, float) { return v > 0.0f ? 1.0f : slope; });
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  return unary(
      tape, "sigmoid", x,
      [](float v) {
        if (v >= 0.0f) return 1.0f / (1.0f + std::exp(-v));
        const float e = std::exp(v);
        return e / (1.0f + e);
      },
      [](float, float y) { return y * (1.0f - y); });
}

Tensor exp(Tape& tape, const Tensor& x) {
  return unary(
      tape, "exp", x, [](float v) { return std::exp(v); },
      [](float, float y) { return y; });
}

Tensor log(Tape& tape, const Tensor& x) {
  return unary(
      tape, "log", x, [](float v) { return std::log(std::max(v, kStabilityEpsilon)); },
      [](float v, float) { return v >= kStabilityEpsilon ? 1.0f / v : 0.0f; });
}

Tensor clamp(Tape& tape, const Tensor& x, float lo, float hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo must not exceed hi");
  return unary(
      tape, "clamp", x, [lo, hi](float v) { return std::clamp(v, lo, hi); },
      [lo, hi](float v, float) { return (v >= lo && v <= hi) ? 1.0f : 0.0f; });
}

Tensor sum(Tape& tape, const Tensor& x) {
  double total = 0.0;
  for (float v : x.data()) total += v;
  Tensor out = Tensor::scalar(static_cast<float>(total));
  tape.record("sum", {x}, out, [x = x, out]() mutable {
    const float g = out.grad()[0];
    auto gx = x.mutable_grad();
    for (auto& v : gx) v += g;
  });
  return out;
}

Tensor mean(Tape& tape, const Tensor& x) {
  double total = 0.0;
  for (float v : x.data()) total += v;
  const auto n = static_cast<double>(x.numel());
  Tensor out = Tensor::scalar(static_cast<float>(total / n));
  tape.record("mean", {x}, out, [x = x, out, n]() mutable {
    const float g = static_cast<float>(out.grad()[0] / n);
    auto gx = x.mutable_grad();
    for (auto& v : gx) v += g;
  });
  return out;
}

Tensor sum_per_sample(Tape& tape, const Tensor& x) {
  if (x.rank() < 1) throw ShapeError("sum_per_sample: scalar input");
  const std::size_t rows = x.dim(0);
  const std::size_t inner = x.numel() / rows;
  const auto xv = x.data();
  std::vector<float> values(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (std::size_t j = 0; j < inner; ++j) total += xv[r * inner + j];
    values[r] = static_cast<float>(total);
  }
  Tensor out({rows}, std::move(values));
  tape.record("sum_per_sample", {x}, out, [x = x, out, inner]() mutable {
    const auto g = out.grad();
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i / inner];
  });
  return out;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_to_string(x.shape()) + " as " +
                     shape_to_string(shape));
  }
  Tensor out = x.reshaped(std::move(shape));
  tape.record("reshape", {x}, out, [x = x, out]() mutable { accumulate(x, out.grad()); });
  return out;
}

Tensor concat(Tape& tape, std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    if (!ok) {
      throw ShapeError("concat: incompatible shapes " + shape_to_string(first) + " and " +
                       shape_to_string(s));
    }
    out_shape[axis] += s[axis];
  }
  const AxisSplit whole = split_axis(out_shape, axis);
  std::vector<float> values(shape_numel(out_shape));
  std::size_t offset = 0;  // running position along the axis
  for (const auto& p : parts) {
    const std::size_t chunk = p.dim(axis) * whole.inner;
    const auto pv = p.data();
    for (std::size_t o = 0; o < whole.outer; ++o) {
      std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(o * chunk), chunk,
                  values.begin() + static_cast<std::ptrdiff_t>(
                                       (o * whole.extent + offset) * whole.inner));
    }
    offset += p.dim(axis);
  }
  Tensor out(out_shape, std::move(values));
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  tape.record("concat", inputs, out, [inputs, out, axis, whole]() mutable {
    const auto g = out.grad();
    std::size_t offset = 0;
    for (auto& p : inputs) {
      const std::size_t chunk = p.dim(axis) * whole.inner;
      if (p.requires_grad()) {
        auto gp = p.mutable_grad();
        for (std::size_t o = 0; o < whole.outer; ++o) {
          const std::size_t src = (o * whole.extent + offset) * whole.inner;
          for (std::size_t j = 0; j < chunk; ++j) gp[o * chunk + j] += g[src + j];
        }
      }
      offset += p.dim(axis);
    }
  });
  return out;
}

Tensor slice(Tape& tape, const Tensor& x, std::size_t axis, std::size_t start,
             std::size_t length) {
  if (axis >= x.rank() || length == 0 || start + length > x.dim(axis)) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") on axis " +
                     std::to_string(axis) + " invalid for shape " +
                     shape_to_string(x.shape()));
  }
  const AxisSplit whole = split_axis(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  const std::size_t chunk = length * whole.inner;
  std::vector<float> values(whole.outer * chunk);
  const auto xv = x.data();
  for (std::size_t o = 0; o < whole.outer; ++o) {
    const std::size_t src = (o * whole.extent + start) * whole.inner;
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(src), chunk,
                values.begin() + static_cast<std::ptrdiff_t>(o * chunk));
  }
  Tensor out(out_shape, std::move(values));
  tape.record("slice", {x}, out, [x = x, out, whole, start, chunk]() mutable {
    const auto g = out.grad();
    auto gx = x.mutable_grad();
    for (std::size_t o = 0; o < whole.outer; ++o) {
      const std::size_t dst = (o * whole.extent + start) * whole.inner;
      for (std::size_t j = 0; j < chunk; ++j) gx[dst + j] += g[o * chunk + j];
    }
  });
  return out;
}

}  // namespace bpvae::ops

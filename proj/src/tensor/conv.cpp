#include <Eigen/Core>
#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "bpvae/error.hpp"
#include "bpvae/ops.hpp"

namespace bpvae::ops {
namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

// Sliding-window layout shared by convolution and its adjoint. `height` and
// `width` describe the padded-from image; `out_h` x `out_w` window positions.
struct Geometry {
  std::size_t channels;
  std::size_t height;
  std::size_t width;
  std::size_t kernel;
  std::size_t stride;
  std::size_t pad_top;
  std::size_t pad_left;
  std::size_t out_h;
  std::size_t out_w;

  std::size_t rows() const { return channels * kernel * kernel; }
  std::size_t positions() const { return out_h * out_w; }
};

// Writes image `n` into cols[row, n * P + p] of a [C*K*K, batch * P] matrix.
void im2col(const float* image, const Geometry& g, std::size_t n, std::size_t batch,
            float* cols) {
  const std::size_t positions = g.positions();
  const std::size_t row_stride = batch * positions;
  for (std::size_t c = 0; c < g.channels; ++c) {
    const float* plane = image + c * g.height * g.width;
    for (std::size_t ki = 0; ki < g.kernel; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        const std::size_t row = (c * g.kernel + ki) * g.kernel + kj;
        float* dst = cols + row * row_stride + n * positions;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) -
                          static_cast<std::ptrdiff_t>(g.pad_top);
          float* out_row = dst + oh * g.out_w;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill_n(out_row, g.out_w, 0.0f);
            continue;
          }
          const float* src = plane + static_cast<std::size_t>(ih) * g.width;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + kj) -
                            static_cast<std::ptrdiff_t>(g.pad_left);
            out_row[ow] = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.width))
                              ? 0.0f
                              : src[iw];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-adds column n of `cols` back into `image`.
void col2im(const float* cols, const Geometry& g, std::size_t n, std::size_t batch,
            float* image) {
  const std::size_t positions = g.positions();
  const std::size_t row_stride = batch * positions;
  for (std::size_t c = 0; c < g.channels; ++c) {
    float* plane = image + c * g.height * g.width;
    for (std::size_t ki = 0; ki < g.kernel; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        const std::size_t row = (c * g.kernel + ki) * g.kernel + kj;
        const float* src = cols + row * row_stride + n * positions;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) -
                          static_cast<std::ptrdiff_t>(g.pad_top);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.height)) continue;
          float* dst = plane + static_cast<std::size_t>(ih) * g.width;
          const float* in_row = src + oh * g.out_w;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + kj) -
                            static_cast<std::ptrdiff_t>(g.pad_left);
            if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(g.width)) dst[iw] += in_row[ow];
          }
        }
      }
    }
  }
}

// [N, C, P] <-> [C, N * P]
void batch_to_channel_major(std::span<const float> src, std::size_t batch,
                            std::size_t channels, std::size_t positions, float* dst) {
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      std::copy_n(src.data() + (n * channels + c) * positions, positions,
                  dst + c * batch * positions + n * positions);
    }
  }
}

void check_stride(const char* op, std::size_t stride) {
  if (stride != 1 && stride != 2) {
    throw ShapeError(std::string(op) + ": stride must be 1 or 2, got " +
                     std::to_string(stride));
  }
}

void check_bias(const char* op, const Tensor& bias, std::size_t channels) {
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != channels)) {
    throw ShapeError(std::string(op) + ": bias shape " + shape_to_string(bias.shape()) +
                     " does not match " + std::to_string(channels) + " channels");
  }
}

std::vector<Tensor> present(std::initializer_list<Tensor> ts) {
  std::vector<Tensor> out;
  for (const auto& t : ts) {
    if (t.defined()) out.push_back(t);
  }
  return out;
}

}  // namespace

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias,
              Conv2dOptions options) {
  if (input.rank() != 4 || weight.rank() != 4 || weight.dim(1) != input.dim(1) ||
      weight.dim(2) != weight.dim(3)) {
    throw ShapeError("conv2d: incompatible shapes " + shape_to_string(input.shape()) +
                     " and " + shape_to_string(weight.shape()));
  }
  check_stride("conv2d", options.stride);
  const std::size_t batch = input.dim(0);
  const std::size_t out_channels = weight.dim(0);
  check_bias("conv2d", bias, out_channels);

  Geometry g{input.dim(1), input.dim(2), input.dim(3), weight.dim(2), options.stride, 0, 0, 0, 0};
  if (options.padding == Padding::kSame) {
    g.out_h = (g.height + g.stride - 1) / g.stride;
    g.out_w = (g.width + g.stride - 1) / g.stride;
    const std::size_t need_h = (g.out_h - 1) * g.stride + g.kernel;
    const std::size_t need_w = (g.out_w - 1) * g.stride + g.kernel;
    g.pad_top = need_h > g.height ? (need_h - g.height) / 2 : 0;
    g.pad_left = need_w > g.width ? (need_w - g.width) / 2 : 0;
  } else {
    if (g.height < g.kernel || g.width < g.kernel) {
      throw ShapeError("conv2d: kernel " + shape_to_string(weight.shape()) +
                       " larger than input " + shape_to_string(input.shape()));
    }
    g.out_h = (g.height - g.kernel) / g.stride + 1;
    g.out_w = (g.width - g.kernel) / g.stride + 1;
  }

  const std::size_t rows = g.rows();
  const std::size_t positions = g.positions();
  const std::size_t image_size = g.channels * g.height * g.width;
  auto cols = std::make_shared<std::vector<float>>(rows * batch * positions);
  const auto xv = input.data();
  for (std::size_t n = 0; n < batch; ++n) {
    im2col(xv.data() + n * image_size, g, n, batch, cols->data());
  }
  const auto cols_count = static_cast<Eigen::Index>(batch * positions);
  RowMatrix result = ConstMatrixMap(weight.data().data(), static_cast<Eigen::Index>(out_channels),
                                    static_cast<Eigen::Index>(rows)) *
                     ConstMatrixMap(cols->data(), static_cast<Eigen::Index>(rows), cols_count);

  Tensor out = Tensor::zeros({batch, out_channels, g.out_h, g.out_w});
  auto ov = out.data();
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t o = 0; o < out_channels; ++o) {
      const float b = bias.defined() ? bias.data()[o] : 0.0f;
      const float* src = result.data() + o * batch * positions + n * positions;
      float* dst = ov.data() + (n * out_channels + o) * positions;
      for (std::size_t p = 0; p < positions; ++p) dst[p] = src[p] + b;
    }
  }

  tape.record("conv2d", present({input, weight, bias}), out,
              [input = input, weight = weight, bias = bias, out, cols, g, batch, out_channels]() mutable {
                const std::size_t rows = g.rows();
                const std::size_t positions = g.positions();
                const auto count = static_cast<Eigen::Index>(batch * positions);
                RowMatrix grad(static_cast<Eigen::Index>(out_channels), count);
                batch_to_channel_major(out.grad(), batch, out_channels, positions, grad.data());
                if (weight.requires_grad()) {
                  MatrixMap(weight.mutable_grad().data(), static_cast<Eigen::Index>(out_channels),
                            static_cast<Eigen::Index>(rows))
                      .noalias() +=
                      grad * ConstMatrixMap(cols->data(), static_cast<Eigen::Index>(rows), count)
                                 .transpose();
                }
                if (bias.defined() && bias.requires_grad()) {
                  auto gb = bias.mutable_grad();
                  for (std::size_t o = 0; o < out_channels; ++o) {
                    gb[o] += grad.row(static_cast<Eigen::Index>(o)).sum();
                  }
                }
                if (input.requires_grad()) {
                  RowMatrix dcols =
                      ConstMatrixMap(weight.data().data(), static_cast<Eigen::Index>(out_channels),
                                     static_cast<Eigen::Index>(rows))
                          .transpose() *
                      grad;
                  auto gx = input.mutable_grad();
                  const std::size_t image_size = g.channels * g.height * g.width;
                  for (std::size_t n = 0; n < batch; ++n) {
                    col2im(dcols.data(), g, n, batch, gx.data() + n * image_size);
                  }
                }
              });
  return out;
}

Tensor conv_transpose2d(Tape& tape, const Tensor& input, const Tensor& weight,
                        const Tensor& bias, ConvTranspose2dOptions options) {
  if (input.rank() != 4 || weight.rank() != 4 || weight.dim(0) != input.dim(1) ||
      weight.dim(2) != weight.dim(3)) {
    throw ShapeError("conv_transpose2d: incompatible shapes " +
                     shape_to_string(input.shape()) + " and " +
                     shape_to_string(weight.shape()));
  }
  check_stride("conv_transpose2d", options.stride);
  const std::size_t batch = input.dim(0);
  const std::size_t in_channels = input.dim(1);
  const std::size_t out_channels = weight.dim(1);
  const std::size_t kernel = weight.dim(2);
  check_bias("conv_transpose2d", bias, out_channels);
  const std::size_t full_h = (input.dim(2) - 1) * options.stride + kernel;
  const std::size_t full_w = (input.dim(3) - 1) * options.stride + kernel;
  if (full_h <= 2 * options.padding || full_w <= 2 * options.padding) {
    throw ShapeError("conv_transpose2d: padding " + std::to_string(options.padding) +
                     " too large for input " + shape_to_string(input.shape()));
  }
  // Geometry of the forward convolution this op is the adjoint of.
  const Geometry g{out_channels,     full_h - 2 * options.padding,
                   full_w - 2 * options.padding,
                   kernel,           options.stride,
                   options.padding,  options.padding,
                   input.dim(2),     input.dim(3)};

  const std::size_t rows = g.rows();
  const std::size_t positions = g.positions();
  const auto count = static_cast<Eigen::Index>(batch * positions);
  auto x_mat = std::make_shared<RowMatrix>(static_cast<Eigen::Index>(in_channels), count);
  batch_to_channel_major(input.data(), batch, in_channels, positions, x_mat->data());
  const ConstMatrixMap w_mat(weight.data().data(), static_cast<Eigen::Index>(in_channels),
                             static_cast<Eigen::Index>(rows));
  RowMatrix cols = w_mat.transpose() * (*x_mat);

  Tensor out = Tensor::zeros({batch, out_channels, g.height, g.width});
  auto ov = out.data();
  const std::size_t image_size = out_channels * g.height * g.width;
  for (std::size_t n = 0; n < batch; ++n) {
    col2im(cols.data(), g, n, batch, ov.data() + n * image_size);
  }
  if (bias.defined()) {
    const std::size_t plane = g.height * g.width;
    for (std::size_t n = 0; n < batch; ++n) {
      for (std::size_t o = 0; o < out_channels; ++o) {
        float* dst = ov.data() + (n * out_channels + o) * plane;
        const float b = bias.data()[o];
        for (std::size_t p = 0; p < plane; ++p) dst[p] += b;
      }
    }
  }

  tape.record("conv_transpose2d", present({input, weight, bias}), out,
              [input = input, weight = weight, bias = bias, out, x_mat, g, batch, in_channels]() mutable {
                const std::size_t rows = g.rows();
                const std::size_t positions = g.positions();
                const auto count = static_cast<Eigen::Index>(batch * positions);
                const std::size_t image_size = g.channels * g.height * g.width;
                const auto gy = out.grad();
                RowMatrix gcols(static_cast<Eigen::Index>(rows), count);
                for (std::size_t n = 0; n < batch; ++n) {
                  im2col(gy.data() + n * image_size, g, n, batch, gcols.data());
                }
                if (weight.requires_grad()) {
                  MatrixMap(weight.mutable_grad().data(), static_cast<Eigen::Index>(in_channels),
                            static_cast<Eigen::Index>(rows))
                      .noalias() += (*x_mat) * gcols.transpose();
                }
                if (bias.defined() && bias.requires_grad()) {
                  auto gb = bias.mutable_grad();
                  const std::size_t plane = g.height * g.width;
                  for (std::size_t n = 0; n < batch; ++n) {
                    for (std::size_t o = 0; o < g.channels; ++o) {
                      const float* src = gy.data() + (n * g.channels + o) * plane;
                      double total = 0.0;
                      for (std::size_t p = 0; p < plane; ++p) total += src[p];
                      gb[o] += static_cast<float>(total);
                    }
                  }
                }
                if (input.requires_grad()) {
                  RowMatrix dx = ConstMatrixMap(weight.data().data(),
                                                static_cast<Eigen::Index>(in_channels),
                                                static_cast<Eigen::Index>(rows)) *
                                 gcols;
                  auto gx = input.mutable_grad();
                  for (std::size_t n = 0; n < batch; ++n) {
                    for (std::size_t c = 0; c < in_channels; ++c) {
                      const float* src = dx.data() + c * batch * positions + n * positions;
                      float* dst = gx.data() + (n * in_channels + c) * positions;
                      for (std::size_t p = 0; p < positions; ++p) dst[p] += src[p];
                    }
                  }
                }
              });
  return out;
}

}  // namespace bpvae::ops

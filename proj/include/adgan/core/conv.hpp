#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "adgan/core/ops.hpp"

namespace adgan {

struct ConvGeometry {
  std::size_t channels, height, width;
  std::size_t kernel, stride, padding;
  std::size_t out_height, out_width;

  std::size_t col_rows() const { return channels * kernel * kernel; }
  std::size_t col_cols() const { return out_height * out_width; }
};

namespace detail {

// Unfolds a [C,H,W] image into a [C*k*k, Ho*Wo] patch matrix.
template <class T>
void im2col(const T* image, const ConvGeometry& g, T* col) {
  const auto hw = static_cast<long>(g.col_cols());
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ki = 0; ki < g.kernel; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        T* row = col + ((c * g.kernel + ki) * g.kernel + kj) * hw;
        for (std::size_t oh = 0; oh < g.out_height; ++oh) {
          const long ih = static_cast<long>(oh * g.stride + ki) - static_cast<long>(g.padding);
          T* dst = row + oh * g.out_width;
          if (ih < 0 || ih >= static_cast<long>(g.height)) {
            std::fill_n(dst, g.out_width, T(0));
            continue;
          }
          const T* src = image + (c * g.height + ih) * g.width;
          for (std::size_t ow = 0; ow < g.out_width; ++ow) {
            const long iw = static_cast<long>(ow * g.stride + kj) - static_cast<long>(g.padding);
            dst[ow] = (iw < 0 || iw >= static_cast<long>(g.width)) ? T(0) : src[iw];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters (adds) patch entries back into a [C,H,W] image.
template <class T>
void col2im(const T* col, const ConvGeometry& g, T* image) {
  const auto hw = static_cast<long>(g.col_cols());
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ki = 0; ki < g.kernel; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        const T* row = col + ((c * g.kernel + ki) * g.kernel + kj) * hw;
        for (std::size_t oh = 0; oh < g.out_height; ++oh) {
          const long ih = static_cast<long>(oh * g.stride + ki) - static_cast<long>(g.padding);
          if (ih < 0 || ih >= static_cast<long>(g.height)) continue;
          const T* src = row + oh * g.out_width;
          T* dst = image + (c * g.height + ih) * g.width;
          for (std::size_t ow = 0; ow < g.out_width; ++ow) {
            const long iw = static_cast<long>(ow * g.stride + kj) - static_cast<long>(g.padding);
            if (iw >= 0 && iw < static_cast<long>(g.width)) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

// Accepts [C,H,W] or [N,C,H,W]; returns the 4-d view dimensions.
inline Shape as_batched(const Shape& shape, const char* op) {
  if (shape.size() == 4) return shape;
  if (shape.size() == 3) return {1, shape[0], shape[1], shape[2]};
  throw ShapeError(std::string(op) + ": expected [C,H,W] or [N,C,H,W], got " + shape_str(shape));
}

}  // namespace detail

/// 2-d cross-correlation. kernels [C_out, C_in, k, k], bias [C_out].
template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding) {
  const Shape in = detail::as_batched(input.shape(), "conv2d");
  if (kernels.rank() != 4 || kernels.dim(2) != kernels.dim(3)) {
    throw ShapeError("conv2d: kernels must be [C_out,C_in,k,k], got " + shape_str(kernels.shape()));
  }
  if (kernels.dim(1) != in[1]) {
    throw ShapeError("conv2d: input has " + std::to_string(in[1]) + " channels, kernels expect " +
                     std::to_string(kernels.dim(1)));
  }
  if (bias.rank() != 1 || bias.dim(0) != kernels.dim(0)) {
    throw ShapeError("conv2d: bias shape " + shape_str(bias.shape()) + " does not match kernels");
  }
  if (stride == 0) throw ContractError("conv2d: stride must be >= 1");
  const std::size_t k = kernels.dim(2);
  if (k > in[2] + 2 * padding || k > in[3] + 2 * padding) {
    throw ShapeError("conv2d: kernel larger than padded input");
  }
  const ConvGeometry g{in[1], in[2], in[3], k, stride, padding,
                       (in[2] + 2 * padding - k) / stride + 1,
                       (in[3] + 2 * padding - k) / stride + 1};
  const std::size_t n = in[0], c_out = kernels.dim(0);
  const auto rows = static_cast<Eigen::Index>(g.col_rows());
  const auto cols = static_cast<Eigen::Index>(g.col_cols());
  const std::size_t in_stride = g.channels * g.height * g.width;

  std::vector<T> out(n * c_out * g.col_cols());
  std::vector<T> patches(n * g.col_rows() * g.col_cols());
  ConstMatrixMap<T> wm(kernels.data().data(), c_out, rows);
  for (std::size_t s = 0; s < n; ++s) {
    T* col = patches.data() + s * rows * cols;
    detail::im2col(input.data().data() + s * in_stride, g, col);
    MatrixMap<T> om(out.data() + s * c_out * cols, c_out, cols);
    om.noalias() = wm * ConstMatrixMap<T>(col, rows, cols);
    for (std::size_t o = 0; o < c_out; ++o) om.row(o).array() += bias.data()[o];
  }

  Shape out_shape = input.rank() == 4 ? Shape{n, c_out, g.out_height, g.out_width}
                                      : Shape{c_out, g.out_height, g.out_width};
  return make_result<T>(
      "conv2d", std::move(out_shape), std::move(out), {input, kernels, bias},
      [g, n, c_out, rows, cols, in_stride, patches = std::move(patches)](Node<T>& self) {
        Node<T>& x = detail::input(self, 0);
        Node<T>& w = detail::input(self, 1);
        Node<T>& b = detail::input(self, 2);
        ConstMatrixMap<T> wm(w.data.data(), c_out, rows);
        std::vector<T> dcol(x.requires_grad ? rows * cols : 0);
        for (std::size_t s = 0; s < n; ++s) {
          ConstMatrixMap<T> gy(self.grad.data() + s * c_out * cols, c_out, cols);
          ConstMatrixMap<T> col(patches.data() + s * rows * cols, rows, cols);
          if (w.requires_grad) MatrixMap<T>(w.grad.data(), c_out, rows).noalias() += gy * col.transpose();
          if (b.requires_grad) {
            const T* row = self.grad.data() + s * c_out * cols;
            for (std::size_t o = 0; o < c_out; ++o, row += cols) b.grad[o] += std::accumulate(row, row + cols, T(0));
          }
          if (x.requires_grad) {
            MatrixMap<T>(dcol.data(), rows, cols).noalias() = wm.transpose() * gy;
            detail::col2im(dcol.data(), g, x.grad.data() + s * in_stride);
          }
        }
      });
}

/// Transposed convolution (the input-gradient of conv2d). kernels are laid
/// out [C_in, C_out, k, k] so that conv_transpose2d(y, w) is the adjoint of
/// conv2d(x, w) for the same w. Output size (H-1)*stride - 2*padding + k.
template <class T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias,
                           std::size_t stride, std::size_t padding) {
  const Shape in = detail::as_batched(input.shape(), "conv_transpose2d");
  if (kernels.rank() != 4 || kernels.dim(2) != kernels.dim(3)) {
    throw ShapeError("conv_transpose2d: kernels must be [C_in,C_out,k,k], got " +
                     shape_str(kernels.shape()));
  }
  if (kernels.dim(0) != in[1]) {
    throw ShapeError("conv_transpose2d: input has " + std::to_string(in[1]) +
                     " channels, kernels expect " + std::to_string(kernels.dim(0)));
  }
  if (bias.rank() != 1 || bias.dim(0) != kernels.dim(1)) {
    throw ShapeError("conv_transpose2d: bias shape " + shape_str(bias.shape()) +
                     " does not match kernels");
  }
  if (stride == 0) throw ContractError("conv_transpose2d: stride must be >= 1");
  const std::size_t k = kernels.dim(2);
  const long oh = static_cast<long>((in[2] - 1) * stride + k) - 2 * static_cast<long>(padding);
  const long ow = static_cast<long>((in[3] - 1) * stride + k) - 2 * static_cast<long>(padding);
  if (oh <= 0 || ow <= 0) throw ShapeError("conv_transpose2d: padding leaves an empty output");

  const std::size_t n = in[0], c_in = in[1], c_out = kernels.dim(1);
  // Geometry of the forward conv that maps the output space back onto the input.
  const ConvGeometry g{c_out, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow),
                       k, stride, padding, in[2], in[3]};
  const auto rows = static_cast<Eigen::Index>(g.col_rows());
  const auto cols = static_cast<Eigen::Index>(g.col_cols());
  const std::size_t out_stride = c_out * g.height * g.width;
  const std::size_t plane = g.height * g.width;

  std::vector<T> out(n * out_stride, T(0));
  std::vector<T> col(rows * cols);
  ConstMatrixMap<T> wm(kernels.data().data(), c_in, rows);
  for (std::size_t s = 0; s < n; ++s) {
    ConstMatrixMap<T> xm(input.data().data() + s * c_in * cols, c_in, cols);
    MatrixMap<T>(col.data(), rows, cols).noalias() = wm.transpose() * xm;
    T* dst = out.data() + s * out_stride;
    detail::col2im(col.data(), g, dst);
    for (std::size_t o = 0; o < c_out; ++o) {
      for (std::size_t i = 0; i < plane; ++i) dst[o * plane + i] += bias.data()[o];
    }
  }

  Shape out_shape = input.rank() == 4 ? Shape{n, c_out, g.height, g.width}
                                      : Shape{c_out, g.height, g.width};
  return make_result<T>(
      "conv_transpose2d", std::move(out_shape), std::move(out), {input, kernels, bias},
      [g, n, c_in, c_out, rows, cols, out_stride, plane](Node<T>& self) {
        Node<T>& x = detail::input(self, 0);
        Node<T>& w = detail::input(self, 1);
        Node<T>& b = detail::input(self, 2);
        ConstMatrixMap<T> wm(w.data.data(), c_in, rows);
        std::vector<T> gcol(rows * cols);
        for (std::size_t s = 0; s < n; ++s) {
          const T* gy = self.grad.data() + s * out_stride;
          if (b.requires_grad) {
            for (std::size_t o = 0; o < c_out; ++o) {
              T acc = T(0);
              for (std::size_t i = 0; i < plane; ++i) acc += gy[o * plane + i];
              b.grad[o] += acc;
            }
          }
          if (!x.requires_grad && !w.requires_grad) continue;
          detail::im2col(gy, g, gcol.data());
          ConstMatrixMap<T> gc(gcol.data(), rows, cols);
          if (x.requires_grad) {
            MatrixMap<T>(x.grad.data() + s * c_in * cols, c_in, cols).noalias() += wm * gc;
          }
          if (w.requires_grad) {
            MatrixMap<T>(w.grad.data(), c_in, rows).noalias() +=
                ConstMatrixMap<T>(x.data.data() + s * c_in * cols, c_in, cols) * gc.transpose();
          }
        }
      });
}

/// Per-sample, per-channel standardization with learned gain and shift.
/// Uses the biased variance over the H*W plane.
template <class T>
Tensor<T> instance_norm(const Tensor<T>& input, const Tensor<T>& gain, const Tensor<T>& shift,
                        T eps) {
  if (input.rank() != 4) {
    throw ShapeError("instance_norm: expected [N,C,H,W], got " + shape_str(input.shape()));
  }
  const std::size_t n = input.dim(0), c = input.dim(1), m = input.dim(2) * input.dim(3);
  if (gain.rank() != 1 || gain.dim(0) != c || shift.rank() != 1 || shift.dim(0) != c) {
    throw ShapeError("instance_norm: gain/shift must be [" + std::to_string(c) + "]");
  }
  if (m < 2) throw ShapeError("instance_norm: needs H*W >= 2");

  std::vector<T> out(input.numel());
  std::vector<T> normalized(input.numel());
  std::vector<T> inv_std(n * c);
  const T* x = input.data().data();
  for (std::size_t s = 0; s < n * c; ++s) {
    const T* xs = x + s * m;
    T mean = T(0);
    for (std::size_t i = 0; i < m; ++i) mean += xs[i];
    mean /= static_cast<T>(m);
    T var = T(0);
    for (std::size_t i = 0; i < m; ++i) var += (xs[i] - mean) * (xs[i] - mean);
    var /= static_cast<T>(m);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[s] = is;
    const T gc = gain.data()[s % c], bc = shift.data()[s % c];
    for (std::size_t i = 0; i < m; ++i) {
      normalized[s * m + i] = (xs[i] - mean) * is;
      out[s * m + i] = gc * normalized[s * m + i] + bc;
    }
  }

  return make_result<T>(
      "instance_norm", input.shape(), std::move(out), {input, gain, shift},
      [n, c, m, normalized = std::move(normalized), inv_std = std::move(inv_std)](Node<T>& self) {
        Node<T>& x = detail::input(self, 0);
        Node<T>& g = detail::input(self, 1);
        Node<T>& b = detail::input(self, 2);
        for (std::size_t s = 0; s < n * c; ++s) {
          const std::size_t ch = s % c;
          const T* gy = self.grad.data() + s * m;
          const T* xh = normalized.data() + s * m;
          T sum_g = T(0), sum_gx = T(0);
          for (std::size_t i = 0; i < m; ++i) {
            sum_g += gy[i];
            sum_gx += gy[i] * xh[i];
          }
          if (g.requires_grad) g.grad[ch] += sum_gx;
          if (b.requires_grad) b.grad[ch] += sum_g;
          if (x.requires_grad) {
            const T gc = g.data[ch];
            const T scale = gc * inv_std[s] / static_cast<T>(m);
            T* gx = x.grad.data() + s * m;
            for (std::size_t i = 0; i < m; ++i) {
              gx[i] += scale * (static_cast<T>(m) * gy[i] - sum_g - xh[i] * sum_gx);
            }
          }
        }
      });
}

}  // namespace adgan

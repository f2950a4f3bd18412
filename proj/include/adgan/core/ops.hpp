#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "adgan/core/tensor.hpp"

namespace adgan {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

namespace detail {

inline void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

template <class T>
Node<T>& input(Node<T>& self, std::size_t i) {
  return *self.inputs[i];
}

// Elementwise unary op; `derivative(x, y)` gives dy/dx from input and output.
template <class T, class Forward, class Derivative>
Tensor<T> unary(const char* name, const Tensor<T>& x, Forward forward, Derivative derivative) {
  const auto in = x.data();
  std::vector<T> out(in.size());
  std::transform(in.begin(), in.end(), out.begin(), forward);
  return make_result<T>(name, x.shape(), std::move(out), {x}, [derivative](Node<T>& self) {
    Node<T>& a = input(self, 0);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      a.grad[i] += self.grad[i] * derivative(a.data[i], self.data[i]);
    }
  });
}

template <class T>
T stable_sigmoid(T v) {
  if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
  const T e = std::exp(v);
  return e / (T(1) + e);
}

}  // namespace detail

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "add");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_result<T>("add", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      Node<T>& in = detail::input(self, k);
      if (!in.requires_grad) continue;
      for (std::size_t i = 0; i < in.grad.size(); ++i) in.grad[i] += self.grad[i];
    }
  });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "sub");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_result<T>("sub", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    Node<T>& lhs = detail::input(self, 0);
    Node<T>& rhs = detail::input(self, 1);
    if (lhs.requires_grad) {
      for (std::size_t i = 0; i < lhs.grad.size(); ++i) lhs.grad[i] += self.grad[i];
    }
    if (rhs.requires_grad) {
      for (std::size_t i = 0; i < rhs.grad.size(); ++i) rhs.grad[i] -= self.grad[i];
    }
  });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_result<T>("mul", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    Node<T>& lhs = detail::input(self, 0);
    Node<T>& rhs = detail::input(self, 1);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (lhs.requires_grad) lhs.grad[i] += self.grad[i] * rhs.data[i];
      if (rhs.requires_grad) rhs.grad[i] += self.grad[i] * lhs.data[i];
    }
  });
}

template <class T>
Tensor<T> mul_scalar(const Tensor<T>& x, T s) {
  return detail::unary<T>(
      "mul_scalar", x, [s](T v) { return v * s; }, [s](T, T) { return s; });
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& x, T s) {
  return detail::unary<T>(
      "add_scalar", x, [s](T v) { return v + s; }, [](T, T) { return T(1); });
}

template <class T>
Tensor<T> abs(const Tensor<T>& x) {
  return detail::unary<T>(
      "abs", x, [](T v) { return std::abs(v); },
      [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  return detail::unary<T>(
      "relu", x, [](T v) { return v < T(0) ? T(0) : v; },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <class T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  return detail::unary<T>(
      "leaky_relu", x, [slope](T v) { return v > T(0) ? v : slope * v; },
      [slope](T v, T) { return v > T(0) ? T(1) : slope; });
}

template <class T>
Tensor<T> tanh(const Tensor<T>& x) {
  return detail::unary<T>(
      "tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return detail::unary<T>(
      "sigmoid", x, [](T v) { return detail::stable_sigmoid(v); },
      [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Tensor<T> sum_all(const Tensor<T>& x) {
  T total = T(0);
  for (T v : x.data()) total += v;
  return make_result<T>("sum_all", {1}, {total}, {x}, [](Node<T>& self) {
    Node<T>& a = detail::input(self, 0);
    for (auto& g : a.grad) g += self.grad[0];
  });
}

template <class T>
Tensor<T> mean_all(const Tensor<T>& x) {
  T total = T(0);
  for (T v : x.data()) total += v;
  const T count = static_cast<T>(x.numel());
  return make_result<T>("mean_all", {1}, {total / count}, {x}, [count](Node<T>& self) {
    Node<T>& a = detail::input(self, 0);
    const T g = self.grad[0] / count;
    for (auto& v : a.grad) v += g;
  });
}

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  return make_result<T>("reshape", std::move(shape), std::move(out), {x}, [](Node<T>& self) {
    Node<T>& a = detail::input(self, 0);
    for (std::size_t i = 0; i < a.grad.size(); ++i) a.grad[i] += self.grad[i];
  });
}

/// [N, ...] -> [N, prod(...)]
template <class T>
Tensor<T> flatten(const Tensor<T>& x) {
  if (x.rank() < 2) throw ShapeError("flatten: need rank >= 2, got " + shape_str(x.shape()));
  return reshape(x, {x.dim(0), x.numel() / x.dim(0)});
}

/// Stacks two [N,C,H,W] tensors along the channel axis.
template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 4 || b.rank() != 4 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) ||
      a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels: incompatible " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), plane = a.dim(2) * a.dim(3);
  std::vector<T> out(n * (ca + cb) * plane);
  for (std::size_t s = 0; s < n; ++s) {
    std::copy_n(a.data().data() + s * ca * plane, ca * plane, out.data() + s * (ca + cb) * plane);
    std::copy_n(b.data().data() + s * cb * plane, cb * plane,
                out.data() + (s * (ca + cb) + ca) * plane);
  }
  return make_result<T>(
      "concat_channels", {n, ca + cb, a.dim(2), a.dim(3)}, std::move(out), {a, b},
      [n, ca, cb, plane](Node<T>& self) {
        Node<T>& lhs = detail::input(self, 0);
        Node<T>& rhs = detail::input(self, 1);
        for (std::size_t s = 0; s < n; ++s) {
          const T* g = self.grad.data() + s * (ca + cb) * plane;
          if (lhs.requires_grad) {
            for (std::size_t i = 0; i < ca * plane; ++i) lhs.grad[s * ca * plane + i] += g[i];
          }
          if (rhs.requires_grad) {
            for (std::size_t i = 0; i < cb * plane; ++i) {
              rhs.grad[s * cb * plane + i] += g[ca * plane + i];
            }
          }
        }
      });
}

/// Channels [begin, end) of an [N,C,H,W] tensor.
template <class T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  if (x.rank() != 4 || begin >= end || end > x.dim(1)) {
    throw ShapeError("slice_channels: bad range on " + shape_str(x.shape()));
  }
  const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3), k = end - begin;
  std::vector<T> out(n * k * plane);
  for (std::size_t s = 0; s < n; ++s) {
    std::copy_n(x.data().data() + (s * c + begin) * plane, k * plane, out.data() + s * k * plane);
  }
  return make_result<T>("slice_channels", {n, k, x.dim(2), x.dim(3)}, std::move(out), {x},
                        [n, c, plane, k, begin](Node<T>& self) {
                          Node<T>& a = detail::input(self, 0);
                          for (std::size_t s = 0; s < n; ++s) {
                            for (std::size_t i = 0; i < k * plane; ++i) {
                              a.grad[(s * c + begin) * plane + i] += self.grad[s * k * plane + i];
                            }
                          }
                        });
}

/// Fully connected layer: input [N,F], weights [O,F], bias [O] -> [N,O].
template <class T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias) {
  if (x.rank() != 2 || weights.rank() != 2 || bias.rank() != 1 || weights.dim(1) != x.dim(1) ||
      bias.dim(0) != weights.dim(0)) {
    throw ShapeError("dense: incompatible input " + shape_str(x.shape()) + ", weights " +
                     shape_str(weights.shape()) + ", bias " + shape_str(bias.shape()));
  }
  const Eigen::Index n = x.dim(0), f = x.dim(1), o = weights.dim(0);
  std::vector<T> out(n * o);
  ConstMatrixMap<T> xm(x.data().data(), n, f);
  ConstMatrixMap<T> wm(weights.data().data(), o, f);
  MatrixMap<T> ym(out.data(), n, o);
  ym.noalias() = xm * wm.transpose();
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < o; ++c) ym(r, c) += bias.data()[c];
  }
  return make_result<T>(
      "dense", {static_cast<std::size_t>(n), static_cast<std::size_t>(o)}, std::move(out),
      {x, weights, bias}, [n, f, o](Node<T>& self) {
        Node<T>& in = detail::input(self, 0);
        Node<T>& w = detail::input(self, 1);
        Node<T>& b = detail::input(self, 2);
        ConstMatrixMap<T> gy(self.grad.data(), n, o);
        if (in.requires_grad) {
          MatrixMap<T>(in.grad.data(), n, f).noalias() +=
              gy * ConstMatrixMap<T>(w.data.data(), o, f);
        }
        if (w.requires_grad) {
          MatrixMap<T>(w.grad.data(), o, f).noalias() +=
              gy.transpose() * ConstMatrixMap<T>(in.data.data(), n, f);
        }
        if (b.requires_grad) {
          for (Eigen::Index r = 0; r < n; ++r) {
            for (Eigen::Index c = 0; c < o; ++c) b.grad[c] += gy(r, c);
          }
        }
      });
}

/// Mean sigmoid cross-entropy between logits and targets in [0,1], in the
/// overflow-free form max(l,0) - l*t + log1p(exp(-|l|)).
template <class T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets) {
  detail::require_same_shape(logits.shape(), targets.shape(), "bce_with_logits");
  for (T t : targets.data()) {
    if (!(t >= T(0) && t <= T(1))) {
      throw DomainError("bce_with_logits: target " + std::to_string(t) + " outside [0,1]");
    }
  }
  const auto l = logits.data();
  const auto t = targets.data();
  T total = T(0);
  for (std::size_t i = 0; i < l.size(); ++i) {
    total += std::max(l[i], T(0)) - l[i] * t[i] + std::log1p(std::exp(-std::abs(l[i])));
  }
  const T count = static_cast<T>(l.size());
  return make_result<T>("bce_with_logits", {1}, {total / count}, {logits, targets},
                        [count](Node<T>& self) {
                          Node<T>& lg = detail::input(self, 0);
                          Node<T>& tg = detail::input(self, 1);
                          const T scale = self.grad[0] / count;
                          for (std::size_t i = 0; i < lg.data.size(); ++i) {
                            if (lg.requires_grad) {
                              lg.grad[i] += scale * (detail::stable_sigmoid(lg.data[i]) - tg.data[i]);
                            }
                            // d/dt = -l
                            if (tg.requires_grad) tg.grad[i] -= scale * lg.data[i];
                          }
                        });
}

template <class T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) {
  return add(a, b);
}
template <class T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) {
  return sub(a, b);
}
template <class T>
Tensor<T> operator*(T s, const Tensor<T>& a) {
  return mul_scalar(a, s);
}

}  // namespace adgan

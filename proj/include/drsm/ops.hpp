// Copyright 2026 The DRSM Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DRSM_OPS_HPP
#define DRSM_OPS_HPP

#include "drsm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace drsm {

namespace detail {

template <typename Scalar>
using MatRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using MapRM = Eigen::Map<MatRM<Scalar>>;
template <typename Scalar>
using ConstMapRM = Eigen::Map<const MatRM<Scalar>>;

inline void require(bool ok, const std::string& message) {
  if (!ok) throw ShapeError(message);
}

// Geometry of a stride/pad convolution from an input image to an output
// image, both NHWC. conv_transpose2d reuses it with the roles swapped.
struct ConvGeometry {
  Index batch = 1;
  Index in_h = 0, in_w = 0, in_c = 0;
  Index out_h = 0, out_w = 0;
  Index k = 1, stride = 1, pad = 0;

  Index rows() const { return batch * out_h * out_w; }
  Index patch() const { return k * k * in_c; }
};

template <typename Scalar>
void im2col(const Scalar* image, const ConvGeometry& g, Scalar* cols) {
  const Index patch = g.patch();
  for (Index n = 0; n < g.batch; ++n) {
    const Scalar* img = image + n * g.in_h * g.in_w * g.in_c;
    for (Index oy = 0; oy < g.out_h; ++oy) {
      for (Index ox = 0; ox < g.out_w; ++ox) {
        Scalar* row = cols + ((n * g.out_h + oy) * g.out_w + ox) * patch;
        for (Index ky = 0; ky < g.k; ++ky) {
          const Index iy = oy * g.stride - g.pad + ky;
          for (Index kx = 0; kx < g.k; ++kx) {
            const Index ix = ox * g.stride - g.pad + kx;
            Scalar* dst = row + (ky * g.k + kx) * g.in_c;
            if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) {
              std::fill(dst, dst + g.in_c, Scalar(0));
            } else {
              const Scalar* src = img + (iy * g.in_w + ix) * g.in_c;
              std::copy(src, src + g.in_c, dst);
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add patch rows back onto the image.
template <typename Scalar>
void col2im_add(const Scalar* cols, const ConvGeometry& g, Scalar* image) {
  const Index patch = g.patch();
  for (Index n = 0; n < g.batch; ++n) {
    Scalar* img = image + n * g.in_h * g.in_w * g.in_c;
    for (Index oy = 0; oy < g.out_h; ++oy) {
      for (Index ox = 0; ox < g.out_w; ++ox) {
        const Scalar* row = cols + ((n * g.out_h + oy) * g.out_w + ox) * patch;
        for (Index ky = 0; ky < g.k; ++ky) {
          const Index iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          for (Index kx = 0; kx < g.k; ++kx) {
            const Index ix = ox * g.stride - g.pad + kx;
            if (ix < 0 || ix >= g.in_w) continue;
            const Scalar* src = row + (ky * g.k + kx) * g.in_c;
            Scalar* dst = img + (iy * g.in_w + ix) * g.in_c;
            for (Index c = 0; c < g.in_c; ++c) dst[c] += src[c];
          }
        }
      }
    }
  }
}

struct ImageDims {
  Index batch, h, w, c;
};

template <typename Scalar>
ImageDims image_dims(const Tensor<Scalar>& t, const char* what) {
  require(t.rank() == 3 || t.rank() == 4,
          std::string(what) + ": expected HxWxC or NxHxWxC input, got " + shape_string(t.dims()));
  if (t.rank() == 3) return {1, t.dim(0), t.dim(1), t.dim(2)};
  return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
}

template <typename Scalar>
void check_kernel(const Tensor<Scalar>& kernels, const Tensor<Scalar>& bias, Index stride,
                  Index pad, const char* what) {
  require(kernels.rank() == 4,
          std::string(what) + ": kernels must be k x k x Cin x Cout, got " + shape_string(kernels.dims()));
  require(kernels.dim(0) == kernels.dim(1),
          std::string(what) + ": kernel height " + std::to_string(kernels.dim(0)) +
              " != kernel width " + std::to_string(kernels.dim(1)));
  require(stride >= 1, std::string(what) + ": stride must be >= 1");
  require(pad >= 0, std::string(what) + ": padding must be >= 0");
  require(bias.rank() == 1, std::string(what) + ": bias must be rank 1, got " + shape_string(bias.dims()));
}

template <typename Scalar>
Shape image_shape(Index rank, Index n, Index h, Index w, Index c) {
  if (rank == 3) return {h, w, c};
  return {n, h, w, c};
}

template <typename Scalar, typename Fwd, typename Deriv>
Tensor<Scalar> unary(Tape<Scalar>& tape, const char* op, const Tensor<Scalar>& x, Fwd fwd,
                     Deriv deriv) {
  const bool grad = tape.needs_grad({&x});
  Tensor<Scalar> out(x.dims(), x.value().unaryExpr(fwd).eval(), grad);
  if (grad) {
    tape.record(op, {x}, out, [x, out, deriv]() mutable {
      if (!x.requires_grad()) return;
      const auto& xv = x.value();
      const auto& yv = out.value();
      const auto& g = out.grad();
      auto& gx = x.grad();
      for (Index i = 0; i < xv.size(); ++i) gx(i) += g(i) * deriv(xv(i), yv(i));
    });
  }
  return out;
}

template <typename Scalar>
void check_same(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* op) {
  require(a.dims() == b.dims(), std::string(op) + ": shape mismatch " + shape_string(a.dims()) +
                                    " vs " + shape_string(b.dims()));
}

}  // namespace detail

// 2-D convolution over HxWxC (or NxHxWxC) input with k x k x Cin x Cout
// kernels. Output extent floor((H + 2p - k) / stride) + 1.
template <typename Scalar>
Tensor<Scalar> conv2d(Tape<Scalar>& tape, const Tensor<Scalar>& input,
                      const Tensor<Scalar>& kernels, const Tensor<Scalar>& bias,
                      Index stride, Index padding) {
  using namespace detail;
  const ImageDims in = image_dims(input, "conv2d");
  check_kernel(kernels, bias, stride, padding, "conv2d");
  const Index k = kernels.dim(0);
  const Index cout = kernels.dim(3);
  require(kernels.dim(2) == in.c, "conv2d: input channels " + std::to_string(in.c) +
                                      " != kernel input channels " + std::to_string(kernels.dim(2)));
  require(bias.dim(0) == cout, "conv2d: bias length " + std::to_string(bias.dim(0)) +
                                   " != output channels " + std::to_string(cout));
  require(in.h + 2 * padding >= k, "conv2d: padded height " + std::to_string(in.h + 2 * padding) +
                                       " smaller than kernel " + std::to_string(k));
  require(in.w + 2 * padding >= k, "conv2d: padded width " + std::to_string(in.w + 2 * padding) +
                                       " smaller than kernel " + std::to_string(k));

  ConvGeometry g;
  g.batch = in.batch;
  g.in_h = in.h;
  g.in_w = in.w;
  g.in_c = in.c;
  g.k = k;
  g.stride = stride;
  g.pad = padding;
  g.out_h = (in.h + 2 * padding - k) / stride + 1;
  g.out_w = (in.w + 2 * padding - k) / stride + 1;

  MatRM<Scalar> cols(g.rows(), g.patch());
  im2col(input.data(), g, cols.data());

  const bool grad = tape.needs_grad({&input, &kernels, &bias});
  Tensor<Scalar> out(image_shape<Scalar>(input.rank(), g.batch, g.out_h, g.out_w, cout), grad);
  MapRM<Scalar> y(out.data(), g.rows(), cout);
  ConstMapRM<Scalar> w(kernels.data(), g.patch(), cout);
  y.noalias() = cols * w;
  y.rowwise() += bias.value().matrix().transpose();

  if (grad) {
    tape.record("conv2d", {input, kernels, bias}, out,
                [input, kernels, bias, out, g, cout, cols = std::move(cols)]() mutable {
                  ConstMapRM<Scalar> dy(out.grad().data(), g.rows(), cout);
                  if (kernels.requires_grad()) {
                    MapRM<Scalar> dw(kernels.grad().data(), g.patch(), cout);
                    dw.noalias() += cols.transpose() * dy;
                  }
                  if (bias.requires_grad()) {
                    bias.grad() += dy.colwise().sum().transpose().array();
                  }
                  if (input.requires_grad()) {
                    ConstMapRM<Scalar> w(kernels.data(), g.patch(), cout);
                    MatRM<Scalar> dcols = dy * w.transpose();
                    col2im_add(dcols.data(), g, input.grad().data());
                  }
                });
  }
  return out;
}

// Transposed convolution, the linear adjoint of conv2d with the same kernel
// tensor. Kernels are k x k x Cout x Cin (the shape of the convolution that
// maps this op's output space back to its input space). Output extent
// (H - 1) * stride - 2p + k.
template <typename Scalar>
Tensor<Scalar> conv_transpose2d(Tape<Scalar>& tape, const Tensor<Scalar>& input,
                                const Tensor<Scalar>& kernels, const Tensor<Scalar>& bias,
                                Index stride, Index padding) {
  using namespace detail;
  const ImageDims in = image_dims(input, "conv_transpose2d");
  check_kernel(kernels, bias, stride, padding, "conv_transpose2d");
  const Index k = kernels.dim(0);
  const Index cout = kernels.dim(2);
  require(kernels.dim(3) == in.c, "conv_transpose2d: input channels " + std::to_string(in.c) +
                                      " != kernel input channels " + std::to_string(kernels.dim(3)));
  require(bias.dim(0) == cout, "conv_transpose2d: bias length " + std::to_string(bias.dim(0)) +
                                   " != output channels " + std::to_string(cout));
  const Index out_h = (in.h - 1) * stride - 2 * padding + k;
  const Index out_w = (in.w - 1) * stride - 2 * padding + k;
  require(out_h >= 1, "conv_transpose2d: output height " + std::to_string(out_h) + " < 1");
  require(out_w >= 1, "conv_transpose2d: output width " + std::to_string(out_w) + " < 1");

  // Geometry of the forward convolution output -> input.
  ConvGeometry g;
  g.batch = in.batch;
  g.in_h = out_h;
  g.in_w = out_w;
  g.in_c = cout;
  g.out_h = in.h;
  g.out_w = in.w;
  g.k = k;
  g.stride = stride;
  g.pad = padding;

  const bool grad = tape.needs_grad({&input, &kernels, &bias});
  Tensor<Scalar> out(image_shape<Scalar>(input.rank(), g.batch, out_h, out_w, cout), grad);
  {
    ConstMapRM<Scalar> x(input.data(), g.rows(), in.c);
    ConstMapRM<Scalar> w(kernels.data(), g.patch(), in.c);
    MatRM<Scalar> cols = x * w.transpose();
    col2im_add(cols.data(), g, out.data());
    MapRM<Scalar> y(out.data(), g.batch * out_h * out_w, cout);
    y.rowwise() += bias.value().matrix().transpose();
  }

  if (grad) {
    tape.record("conv_transpose2d", {input, kernels, bias}, out,
                [input, kernels, bias, out, g, cin = in.c, cout]() mutable {
                  MatRM<Scalar> dcols(g.rows(), g.patch());
                  im2col(out.grad().data(), g, dcols.data());
                  if (input.requires_grad()) {
                    ConstMapRM<Scalar> w(kernels.data(), g.patch(), cin);
                    MapRM<Scalar> dx(input.grad().data(), g.rows(), cin);
                    dx.noalias() += dcols * w;
                  }
                  if (kernels.requires_grad()) {
                    ConstMapRM<Scalar> x(input.data(), g.rows(), cin);
                    MapRM<Scalar> dw(kernels.grad().data(), g.patch(), cin);
                    dw.noalias() += dcols.transpose() * x;
                  }
                  if (bias.requires_grad()) {
                    ConstMapRM<Scalar> dy(out.grad().data(), g.batch * g.in_h * g.in_w, cout);
                    bias.grad() += dy.colwise().sum().transpose().array();
                  }
                });
  }
  return out;
}

// Fully connected layer: out = W x + b for x of shape [n] or a batch [N, n].
template <typename Scalar>
Tensor<Scalar> dense(Tape<Scalar>& tape, const Tensor<Scalar>& input,
                     const Tensor<Scalar>& weights, const Tensor<Scalar>& bias) {
  using namespace detail;
  require(input.rank() == 1 || input.rank() == 2,
          "dense: input must be [n] or [N, n], got " + shape_string(input.dims()));
  require(weights.rank() == 2, "dense: weights must be [m, n], got " + shape_string(weights.dims()));
  const Index n = input.dim(-1);
  const Index m = weights.dim(0);
  const Index batch = input.rank() == 2 ? input.dim(0) : 1;
  require(weights.dim(1) == n, "dense: input length " + std::to_string(n) +
                                   " != weight columns " + std::to_string(weights.dim(1)));
  require(bias.rank() == 1 && bias.dim(0) == m,
          "dense: bias " + shape_string(bias.dims()) + " != [" + std::to_string(m) + "]");

  const bool grad = tape.needs_grad({&input, &weights, &bias});
  Tensor<Scalar> out(input.rank() == 2 ? Shape{batch, m} : Shape{m}, grad);
  ConstMapRM<Scalar> x(input.data(), batch, n);
  ConstMapRM<Scalar> w(weights.data(), m, n);
  MapRM<Scalar> y(out.data(), batch, m);
  y.noalias() = x * w.transpose();
  y.rowwise() += bias.value().matrix().transpose();

  if (grad) {
    tape.record("dense", {input, weights, bias}, out,
                [input, weights, bias, out, batch, n, m]() mutable {
                  ConstMapRM<Scalar> dy(out.grad().data(), batch, m);
                  if (input.requires_grad()) {
                    ConstMapRM<Scalar> w(weights.data(), m, n);
                    MapRM<Scalar> dx(input.grad().data(), batch, n);
                    dx.noalias() += dy * w;
                  }
                  if (weights.requires_grad()) {
                    ConstMapRM<Scalar> x(input.data(), batch, n);
                    MapRM<Scalar> dw(weights.grad().data(), m, n);
                    dw.noalias() += dy.transpose() * x;
                  }
                  if (bias.requires_grad()) {
                    bias.grad() += dy.colwise().sum().transpose().array();
                  }
                });
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> relu(Tape<Scalar>& tape, const Tensor<Scalar>& x) {
  return detail::unary(
      tape, "relu", x, [](Scalar v) { return v > Scalar(0) ? v : Scalar(0); },
      [](Scalar v, Scalar) { return v > Scalar(0) ? Scalar(1) : Scalar(0); });
}

template <typename Scalar>
Tensor<Scalar> sigmoid(Tape<Scalar>& tape, const Tensor<Scalar>& x) {
  return detail::unary(
      tape, "sigmoid", x,
      [](Scalar v) {
        // Split by sign so exp never overflows.
        if (v >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-v));
        const Scalar e = std::exp(v);
        return e / (Scalar(1) + e);
      },
      [](Scalar, Scalar y) { return y * (Scalar(1) - y); });
}

template <typename Scalar>
Tensor<Scalar> exp(Tape<Scalar>& tape, const Tensor<Scalar>& x) {
  return detail::unary(
      tape, "exp", x, [](Scalar v) { return std::exp(v); }, [](Scalar, Scalar y) { return y; });
}

template <typename Scalar>
Tensor<Scalar> log(Tape<Scalar>& tape, const Tensor<Scalar>& x) {
  if (!(x.value() > Scalar(0)).all()) {
    throw NumericError("log: input " + shape_string(x.dims()) + " has non-positive entries");
  }
  return detail::unary(
      tape, "log", x, [](Scalar v) { return std::log(v); },
      [](Scalar v, Scalar) { return Scalar(1) / v; });
}

template <typename Scalar>
Tensor<Scalar> square(Tape<Scalar>& tape, const Tensor<Scalar>& x) {
  return detail::unary(
      tape, "square", x, [](Scalar v) { return v * v; },
      [](Scalar v, Scalar) { return Scalar(2) * v; });
}

template <typename Scalar>
Tensor<Scalar> scale(Tape<Scalar>& tape, const Tensor<Scalar>& x, Scalar factor) {
  return detail::unary(
      tape, "scale", x, [factor](Scalar v) { return factor * v; },
      [factor](Scalar, Scalar) { return factor; });
}

template <typename Scalar>
Tensor<Scalar> add_scalar(Tape<Scalar>& tape, const Tensor<Scalar>& x, Scalar c) {
  return detail::unary(
      tape, "add_scalar", x, [c](Scalar v) { return v + c; }, [](Scalar, Scalar) { return Scalar(1); });
}

// Clamp into [lo, hi]; gradient passes only where the input was inside.
template <typename Scalar>
Tensor<Scalar> clamp(Tape<Scalar>& tape, const Tensor<Scalar>& x, Scalar lo, Scalar hi) {
  return detail::unary(
      tape, "clamp", x, [lo, hi](Scalar v) { return std::clamp(v, lo, hi); },
      [lo, hi](Scalar v, Scalar) { return (v >= lo && v <= hi) ? Scalar(1) : Scalar(0); });
}

template <typename Scalar>
Tensor<Scalar> add(Tape<Scalar>& tape, const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check_same(a, b, "add");
  const bool grad = tape.needs_grad({&a, &b});
  Tensor<Scalar> out(a.dims(), (a.value() + b.value()).eval(), grad);
  if (grad) {
    tape.record("add", {a, b}, out, [a, b, out]() mutable {
      if (a.requires_grad()) a.grad() += out.grad();
      if (b.requires_grad()) b.grad() += out.grad();
    });
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> sub(Tape<Scalar>& tape, const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check_same(a, b, "sub");
  const bool grad = tape.needs_grad({&a, &b});
  Tensor<Scalar> out(a.dims(), (a.value() - b.value()).eval(), grad);
  if (grad) {
    tape.record("sub", {a, b}, out, [a, b, out]() mutable {
      if (a.requires_grad()) a.grad() += out.grad();
      if (b.requires_grad()) b.grad() -= out.grad();
    });
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> mul(Tape<Scalar>& tape, const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check_same(a, b, "mul");
  const bool grad = tape.needs_grad({&a, &b});
  Tensor<Scalar> out(a.dims(), (a.value() * b.value()).eval(), grad);
  if (grad) {
    tape.record("mul", {a, b}, out, [a, b, out]() mutable {
      if (a.requires_grad()) a.grad() += out.grad() * b.value();
      if (b.requires_grad()) b.grad() += out.grad() * a.value();
    });
  }
  return out;
}

// Scalar-by-tensor product where the scalar factor is itself differentiable.
template <typename Scalar>
Tensor<Scalar> scale_by(Tape<Scalar>& tape, const Tensor<Scalar>& x, const Tensor<Scalar>& factor) {
  detail::require(factor.size() == 1, "scale_by: factor must be scalar, got " + shape_string(factor.dims()));
  const bool grad = tape.needs_grad({&x, &factor});
  Tensor<Scalar> out(x.dims(), (x.value() * factor.item()).eval(), grad);
  if (grad) {
    tape.record("scale_by", {x, factor}, out, [x, factor, out]() mutable {
      if (x.requires_grad()) x.grad() += out.grad() * factor.item();
      if (factor.requires_grad()) factor.grad()(0) += (out.grad() * x.value()).sum();
    });
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> sum(Tape<Scalar>& tape, const Tensor<Scalar>& x) {
  const bool grad = tape.needs_grad({&x});
  Tensor<Scalar> out = Tensor<Scalar>::scalar(x.value().sum(), grad);
  if (grad) {
    tape.record("sum", {x}, out, [x, out]() mutable {
      if (x.requires_grad()) x.grad() += out.grad()(0);
    });
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> mean(Tape<Scalar>& tape, const Tensor<Scalar>& x) {
  return scale(tape, sum(tape, x), Scalar(1) / static_cast<Scalar>(x.size()));
}

template <typename Scalar>
Tensor<Scalar> reshape(Tape<Scalar>& tape, const Tensor<Scalar>& x, Shape dims) {
  detail::require(shape_size(dims) == x.size(),
                  "reshape: cannot view " + shape_string(x.dims()) + " as " + shape_string(dims));
  const bool grad = tape.needs_grad({&x});
  Tensor<Scalar> out(std::move(dims), x.value(), grad);
  if (grad) {
    tape.record("reshape", {x}, out, [x, out]() mutable {
      if (x.requires_grad()) x.grad() += out.grad();
    });
  }
  return out;
}

// Concatenate along the last axis. All leading extents must agree.
template <typename Scalar>
Tensor<Scalar> concat(Tape<Scalar>& tape, const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require(a.rank() == b.rank() && a.rank() >= 1,
                  "concat: rank mismatch " + shape_string(a.dims()) + " vs " + shape_string(b.dims()));
  for (Index i = 0; i + 1 < a.rank(); ++i) {
    detail::require(a.dim(i) == b.dim(i), "concat: dimension " + std::to_string(i) + " differs: " +
                                              shape_string(a.dims()) + " vs " + shape_string(b.dims()));
  }
  const Index na = a.dim(-1), nb = b.dim(-1);
  const Index rows = a.size() / na;
  Shape dims = a.dims();
  dims.back() = na + nb;
  const bool grad = tape.needs_grad({&a, &b});
  Tensor<Scalar> out(dims, grad);
  detail::MapRM<Scalar> y(out.data(), rows, na + nb);
  y.leftCols(na) = detail::ConstMapRM<Scalar>(a.data(), rows, na);
  y.rightCols(nb) = detail::ConstMapRM<Scalar>(b.data(), rows, nb);
  if (grad) {
    tape.record("concat", {a, b}, out, [a, b, out, rows, na, nb]() mutable {
      detail::ConstMapRM<Scalar> dy(out.grad().data(), rows, na + nb);
      if (a.requires_grad()) detail::MapRM<Scalar>(a.grad().data(), rows, na) += dy.leftCols(na);
      if (b.requires_grad()) detail::MapRM<Scalar>(b.grad().data(), rows, nb) += dy.rightCols(nb);
    });
  }
  return out;
}

// Channels [begin, begin + count) of the last axis.
template <typename Scalar>
Tensor<Scalar> slice_last(Tape<Scalar>& tape, const Tensor<Scalar>& x, Index begin, Index count) {
  const Index c = x.dim(-1);
  detail::require(begin >= 0 && count >= 1 && begin + count <= c,
                  "slice_last: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                      ") outside last extent " + std::to_string(c));
  const Index rows = x.size() / c;
  Shape dims = x.dims();
  dims.back() = count;
  const bool grad = tape.needs_grad({&x});
  Tensor<Scalar> out(dims, grad);
  detail::MapRM<Scalar>(out.data(), rows, count) =
      detail::ConstMapRM<Scalar>(x.data(), rows, c).middleCols(begin, count);
  if (grad) {
    tape.record("slice_last", {x}, out, [x, out, rows, c, begin, count]() mutable {
      if (!x.requires_grad()) return;
      detail::MapRM<Scalar>(x.grad().data(), rows, c).middleCols(begin, count) +=
          detail::ConstMapRM<Scalar>(out.grad().data(), rows, count);
    });
  }
  return out;
}

// Sum over cells of the diagonal Gaussian negative log-likelihood
// 0.5 log(2 pi sigma^2) + (y - mu)^2 / (2 sigma^2), sigma^2 = exp(logvar).
template <typename Scalar>
Tensor<Scalar> gaussian_nll(Tape<Scalar>& tape, const Tensor<Scalar>& mean,
                            const Tensor<Scalar>& logvar, const Tensor<Scalar>& target) {
  detail::check_same(mean, logvar, "gaussian_nll");
  detail::check_same(mean, target, "gaussian_nll");
  const Scalar half_log_2pi = Scalar(0.5) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
  const Array<Scalar> inv_var = (-logvar.value()).exp();
  const Array<Scalar> diff = target.value() - mean.value();
  const Scalar total =
      (half_log_2pi + Scalar(0.5) * logvar.value() + Scalar(0.5) * diff.square() * inv_var).sum();
  const bool grad = tape.needs_grad({&mean, &logvar, &target});
  Tensor<Scalar> out = Tensor<Scalar>::scalar(total, grad);
  if (grad) {
    tape.record("gaussian_nll", {mean, logvar, target}, out,
                [mean, logvar, target, out, inv_var, diff]() mutable {
                  const Scalar g = out.grad()(0);
                  if (mean.requires_grad()) mean.grad() -= g * diff * inv_var;
                  if (target.requires_grad()) target.grad() += g * diff * inv_var;
                  if (logvar.requires_grad()) {
                    logvar.grad() += g * (Scalar(0.5) - Scalar(0.5) * diff.square() * inv_var);
                  }
                });
  }
  return out;
}

// Mixture weights along the last axis: w_i = r_i^2 / sum_j r_j^2, falling
// back to uniform weights where sum_j r_j^2 < 1e-12.
template <typename Scalar>
Tensor<Scalar> square_normalize(Tape<Scalar>& tape, const Tensor<Scalar>& raw) {
  constexpr double kFallback = 1e-12;
  const Index n = raw.dim(-1);
  const Index rows = raw.size() / n;
  const bool grad = tape.needs_grad({&raw});
  Tensor<Scalar> out(raw.dims(), grad);
  detail::ConstMapRM<Scalar> r(raw.data(), rows, n);
  detail::MapRM<Scalar> w(out.data(), rows, n);
  Array<Scalar> norms(rows);
  for (Index i = 0; i < rows; ++i) {
    const Scalar s = r.row(i).squaredNorm();
    norms(i) = s;
    if (static_cast<double>(s) < kFallback) {
      w.row(i).setConstant(Scalar(1) / static_cast<Scalar>(n));
    } else {
      w.row(i) = r.row(i).array().square().matrix() / s;
    }
  }
  if (grad) {
    tape.record("square_normalize", {raw}, out, [raw, out, rows, n, norms]() mutable {
      if (!raw.requires_grad()) return;
      detail::ConstMapRM<Scalar> r(raw.data(), rows, n);
      detail::ConstMapRM<Scalar> w(out.data(), rows, n);
      detail::ConstMapRM<Scalar> dw(out.grad().data(), rows, n);
      detail::MapRM<Scalar> dr(raw.grad().data(), rows, n);
      for (Index i = 0; i < rows; ++i) {
        if (static_cast<double>(norms(i)) < kFallback) continue;
        // dw_j/dr_k = 2 r_k (delta_jk - w_j) / S
        const Scalar dot = dw.row(i).dot(w.row(i));
        for (Index k = 0; k < n; ++k) {
          dr(i, k) += Scalar(2) * r(i, k) * (dw(i, k) - dot) / norms(i);
        }
      }
    });
  }
  return out;
}

// Sum over cells of -log sum_i w_i N(y | mu_i, exp(logvar_i)), with the
// mixture components along the last axis and target of last extent 1.
template <typename Scalar>
Tensor<Scalar> gmm_nll(Tape<Scalar>& tape, const Tensor<Scalar>& weights,
                       const Tensor<Scalar>& means, const Tensor<Scalar>& logvars,
                       const Tensor<Scalar>& target) {
  detail::check_same(weights, means, "gmm_nll");
  detail::check_same(weights, logvars, "gmm_nll");
  const Index n = weights.dim(-1);
  const Index rows = weights.size() / n;
  detail::require(target.size() == rows, "gmm_nll: target " + shape_string(target.dims()) +
                                             " does not match " + std::to_string(rows) + " cells");
  const Scalar half_log_2pi = Scalar(0.5) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
  detail::ConstMapRM<Scalar> w(weights.data(), rows, n);
  detail::ConstMapRM<Scalar> mu(means.data(), rows, n);
  detail::ConstMapRM<Scalar> lv(logvars.data(), rows, n);
  // Responsibilities are kept for the backward pass.
  detail::MatRM<Scalar> resp(rows, n);
  Scalar total = 0;
  constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();
  for (Index i = 0; i < rows; ++i) {
    const Scalar y = target.value()(i);
    Scalar peak = kNegInf;
    for (Index k = 0; k < n; ++k) {
      const Scalar d = y - mu(i, k);
      const Scalar log_comp = w(i, k) > Scalar(0)
                                  ? std::log(w(i, k)) - half_log_2pi - Scalar(0.5) * lv(i, k) -
                                        Scalar(0.5) * d * d * std::exp(-lv(i, k))
                                  : kNegInf;
      resp(i, k) = log_comp;
      peak = std::max(peak, log_comp);
    }
    Scalar acc = 0;
    for (Index k = 0; k < n; ++k) {
      resp(i, k) = resp(i, k) == kNegInf ? Scalar(0) : std::exp(resp(i, k) - peak);
      acc += resp(i, k);
    }
    resp.row(i) /= acc;
    total -= peak + std::log(acc);
  }
  const bool grad = tape.needs_grad({&weights, &means, &logvars, &target});
  Tensor<Scalar> out = Tensor<Scalar>::scalar(total, grad);
  if (grad) {
    tape.record("gmm_nll", {weights, means, logvars, target}, out,
                [weights, means, logvars, target, out, resp = std::move(resp), rows, n]() mutable {
                  const Scalar g = out.grad()(0);
                  detail::ConstMapRM<Scalar> w(weights.data(), rows, n);
                  detail::ConstMapRM<Scalar> mu(means.data(), rows, n);
                  detail::ConstMapRM<Scalar> lv(logvars.data(), rows, n);
                  for (Index i = 0; i < rows; ++i) {
                    const Scalar y = target.value()(i);
                    Scalar dy = 0;
                    for (Index k = 0; k < n; ++k) {
                      const Scalar r = resp(i, k);
                      const Scalar inv_var = std::exp(-lv(i, k));
                      const Scalar d = y - mu(i, k);
                      const Index at = i * n + k;
                      if (weights.requires_grad() && w(i, k) > Scalar(0)) {
                        weights.grad()(at) -= g * r / w(i, k);
                      }
                      if (means.requires_grad()) means.grad()(at) -= g * r * d * inv_var;
                      if (logvars.requires_grad()) {
                        logvars.grad()(at) -= g * r * (Scalar(0.5) * d * d * inv_var - Scalar(0.5));
                      }
                      dy += r * d * inv_var;
                    }
                    if (target.requires_grad()) target.grad()(i) += g * dy;
                  }
                });
  }
  return out;
}

}  // namespace drsm

#endif  // DRSM_OPS_HPP

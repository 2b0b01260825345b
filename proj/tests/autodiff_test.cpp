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

#include "drsm/ops.hpp"
#include "drsm/tensor.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace drsm {
namespace {

using testing::check_gradients;
using testing::random_tensor;
using testing::TapeD;
using testing::TensorD;

constexpr double kOpTol = 1e-4;
constexpr int kTrials = 20;

// Direct-loop convolution used as an independent oracle.
TensorD naive_conv(const TensorD& x, const TensorD& k, const TensorD& b, Index s, Index p) {
  const Index h = x.dim(0), w = x.dim(1), cin = x.dim(2), kk = k.dim(0), cout = k.dim(3);
  const Index oh = (h + 2 * p - kk) / s + 1, ow = (w + 2 * p - kk) / s + 1;
  TensorD y({oh, ow, cout});
  for (Index i = 0; i < oh; ++i)
    for (Index j = 0; j < ow; ++j)
      for (Index o = 0; o < cout; ++o) {
        double acc = b.value()(o);
        for (Index a = 0; a < kk; ++a)
          for (Index c = 0; c < kk; ++c) {
            const Index yi = i * s - p + a, xj = j * s - p + c;
            if (yi < 0 || xj < 0 || yi >= h || xj >= w) continue;
            for (Index q = 0; q < cin; ++q) {
              acc += x.value()((yi * w + xj) * cin + q) * k.value()(((a * kk + c) * cin + q) * cout + o);
            }
          }
        y.value()((i * ow + j) * cout + o) = acc;
      }
  return y;
}

TEST(Tensor, RejectsNonPositiveExtents) {
  EXPECT_THROW(Tensor<float>({2, 0}), ShapeError);
  EXPECT_THROW(Tensor<float>({2, 2}, {1.f, 2.f, 3.f}), ShapeError);
}

TEST(Tensor, GradPresentIffRequired) {
  Tensor<float> t({2, 3});
  EXPECT_EQ(t.grad().size(), 0);
  t.set_requires_grad(true);
  EXPECT_EQ(t.grad().size(), 6);
}

TEST(Tensor, CopiesShareStorageCloneDoesNot) {
  Tensor<float> a({2}, {1.f, 2.f});
  Tensor<float> b = a;
  Tensor<float> c = a.clone();
  a.value()(0) = 5.f;
  EXPECT_EQ(b.value()(0), 5.f);
  EXPECT_EQ(c.value()(0), 1.f);
}

TEST(Conv2d, OnesKernelOnOnesInput) {
  Tape<float> tape;
  auto x = Tensor<float>::filled({3, 3, 1}, 1.f);
  auto k = Tensor<float>::filled({2, 2, 1, 1}, 1.f);
  auto y = conv2d(tape, x, k, Tensor<float>({1}), 1, 0);
  ASSERT_EQ(y.dims(), (Shape{2, 2, 1}));
  for (Index i = 0; i < 4; ++i) EXPECT_FLOAT_EQ(y.value()(i), 4.f);
}

TEST(Conv2d, IdentityKernel) {
  Rng rng(3);
  Tape<double> tape;
  auto x = random_tensor(rng, {5, 4, 1}, -2, 2, false);
  auto k = TensorD::filled({1, 1, 1, 1}, 1.0);
  auto y = conv2d(tape, x, k, TensorD({1}), 1, 0);
  EXPECT_TRUE(y.value().isApprox(x.value()));
}

TEST(Conv2d, MatchesDirectLoops) {
  Rng rng(5);
  for (int t = 0; t < kTrials; ++t) {
    const Index k = 1 + static_cast<Index>(rng.uniform_int(0, 3));
    const Index s = 1 + static_cast<Index>(rng.uniform_int(0, 2));
    const Index p = static_cast<Index>(rng.uniform_int(0, static_cast<int>(k) - 1));
    const Index h = k + static_cast<Index>(rng.uniform_int(0, 3)), w = k + static_cast<Index>(rng.uniform_int(0, 3));
    const Index cin = 1 + rng.uniform_int(0, 2), cout = 1 + rng.uniform_int(0, 2);
    auto x = random_tensor(rng, {h, w, cin}, -1, 1, false);
    auto kern = random_tensor(rng, {k, k, cin, cout}, -1, 1, false);
    auto b = random_tensor(rng, {cout}, -1, 1, false);
    TapeD tape;
    auto y = conv2d(tape, x, kern, b, s, p);
    auto ref = naive_conv(x, kern, b, s, p);
    ASSERT_EQ(y.dims(), ref.dims());
    EXPECT_LT((y.value() - ref.value()).abs().maxCoeff(), 1e-12);
  }
}

TEST(Conv2d, BatchedEqualsPerImage) {
  Rng rng(8);
  auto x = random_tensor(rng, {3, 6, 5, 2}, -1, 1, false);
  auto k = random_tensor(rng, {2, 2, 2, 3}, -1, 1, false);
  auto b = random_tensor(rng, {3}, -1, 1, false);
  TapeD tape;
  auto y = conv2d(tape, x, k, b, 2, 1);
  const Index per_in = 6 * 5 * 2;
  const Index per_out = y.size() / 3;
  for (Index n = 0; n < 3; ++n) {
    TensorD xi({6, 5, 2}, x.value().segment(n * per_in, per_in).eval());
    auto yi = naive_conv(xi, k, b, 2, 1);
    EXPECT_LT((y.value().segment(n * per_out, per_out) - yi.value()).abs().maxCoeff(), 1e-12);
  }
}

TEST(Conv2d, ShapeErrorsNameTheDimension) {
  Tape<float> tape;
  Tensor<float> x({4, 4, 2});
  try {
    conv2d(tape, x, Tensor<float>({2, 2, 3, 1}), Tensor<float>({1}), 1, 0);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("channels"), std::string::npos) << e.what();
  }
  try {
    conv2d(tape, x, Tensor<float>({2, 2, 2, 4}), Tensor<float>({3}), 1, 0);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("bias"), std::string::npos) << e.what();
  }
  try {
    conv2d(tape, Tensor<float>({1, 1, 2}), Tensor<float>({3, 3, 2, 1}), Tensor<float>({1}), 1, 0);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("height"), std::string::npos) << e.what();
  }
  EXPECT_THROW(conv2d(tape, x, Tensor<float>({2, 2, 2, 1}), Tensor<float>({1}), 0, 0), ShapeError);
}

TEST(ConvTranspose2d, SinglePixelExpandsToKernel) {
  Tape<float> tape;
  Tensor<float> x({1, 1, 1}, {3.f});
  Tensor<float> k({2, 2, 1, 1}, {1.f, 2.f, 3.f, 4.f});
  auto y = conv_transpose2d(tape, x, k, Tensor<float>({1}), 2, 0);
  ASSERT_EQ(y.dims(), (Shape{2, 2, 1}));
  EXPECT_FLOAT_EQ(y.value()(0), 3.f);
  EXPECT_FLOAT_EQ(y.value()(1), 6.f);
  EXPECT_FLOAT_EQ(y.value()(2), 9.f);
  EXPECT_FLOAT_EQ(y.value()(3), 12.f);
}

TEST(ConvTranspose2d, OutputExtent) {
  Tape<float> tape;
  auto y = conv_transpose2d(tape, Tensor<float>({2, 3, 1}), Tensor<float>({2, 2, 1, 1}), Tensor<float>({1}), 2, 0);
  EXPECT_EQ(y.dims(), (Shape{4, 6, 1}));
  auto z = conv_transpose2d(tape, Tensor<float>({8, 8, 4}), Tensor<float>({4, 4, 2, 4}), Tensor<float>({2}), 2, 1);
  EXPECT_EQ(z.dims(), (Shape{16, 16, 2}));
}

// <conv(x), y> == <x, conv^T(y)> with the same kernel tensor.
TEST(ConvTranspose2d, IsAdjointOfConv2d) {
  Rng rng(13);
  for (int t = 0; t < 50; ++t) {
    const Index k = 1 + rng.uniform_int(0, 3);
    const Index s = 1 + rng.uniform_int(0, 2);
    const Index p = rng.uniform_int(0, static_cast<int>(k) - 1);
    const Index cin = 1 + rng.uniform_int(0, 2), cout = 1 + rng.uniform_int(0, 2);
    // Pick H so the forward conv tiles it exactly; otherwise the transpose
    // cannot reproduce the input extent.
    const Index oh = 1 + rng.uniform_int(0, 3), ow = 1 + rng.uniform_int(0, 3);
    const Index h = (oh - 1) * s - 2 * p + k, w = (ow - 1) * s - 2 * p + k;
    if (h < 1 || w < 1) continue;
    auto x = random_tensor(rng, {h, w, cin}, -1, 1, false);
    auto y = random_tensor(rng, {oh, ow, cout}, -1, 1, false);
    auto kern = random_tensor(rng, {k, k, cin, cout}, -1, 1, false);
    TapeD tape;
    auto cx = conv2d(tape, x, kern, TensorD({cout}), s, p);
    auto cty = conv_transpose2d(tape, y, kern, TensorD({cin}), s, p);
    ASSERT_EQ(cx.dims(), y.dims());
    ASSERT_EQ(cty.dims(), x.dims());
    const double lhs = (cx.value() * y.value()).sum();
    const double rhs = (x.value() * cty.value()).sum();
    EXPECT_NEAR(lhs, rhs, 1e-4 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(Dense, HandMultiply) {
  Tape<float> tape;
  Tensor<float> w({2, 2}, {1.f, 2.f, 3.f, 4.f});
  auto y = dense(tape, Tensor<float>({2}, {1.f, 1.f}), w, Tensor<float>({2}));
  EXPECT_FLOAT_EQ(y.value()(0), 3.f);
  EXPECT_FLOAT_EQ(y.value()(1), 7.f);
}

TEST(Dense, IdentityAndShapeErrors) {
  Tape<float> tape;
  Tensor<float> eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor<float> x({3}, {0.5f, -2.f, 7.f});
  EXPECT_TRUE(dense(tape, x, eye, Tensor<float>({3})).value().isApprox(x.value()));
  EXPECT_THROW(dense(tape, Tensor<float>({4}), eye, Tensor<float>({3})), ShapeError);
  EXPECT_THROW(dense(tape, x, eye, Tensor<float>({2})), ShapeError);
}

TEST(Elementwise, ForwardValues) {
  Tape<float> tape;
  auto r = relu(tape, Tensor<float>({3}, {-1.f, 0.f, 2.f}));
  EXPECT_EQ(r.value()(0), 0.f);
  EXPECT_EQ(r.value()(1), 0.f);
  EXPECT_EQ(r.value()(2), 2.f);
  EXPECT_FLOAT_EQ(sigmoid(tape, Tensor<float>::scalar(0.f)).item(), 0.5f);
  Tensor<float> pos({4}, {1e-3f, 0.5f, 3.f, 40.f});
  auto back = exp(tape, log(tape, pos));
  for (Index i = 0; i < 4; ++i) EXPECT_NEAR(back.value()(i) / pos.value()(i), 1.f, 1e-6f);
}

TEST(Elementwise, SigmoidSaturatesWithoutOverflow) {
  Tape<float> tape;
  auto y = sigmoid(tape, Tensor<float>({2}, {-200.f, 200.f}));
  EXPECT_TRUE(y.value().allFinite());
  EXPECT_EQ(y.value()(0), 0.f);
  EXPECT_EQ(y.value()(1), 1.f);
}

TEST(Elementwise, LogOfNonPositiveIsFlagged) {
  Tape<float> tape;
  EXPECT_THROW(log(tape, Tensor<float>({2}, {1.f, 0.f})), NumericError);
  EXPECT_THROW(log(tape, Tensor<float>({1}, {-3.f})), NumericError);
}

TEST(Elementwise, BinaryOpsRequireEqualShapes) {
  Tape<float> tape;
  EXPECT_THROW(add(tape, Tensor<float>({2}), Tensor<float>({3})), ShapeError);
  EXPECT_THROW(mul(tape, Tensor<float>({2, 1}), Tensor<float>({2})), ShapeError);
}

TEST(Backward, SumGivesOnes) {
  Tape<float> tape;
  Tensor<float> x({2, 3}, true);
  backward(sum(tape, x), tape);
  EXPECT_TRUE((x.grad() == 1.f).all());
}

TEST(Backward, SumOfSquares) {
  Tape<float> tape;
  Tensor<float> x({2}, {1.f, 2.f}, true);
  backward(sum(tape, square(tape, x)), tape);
  EXPECT_FLOAT_EQ(x.grad()(0), 2.f);
  EXPECT_FLOAT_EQ(x.grad()(1), 4.f);
}

TEST(Backward, SigmoidSlopeAtZero) {
  Tape<double> tape;
  auto x = TensorD::scalar(0.0, true);
  backward(sigmoid(tape, x), tape);
  EXPECT_NEAR(x.grad()(0), 0.25, 1e-12);
  Rng rng(1);
  auto r = check_gradients([&](TapeD& t) { return sigmoid(t, x); }, {x}, rng);
  EXPECT_LT(r.max_rel_error, kOpTol);
}

TEST(Backward, RejectsBadLosses) {
  Tape<float> tape;
  Tensor<float> x({3}, true);
  EXPECT_THROW(backward(scale(tape, x, 2.f), tape), ShapeError);
  Tensor<float> c = Tensor<float>::scalar(1.f);
  EXPECT_THROW(backward(c, tape), ShapeError);
  Tape<float> other;
  auto l = sum(other, x);
  EXPECT_THROW(backward(l, tape), ShapeError);
}

TEST(Backward, ResetVersusAccumulate) {
  Tape<float> tape;
  Tensor<float> x({2}, {1.f, -1.f}, true);
  auto l = sum(tape, scale(tape, x, 3.f));
  backward(l, tape);
  backward(l, tape);
  EXPECT_FLOAT_EQ(x.grad()(0), 3.f);
  backward(l, tape, GradMode::kAccumulate);
  EXPECT_FLOAT_EQ(x.grad()(0), 6.f);
}

TEST(Backward, SharedSubexpressionSumsPaths) {
  Rng rng(21);
  for (int t = 0; t < kTrials; ++t) {
    auto x = random_tensor(rng, {4}, -1, 1);
    auto f = [&](TapeD& tape) {
      auto s = sigmoid(tape, x);
      return sum(tape, mul(tape, s, add(tape, s, x)));
    };
    EXPECT_LT(check_gradients(f, {x}, rng).max_rel_error, kOpTol);
  }
}

TEST(Backward, FirstNonFiniteNamesTheOp) {
  Tape<float> tape;
  Tensor<float> x({2}, {1.f, 50.f}, true);
  auto e = exp(tape, x);
  auto big = exp(tape, e);
  (void)big;
  EXPECT_NE(tape.first_non_finite().find("exp"), std::string::npos);
  EXPECT_NE(tape.first_non_finite().find("#1"), std::string::npos);
}

// ---- finite-difference checks, one suite per op --------------------------

Index extent(Rng& rng) { return 1 + rng.uniform_int(0, 5); }

TEST(GradCheck, Conv2d) {
  Rng rng(100);
  for (int t = 0; t < kTrials; ++t) {
    const Index k = 1 + rng.uniform_int(0, 2), s = 1 + rng.uniform_int(0, 1), p = rng.uniform_int(0, static_cast<int>(k) - 1);
    const Index h = k + rng.uniform_int(0, 3), w = k + rng.uniform_int(0, 3);
    const Index cin = 1 + rng.uniform_int(0, 2), cout = 1 + rng.uniform_int(0, 2);
    auto x = random_tensor(rng, {h, w, cin}, -1, 1);
    auto kern = random_tensor(rng, {k, k, cin, cout}, -1, 1);
    auto b = random_tensor(rng, {cout}, -1, 1);
    auto probe = random_tensor(rng, {(h + 2 * p - k) / s + 1, (w + 2 * p - k) / s + 1, cout}, -1, 1, false);
    auto f = [&](TapeD& tape) { return sum(tape, mul(tape, conv2d(tape, x, kern, b, s, p), probe)); };
    EXPECT_LT(check_gradients(f, {x, kern, b}, rng).max_rel_error, kOpTol) << "trial " << t;
  }
}

TEST(GradCheck, Conv2dFourByFourTwoChannels) {
  Rng rng(101);
  for (int t = 0; t < kTrials; ++t) {
    auto x = random_tensor(rng, {4, 4, 2}, -1, 1);
    auto kern = random_tensor(rng, {3, 3, 2, 2}, -1, 1, false);
    auto f = [&](TapeD& tape) { return sum(tape, square(tape, conv2d(tape, x, kern, TensorD({2}), 1, 1))); };
    EXPECT_LT(check_gradients(f, {x}, rng).max_rel_error, kOpTol);
  }
}

TEST(GradCheck, ConvTranspose2d) {
  Rng rng(102);
  for (int t = 0; t < kTrials; ++t) {
    const Index k = 1 + rng.uniform_int(0, 3), s = 1 + rng.uniform_int(0, 1), p = rng.uniform_int(0, static_cast<int>(k) - 1);
    const Index h = 1 + rng.uniform_int(0, 3), w = 1 + rng.uniform_int(0, 3);
    const Index oh = (h - 1) * s - 2 * p + k, ow = (w - 1) * s - 2 * p + k;
    if (oh < 1 || ow < 1) {
      --t;
      continue;
    }
    const Index cin = 1 + rng.uniform_int(0, 2), cout = 1 + rng.uniform_int(0, 2);
    auto x = random_tensor(rng, {2, h, w, cin}, -1, 1);
    auto kern = random_tensor(rng, {k, k, cout, cin}, -1, 1);
    auto b = random_tensor(rng, {cout}, -1, 1);
    auto probe = random_tensor(rng, {2, oh, ow, cout}, -1, 1, false);
    auto f = [&](TapeD& tape) { return sum(tape, mul(tape, conv_transpose2d(tape, x, kern, b, s, p), probe)); };
    EXPECT_LT(check_gradients(f, {x, kern, b}, rng).max_rel_error, kOpTol) << "trial " << t;
  }
}

TEST(GradCheck, Dense) {
  Rng rng(103);
  for (int t = 0; t < kTrials; ++t) {
    const Index n = extent(rng), m = extent(rng);
    const bool batched = t % 2 == 1;
    auto x = batched ? random_tensor(rng, {extent(rng), n}, -1, 1) : random_tensor(rng, {n}, -1, 1);
    auto w = random_tensor(rng, {m, n}, -1, 1);
    auto b = random_tensor(rng, {m}, -1, 1);
    auto f = [&](TapeD& tape) { return sum(tape, square(tape, dense(tape, x, w, b))); };
    EXPECT_LT(check_gradients(f, {x, w, b}, rng).max_rel_error, kOpTol);
  }
}

TEST(GradCheck, DenseThreeByFive) {
  Rng rng(104);
  for (int t = 0; t < kTrials; ++t) {
    auto x = random_tensor(rng, {5}, -1, 1);
    auto w = random_tensor(rng, {3, 5}, -1, 1);
    auto b = random_tensor(rng, {3}, -1, 1);
    auto probe = random_tensor(rng, {3}, -1, 1, false);
    auto f = [&](TapeD& tape) { return sum(tape, mul(tape, dense(tape, x, w, b), probe)); };
    EXPECT_LT(check_gradients(f, {x, w, b}, rng).max_rel_error, kOpTol);
  }
}

// Unary ops under a random linear probe so every output coordinate matters.
template <typename Op>
void check_unary(std::uint64_t seed, double lo, double hi, std::vector<double> kinks, Op op) {
  Rng rng(seed);
  for (int t = 0; t < kTrials; ++t) {
    Shape dims{extent(rng), extent(rng)};
    auto x = random_tensor(rng, dims, lo, hi, true, kinks, 0.01);
    auto probe = random_tensor(rng, dims, -1, 1, false);
    auto f = [&](TapeD& tape) { return sum(tape, mul(tape, op(tape, x), probe)); };
    EXPECT_LT(check_gradients(f, {x}, rng).max_rel_error, kOpTol) << "trial " << t;
  }
}

TEST(GradCheck, Relu) { check_unary(110, -2, 2, {0.0}, [](TapeD& t, const TensorD& x) { return relu(t, x); }); }
TEST(GradCheck, Sigmoid) { check_unary(111, -6, 6, {}, [](TapeD& t, const TensorD& x) { return sigmoid(t, x); }); }
TEST(GradCheck, Exp) { check_unary(112, -3, 3, {}, [](TapeD& t, const TensorD& x) { return exp(t, x); }); }
TEST(GradCheck, Log) { check_unary(113, 0.2, 5, {}, [](TapeD& t, const TensorD& x) { return log(t, x); }); }
TEST(GradCheck, Square) { check_unary(114, -3, 3, {}, [](TapeD& t, const TensorD& x) { return square(t, x); }); }
TEST(GradCheck, Scale) { check_unary(115, -3, 3, {}, [](TapeD& t, const TensorD& x) { return scale(t, x, -1.7); }); }
TEST(GradCheck, AddScalar) {
  check_unary(116, -3, 3, {}, [](TapeD& t, const TensorD& x) { return add_scalar(t, x, 0.3); });
}
TEST(GradCheck, Clamp) {
  check_unary(117, -2, 2, {-0.5, 0.5}, [](TapeD& t, const TensorD& x) { return clamp(t, x, -0.5, 0.5); });
}
TEST(GradCheck, Mean) {
  check_unary(118, -3, 3, {}, [](TapeD& t, const TensorD& x) { return scale(t, x, 1.0); });
  Rng rng(119);
  for (int t = 0; t < kTrials; ++t) {
    auto x = random_tensor(rng, {extent(rng), extent(rng)}, -1, 1);
    auto f = [&](TapeD& tape) { return square(tape, mean(tape, x)); };
    EXPECT_LT(check_gradients(f, {x}, rng).max_rel_error, kOpTol);
  }
}

template <typename Op>
void check_binary(std::uint64_t seed, Op op) {
  Rng rng(seed);
  for (int t = 0; t < kTrials; ++t) {
    Shape dims{extent(rng), extent(rng), extent(rng)};
    auto a = random_tensor(rng, dims, -2, 2);
    auto b = random_tensor(rng, dims, -2, 2);
    auto probe = random_tensor(rng, dims, -1, 1, false);
    auto f = [&](TapeD& tape) { return sum(tape, mul(tape, op(tape, a, b), probe)); };
    EXPECT_LT(check_gradients(f, {a, b}, rng).max_rel_error, kOpTol) << "trial " << t;
  }
}

TEST(GradCheck, Add) { check_binary(120, [](TapeD& t, const TensorD& a, const TensorD& b) { return add(t, a, b); }); }
TEST(GradCheck, Sub) { check_binary(121, [](TapeD& t, const TensorD& a, const TensorD& b) { return sub(t, a, b); }); }
TEST(GradCheck, Mul) { check_binary(122, [](TapeD& t, const TensorD& a, const TensorD& b) { return mul(t, a, b); }); }

TEST(GradCheck, ScaleBy) {
  Rng rng(123);
  for (int t = 0; t < kTrials; ++t) {
    auto x = random_tensor(rng, {extent(rng), extent(rng)}, -2, 2);
    auto c = random_tensor(rng, {}, -2, 2);
    auto probe = random_tensor(rng, x.dims(), -1, 1, false);
    auto f = [&](TapeD& tape) { return sum(tape, mul(tape, scale_by(tape, x, c), probe)); };
    EXPECT_LT(check_gradients(f, {x, c}, rng).max_rel_error, kOpTol);
  }
}

TEST(GradCheck, ReshapeConcatSlice) {
  Rng rng(124);
  for (int t = 0; t < kTrials; ++t) {
    const Index rows = extent(rng), na = extent(rng), nb = extent(rng);
    auto a = random_tensor(rng, {rows, na}, -2, 2);
    auto b = random_tensor(rng, {rows, nb}, -2, 2);
    const Index begin = rng.uniform_int(0, static_cast<int>(na + nb - 1));
    const Index count = 1 + rng.uniform_int(0, static_cast<int>(na + nb - begin - 1));
    auto probe = random_tensor(rng, {rows * count}, -1, 1, false);
    auto f = [&](TapeD& tape) {
      auto c = slice_last(tape, concat(tape, a, b), begin, count);
      return sum(tape, mul(tape, reshape(tape, c, {rows * count}), probe));
    };
    EXPECT_LT(check_gradients(f, {a, b}, rng).max_rel_error, kOpTol);
  }
}

TEST(GradCheck, GaussianNll) {
  Rng rng(125);
  for (int t = 0; t < kTrials; ++t) {
    Shape dims{extent(rng), extent(rng)};
    auto mu = random_tensor(rng, dims, -1, 1);
    auto lv = random_tensor(rng, dims, -2, 1);
    auto y = random_tensor(rng, dims, -1, 1);
    auto f = [&](TapeD& tape) { return gaussian_nll(tape, mu, lv, y); };
    EXPECT_LT(check_gradients(f, {mu, lv, y}, rng).max_rel_error, kOpTol);
  }
}

TEST(GaussianNll, MatchesFormula) {
  TapeD tape;
  TensorD mu({1}, {0.3}), lv({1}, {-0.7}), y({1}, {1.1});
  const double var = std::exp(-0.7);
  const double expect = 0.5 * std::log(2 * M_PI * var) + (1.1 - 0.3) * (1.1 - 0.3) / (2 * var);
  EXPECT_NEAR(gaussian_nll(tape, mu, lv, y).item(), expect, 1e-12);
}

TEST(GradCheck, SquareNormalize) {
  Rng rng(126);
  for (int t = 0; t < kTrials; ++t) {
    auto r = random_tensor(rng, {extent(rng), 1 + extent(rng)}, -2, 2);
    auto probe = random_tensor(rng, r.dims(), -1, 1, false);
    auto f = [&](TapeD& tape) { return sum(tape, mul(tape, square_normalize(tape, r), probe)); };
    EXPECT_LT(check_gradients(f, {r}, rng).max_rel_error, kOpTol);
  }
}

TEST(SquareNormalize, WeightsSumToOneIncludingFallback) {
  Rng rng(127);
  Tape<float> tape;
  for (int t = 0; t < 200; ++t) {
    const Index n = 1 + rng.uniform_int(0, 5);
    Tensor<float> r({4, n});
    for (Index i = 0; i < r.size(); ++i) {
      // Mix ordinary, tiny, huge and exactly zero rows.
      const int kind = rng.uniform_int(0, 3);
      r.value()(i) = kind == 0 ? 0.f : kind == 1 ? static_cast<float>(rng.normal() * 1e-8)
                                     : kind == 2 ? static_cast<float>(rng.normal() * 1e6)
                                                 : static_cast<float>(rng.normal());
    }
    auto w = square_normalize(tape, r);
    for (Index i = 0; i < 4; ++i) {
      EXPECT_NEAR(w.value().segment(i * n, n).sum(), 1.f, 1e-5f);
      EXPECT_TRUE((w.value().segment(i * n, n) >= 0.f).all());
    }
  }
  auto zero = square_normalize(tape, Tensor<float>({2, 4}));
  EXPECT_TRUE((zero.value() == 0.25f).all());
}

TEST(GradCheck, GmmNll) {
  Rng rng(128);
  for (int t = 0; t < kTrials; ++t) {
    const Index cells = extent(rng), n = 1 + extent(rng) % 4;
    auto raw = random_tensor(rng, {cells, n}, 0.2, 1.5);
    auto mu = random_tensor(rng, {cells, n}, -1, 1);
    auto lv = random_tensor(rng, {cells, n}, -2, 0.5);
    auto y = random_tensor(rng, {cells, 1}, -1, 1);
    // Weights enter through square_normalize, as in the model.
    auto f = [&](TapeD& tape) { return gmm_nll(tape, square_normalize(tape, raw), mu, lv, y); };
    EXPECT_LT(check_gradients(f, {raw, mu, lv, y}, rng).max_rel_error, kOpTol);
  }
}

TEST(GmmNll, MatchesDirectMixtureDensity) {
  Rng rng(129);
  for (int t = 0; t < kTrials; ++t) {
    const Index n = 1 + rng.uniform_int(0, 3);
    TapeD quiet(false);
    auto w = square_normalize(quiet, random_tensor(rng, {1, n}, 0.1, 1, false));
    auto mu = random_tensor(rng, {1, n}, -1, 1, false);
    auto lv = random_tensor(rng, {1, n}, -2, 1, false);
    auto y = random_tensor(rng, {1, 1}, -1, 1, false);
    double density = 0.0;
    for (Index k = 0; k < n; ++k) {
      const double var = std::exp(lv.value()(k));
      const double d = y.value()(0) - mu.value()(k);
      density += w.value()(k) * std::exp(-d * d / (2 * var)) / std::sqrt(2 * M_PI * var);
    }
    TapeD tape;
    EXPECT_NEAR(gmm_nll(tape, w, mu, lv, y).item(), -std::log(density), 1e-10);
  }
}

TEST(GmmNll, FarTargetStaysFinite) {
  TapeD tape;
  TensorD w({1, 2}, {0.5, 0.5}, true), mu({1, 2}, {0.0, 1.0}, true), lv({1, 2}, {-8.0, -8.0}, true);
  TensorD y({1, 1}, {50.0});
  auto l = gmm_nll(tape, w, mu, lv, y);
  backward(l, tape);
  EXPECT_TRUE(std::isfinite(l.item()));
  EXPECT_TRUE(mu.grad().allFinite());
}

// Finite outputs for finite inputs across the op set.
TEST(Elementwise, FiniteInFiniteOut) {
  Rng rng(130);
  Tape<float> tape;
  for (int t = 0; t < 100; ++t) {
    Tensor<float> x({16});
    for (Index i = 0; i < 16; ++i) x.value()(i) = static_cast<float>(rng.normal(0, 30));
    EXPECT_TRUE(sigmoid(tape, x).value().allFinite());
    EXPECT_TRUE(relu(tape, x).value().allFinite());
    EXPECT_TRUE(clamp(tape, x, -1.f, 1.f).value().allFinite());
    EXPECT_TRUE(square_normalize(tape, x).value().allFinite());
  }
}

}  // namespace
}  // namespace drsm

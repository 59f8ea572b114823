// Copyright 2026 The meter-rt Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <numeric>
#include <vector>

#include "meter/check/oracles.hpp"
#include "meter/kernels.hpp"
#include "meter/random.hpp"

namespace meter {
namespace {

std::vector<float> random_vec(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return v;
}

TEST(Conv2dTest, SumOfOnes) {
  Tensor x(1, 1, 3, 3, 1.0f);
  Tensor w(1, 1, 3, 3, 1.0f);
  Tensor y = conv2d(x, w, {}, 1, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_FLOAT_EQ(y.at(0, 0, 0, 0), 9.0f);
}

TEST(Conv2dTest, UnitKernelIsIdentity) {
  Rng rng(1);
  Tensor x = random_tensor({1, 1, 5, 4}, rng);
  Tensor w(1, 1, 1, 1, 1.0f);
  std::vector<float> bias{0.0f};
  EXPECT_EQ(conv2d(x, w, bias, 1, 0), x);
}

TEST(Conv2dTest, StridedPaddedMatchesDirectLoops) {
  Rng rng(7);
  Tensor x = random_tensor({1, 2, 5, 5}, rng);
  Tensor w = random_tensor({3, 2, 3, 3}, rng);
  auto b = random_vec(3, rng);
  Tensor got = conv2d(x, w, b, 2, 1);
  Tensor want = oracle::conv2d(x, w, b, 2, 1);
  ASSERT_EQ(got.shape(), (Shape{1, 3, 3, 3}));
  EXPECT_LE(oracle::max_abs_diff(got.data(), want.data()), 1e-6);
}

TEST(Conv2dTest, RandomShapesMatchOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t k = 1 + 2 * rng.below(2);
    const std::size_t stride = 1 + rng.below(2);
    const std::size_t pad = rng.below(k / 2 + 1);
    const Shape xs{1 + rng.below(2), 1 + rng.below(4), k + rng.below(6), k + rng.below(6)};
    Tensor x = random_tensor(xs, rng);
    Tensor w = random_tensor({1 + rng.below(4), xs.c, k, k}, rng);
    auto b = random_vec(w.shape().n, rng);
    Tensor got = conv2d(x, w, b, stride, pad);
    Tensor want = oracle::conv2d(x, w, b, stride, pad);
    ASSERT_EQ(got.shape(), want.shape());
    EXPECT_LE(oracle::max_abs_diff(got.data(), want.data()), 1e-6) << "trial " << trial;
  }
}

TEST(Conv2dTest, OddKernelSamePaddingPreservesExtent) {
  Rng rng(3);
  Tensor x = random_tensor({1, 2, 7, 6}, rng);
  for (std::size_t k : {1u, 3u, 5u}) {
    Tensor w = random_tensor({2, 2, k, k}, rng);
    EXPECT_EQ(conv2d(x, w, {}, 1, (k - 1) / 2).shape(), x.shape());
  }
}

TEST(Conv2dTest, ChannelMismatchNamesBothShapes) {
  Tensor x(1, 3, 4, 4);
  Tensor w(2, 2, 3, 3);
  try {
    conv2d(x, w, {}, 1, 1);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(x.shape().str()), std::string::npos);
    EXPECT_NE(msg.find(w.shape().str()), std::string::npos);
  }
}

TEST(Conv2dTest, ThreadCountDoesNotChangeResult) {
  Rng rng(5);
  Tensor x = random_tensor({1, 4, 9, 9}, rng);
  Tensor w = random_tensor({6, 4, 3, 3}, rng);
  Tensor one = conv2d(x, w, {}, 1, 1);
  set_num_threads(3);
  Tensor three = conv2d(x, w, {}, 1, 1);
  set_num_threads(1);
  EXPECT_EQ(one, three);
}

TEST(DepthwiseTest, ZeroChannelGivesBias) {
  Rng rng(2);
  Tensor x = random_tensor({1, 2, 4, 4}, rng);
  for (float& v : x.channel(0, 0)) v = 0.0f;
  Tensor w = random_tensor({2, 1, 3, 3}, rng);
  std::vector<float> b{0.25f, -0.5f};
  Tensor y = depthwise_conv2d(x, w, b, 1, 1);
  for (float v : y.channel(0, 0)) EXPECT_FLOAT_EQ(v, 0.25f);
}

TEST(DepthwiseTest, UnitKernelIsIdentity) {
  Rng rng(4);
  Tensor x = random_tensor({1, 3, 4, 5}, rng);
  Tensor w(3, 1, 1, 1, 1.0f);
  EXPECT_EQ(depthwise_conv2d(x, w, {}, 1, 0), x);
}

TEST(DepthwiseTest, MatchesPerChannelConvolution) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t stride = 1 + rng.below(2);
    Tensor x = random_tensor({1, 4, 6, 6}, rng);
    Tensor w = random_tensor({4, 1, 3, 3}, rng);
    auto b = random_vec(4, rng);
    Tensor got = depthwise_conv2d(x, w, b, stride, 1);
    Tensor want = oracle::depthwise_conv2d(x, w, b, stride, 1);
    ASSERT_EQ(got.shape(), want.shape());
    EXPECT_LE(oracle::max_abs_diff(got.data(), want.data()), 1e-6);
  }
}

TEST(DepthwiseTest, ChannelMismatchThrows) {
  EXPECT_THROW(depthwise_conv2d(Tensor(1, 3, 4, 4), Tensor(2, 1, 3, 3), {}, 1, 1), DimensionError);
}

TEST(PointwiseTest, IdentityMatrix) {
  Rng rng(6);
  Tensor x = random_tensor({2, 3, 2, 3}, rng);
  Tensor w(3, 3, 1, 1);
  for (std::size_t i = 0; i < 3; ++i) w.at(i, i, 0, 0) = 1.0f;
  EXPECT_EQ(pointwise_conv2d(x, w, {}), x);
}

TEST(PointwiseTest, DotProductOfOnes) {
  Tensor x(1, 3, 2, 2, 1.0f);
  Tensor w({1, 3, 1, 1}, std::vector<float>{1.0f, 2.0f, 3.0f});
  Tensor y = pointwise_conv2d(x, w, {});
  for (float v : y.data()) EXPECT_FLOAT_EQ(v, 6.0f);
}

TEST(PointwiseTest, EqualsGeneralConvolution) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x = random_tensor({1, 1 + rng.below(6), 1 + rng.below(6), 1 + rng.below(6)}, rng);
    Tensor w = random_tensor({1 + rng.below(6), x.shape().c, 1, 1}, rng);
    auto b = random_vec(w.shape().n, rng);
    EXPECT_EQ(pointwise_conv2d(x, w, b), conv2d(x, w, b, 1, 0));
  }
}

TEST(TransposedConvTest, SinglePixelExpansion) {
  Tensor x(1, 1, 1, 1, 2.0f);
  Tensor w({1, 1, 2, 2}, std::vector<float>{1.0f, -1.0f, 0.5f, 3.0f});
  Tensor y = transposed_conv2d(x, w, {});
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_EQ(y.values(), (std::vector<float>{2.0f, -2.0f, 1.0f, 6.0f}));
}

TEST(TransposedConvTest, ZeroInputGivesBias) {
  Rng rng(1);
  Tensor w = random_tensor({3, 2, 2, 2}, rng);
  std::vector<float> b{0.5f, -1.0f};
  Tensor y = transposed_conv2d(Tensor(1, 3, 2, 3), w, b);
  for (float v : y.channel(0, 0)) EXPECT_EQ(v, 0.5f);
  for (float v : y.channel(0, 1)) EXPECT_EQ(v, -1.0f);
}

TEST(TransposedConvTest, MatchesScatterAccumulate) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x = random_tensor({1, 2, 3, 3}, rng);
    Tensor w = random_tensor({2, 1 + rng.below(4), 2, 2}, rng);
    auto b = random_vec(w.shape().c, rng);
    Tensor got = transposed_conv2d(x, w, b);
    Tensor want = oracle::transposed_conv2d(x, w, b, 2);
    ASSERT_EQ(got.shape(), (Shape{1, w.shape().c, 6, 6}));
    EXPECT_LE(oracle::max_abs_diff(got.data(), want.data()), 1e-6);
  }
}

TEST(TransposedConvTest, RejectsNonDoublingConfiguration) {
  Tensor x(1, 1, 2, 2);
  Tensor w(1, 1, 2, 2);
  EXPECT_THROW(transposed_conv2d(x, w, {}, 1, 2, 0), ConfigError);
  EXPECT_THROW(transposed_conv2d(x, w, {}, 2, 3, 0), ConfigError);
  EXPECT_THROW(transposed_conv2d(x, w, {}, 2, 2, 1), ConfigError);
}

TEST(BatchnormTest, UnitStatisticsAreIdentity) {
  Rng rng(3);
  Tensor x = random_tensor({1, 2, 3, 3}, rng);
  std::vector<float> zero(2, 0.0f), one(2, 1.0f);
  EXPECT_EQ(batchnorm_inference(x, zero, one, one, zero, 0.0), x);
}

TEST(BatchnormTest, ConstantAtMeanGivesBeta) {
  Tensor x(1, 2, 3, 3);
  x.channel(0, 0)[0] = 0.0f;
  for (float& v : x.channel(0, 0)) v = 1.5f;
  for (float& v : x.channel(0, 1)) v = -2.0f;
  std::vector<float> mean{1.5f, -2.0f}, var{0.3f, 4.0f}, gamma{2.0f, 0.5f}, beta{0.7f, -0.1f};
  Tensor y = batchnorm_inference(x, mean, var, gamma, beta, 1e-5);
  for (float v : y.channel(0, 0)) EXPECT_FLOAT_EQ(v, 0.7f);
  for (float v : y.channel(0, 1)) EXPECT_FLOAT_EQ(v, -0.1f);
}

TEST(BatchnormTest, MatchesScalarFormula) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x = random_tensor({2, 3, 4, 4}, rng, -3.0, 3.0);
    auto mean = random_vec(3, rng);
    auto var = random_vec(3, rng, 0.1, 2.0);
    auto gamma = random_vec(3, rng);
    auto beta = random_vec(3, rng);
    Tensor got = batchnorm_inference(x, mean, var, gamma, beta, 1e-5);
    Tensor want = oracle::batchnorm(x, mean, var, gamma, beta, 1e-5);
    EXPECT_LE(oracle::max_abs_diff(got.data(), want.data()), 1e-6);
  }
}

TEST(BatchnormTest, NegativeVarianceRejected) {
  std::vector<float> z{0.0f}, neg{-0.5f}, one{1.0f};
  EXPECT_THROW(batchnorm_inference(Tensor(1, 1, 2, 2), z, neg, one, z, 1e-5), ValidationError);
}

TEST(ActivationTest, ScalarValues) {
  EXPECT_EQ(relu(-1.0f), 0.0f);
  EXPECT_EQ(relu(2.0f), 2.0f);
  EXPECT_EQ(silu(0.0f), 0.0f);
  EXPECT_NEAR(silu(1.0f), 1.0 / (1.0 + std::exp(-1.0)), 1e-7);
  EXPECT_NEAR(silu(1.0f), 0.731058, 1e-6);
}

TEST(ActivationTest, TensorForms) {
  Tensor x({1, 1, 1, 4}, std::vector<float>{-2.0f, -0.0f, 0.5f, 3.0f});
  EXPECT_EQ(relu(x).values(), (std::vector<float>{0.0f, 0.0f, 0.5f, 3.0f}));
  Tensor s = silu(x);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_FLOAT_EQ(s.values()[i], silu(x.values()[i]));
}

TEST(UnfoldTest, SinglePatchHoldsAllPixels) {
  Tensor x({1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  PatchSequence s = unfold(x, 2, 2);
  EXPECT_EQ(s.area, 4u);
  EXPECT_EQ(s.tokens, 1u);
  EXPECT_EQ(s.dim, 1u);
  EXPECT_EQ(s.data, (std::vector<float>{1, 2, 3, 4}));
}

TEST(UnfoldTest, RampLayoutMatchesEnumeration) {
  std::vector<float> ramp(16);
  std::iota(ramp.begin(), ramp.end(), 0.0f);
  Tensor x({1, 1, 4, 4}, ramp);
  PatchSequence s = unfold(x, 2, 2);
  ASSERT_EQ(s.tokens, 4u);
  // Offset p inside the patch, token t = patch grid cell in row-major order.
  const float expected[4][4] = {{0, 2, 8, 10}, {1, 3, 9, 11}, {4, 6, 12, 14}, {5, 7, 13, 15}};
  for (std::size_t p = 0; p < 4; ++p)
    for (std::size_t t = 0; t < 4; ++t) EXPECT_EQ(s.at(0, p, t, 0), expected[p][t]) << p << "," << t;
}

TEST(UnfoldTest, MatchesIndexOracleAndRoundTripsBitExactly) {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t ph = 1 + rng.below(3);
    const std::size_t pw = 1 + rng.below(3);
    Tensor x = random_tensor({1 + rng.below(2), 1 + rng.below(4), ph * (1 + rng.below(3)),
                              pw * (1 + rng.below(3))},
                             rng);
    PatchSequence s = unfold(x, ph, pw);
    for (std::size_t n = 0; n < s.batch; ++n)
      for (std::size_t p = 0; p < s.area; ++p)
        for (std::size_t t = 0; t < s.tokens; ++t)
          for (std::size_t d = 0; d < s.dim; ++d)
            ASSERT_EQ(s.at(n, p, t, d), oracle::unfold_entry(x, ph, pw, n, p, t, d));
    EXPECT_EQ(fold(s), x);
  }
}

TEST(UnfoldTest, IndivisibleExtentRejected) {
  EXPECT_THROW(unfold(Tensor(1, 1, 3, 4), 2, 2), DimensionError);
}

PatchSequence random_sequence(std::size_t tokens, std::size_t dim, Rng& rng) {
  return unfold(random_tensor({1, dim, 1, tokens}, rng), 1, 1);
}

TEST(AttentionTest, SingletonSequence) {
  Rng rng(41);
  PatchSequence s = random_sequence(1, 4, rng);
  Tensor wq = random_tensor({4, 4, 1, 1}, rng), wk = random_tensor({4, 4, 1, 1}, rng);
  Tensor wv = random_tensor({4, 4, 1, 1}, rng), wo = random_tensor({4, 4, 1, 1}, rng);
  AttentionTrace trace;
  PatchSequence y = multihead_self_attention(s, wq, wk, wv, wo, 2, {}, &trace);
  ASSERT_FALSE(trace.first_rows.empty());
  EXPECT_EQ(trace.first_rows.front().front(), 1.0);
  PatchSequence expect = oracle::linear(oracle::linear(s, wv, {}), wo, {});
  EXPECT_LE(oracle::max_abs_diff(y.data, expect.data), 1e-6);
}

TEST(AttentionTest, ZeroQueryKeyGivesUniformMean) {
  Rng rng(42);
  PatchSequence s = random_sequence(5, 4, rng);
  Tensor zero(4, 4, 1, 1);
  Tensor wv = random_tensor({4, 4, 1, 1}, rng);
  Tensor wo(4, 4, 1, 1);
  for (std::size_t i = 0; i < 4; ++i) wo.at(i, i, 0, 0) = 1.0f;
  PatchSequence y = multihead_self_attention(s, zero, zero, wv, wo, 1);
  PatchSequence v = oracle::linear(s, wv, {});
  for (std::size_t d = 0; d < 4; ++d) {
    double mean = 0.0;
    for (std::size_t t = 0; t < 5; ++t) mean += v.at(0, 0, t, d);
    mean /= 5.0;
    for (std::size_t t = 0; t < 5; ++t) EXPECT_NEAR(y.at(0, 0, t, d), mean, 1e-6);
  }
}

TEST(AttentionTest, MatchesDenseLoopOracle) {
  Rng rng(43);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t heads = trial == 0 ? 2 : 1 + rng.below(3);
    const std::size_t dim = heads * (1 + rng.below(3));
    const std::size_t tokens = trial == 0 ? 3 : 1 + rng.below(6);
    PatchSequence s = trial % 2 == 0 ? random_sequence(tokens, trial == 0 ? 4 : dim, rng)
                                     : unfold(random_tensor({1, dim, 4, 2}, rng), 2, 2);
    const std::size_t D = s.dim;
    const std::size_t H = trial == 0 ? 2 : (D % heads == 0 ? heads : 1);
    Tensor wq = random_tensor({D, D, 1, 1}, rng), wk = random_tensor({D, D, 1, 1}, rng);
    Tensor wv = random_tensor({D, D, 1, 1}, rng), wo = random_tensor({D, D, 1, 1}, rng);
    auto bo = random_vec(D, rng);
    AttentionTrace trace;
    PatchSequence got = multihead_self_attention(s, wq, wk, wv, wo, H, bo, &trace);
    PatchSequence want = oracle::attention(s, wq, wk, wv, wo, H, bo);
    EXPECT_LE(oracle::max_abs_diff(got.data, want.data), 1e-5) << "trial " << trial;
    EXPECT_LE(trace.max_row_sum_error, 1e-6);
  }
}

TEST(AttentionTest, TokenPermutationEquivariance) {
  Rng rng(44);
  PatchSequence s = random_sequence(6, 8, rng);
  Tensor wq = random_tensor({8, 8, 1, 1}, rng), wk = random_tensor({8, 8, 1, 1}, rng);
  Tensor wv = random_tensor({8, 8, 1, 1}, rng), wo = random_tensor({8, 8, 1, 1}, rng);
  const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  PatchSequence permuted = s;
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t d = 0; d < 8; ++d) permuted.at(0, 0, t, d) = s.at(0, 0, perm[t], d);
  PatchSequence y = multihead_self_attention(s, wq, wk, wv, wo, 4);
  PatchSequence yp = multihead_self_attention(permuted, wq, wk, wv, wo, 4);
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t d = 0; d < 8; ++d) EXPECT_NEAR(yp.at(0, 0, t, d), y.at(0, 0, perm[t], d), 1e-6);
}

TEST(AttentionTest, IndivisibleHeadsRejected) {
  Rng rng(45);
  PatchSequence s = random_sequence(3, 6, rng);
  Tensor w(6, 6, 1, 1);
  EXPECT_THROW(multihead_self_attention(s, w, w, w, w, 4), ConfigError);
}

TEST(LayernormTest, ConstantTokenGivesBeta) {
  PatchSequence s = unfold(Tensor(1, 4, 1, 1, 2.5f), 1, 1);
  std::vector<float> gamma{1, 2, 3, 4}, beta{0.1f, 0.2f, 0.3f, 0.4f};
  PatchSequence y = layernorm(s, gamma, beta, 1e-5);
  for (std::size_t d = 0; d < 4; ++d) EXPECT_FLOAT_EQ(y.at(0, 0, 0, d), beta[d]);
}

TEST(LayernormTest, MomentsAndOracle) {
  Rng rng(51);
  for (int trial = 0; trial < 50; ++trial) {
    PatchSequence s = random_sequence(1 + rng.below(5), 2 + rng.below(16), rng);
    std::vector<float> one(s.dim, 1.0f), zero(s.dim, 0.0f);
    PatchSequence y = layernorm(s, one, zero, 0.0);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double mean = 0.0, var = 0.0;
      for (float v : y.row(r)) mean += v;
      mean /= static_cast<double>(y.dim);
      for (float v : y.row(r)) var += (v - mean) * (v - mean);
      var /= static_cast<double>(y.dim);
      EXPECT_NEAR(mean, 0.0, 1e-6);
      EXPECT_NEAR(var, 1.0, 1e-5);
    }
    auto gamma = random_vec(s.dim, rng), beta = random_vec(s.dim, rng);
    EXPECT_LE(oracle::max_abs_diff(layernorm(s, gamma, beta, 1e-5).data,
                                   oracle::layernorm(s, gamma, beta, 1e-5).data),
              1e-6);
  }
}

TEST(ConcatTest, StacksInArgumentOrder) {
  Rng rng(61);
  Tensor a = random_tensor({2, 2, 3, 4}, rng);
  Tensor b = random_tensor({2, 3, 3, 4}, rng);
  Tensor c = concat_channels(a, b);
  ASSERT_EQ(c.shape(), (Shape{2, 5, 3, 4}));
  for (std::size_t n = 0; n < 2; ++n) {
    for (std::size_t ch = 0; ch < 2; ++ch)
      EXPECT_TRUE(std::ranges::equal(c.channel(n, ch), a.channel(n, ch)));
    for (std::size_t ch = 0; ch < 3; ++ch)
      EXPECT_TRUE(std::ranges::equal(c.channel(n, 2 + ch), b.channel(n, ch)));
  }
}

TEST(ConcatTest, ExtentMismatchRejected) {
  EXPECT_THROW(concat_channels(Tensor(1, 2, 3, 4), Tensor(1, 2, 3, 5)), DimensionError);
}

TEST(ResizeTest, BilinearIdentityAndConstant) {
  Rng rng(71);
  Tensor x = random_tensor({1, 2, 5, 7}, rng);
  EXPECT_EQ(resize_bilinear(x, 5, 7), x);
  Tensor c(1, 1, 3, 3, 4.0f);
  Tensor up = resize_bilinear(c, 6, 9);
  for (float v : up.data()) EXPECT_FLOAT_EQ(v, 4.0f);
}

TEST(ResizeTest, NearestDownsamplePicksCentres) {
  std::vector<float> ramp(16);
  std::iota(ramp.begin(), ramp.end(), 0.0f);
  Tensor y = resize_nearest(Tensor({1, 1, 4, 4}, ramp), 2, 2);
  EXPECT_EQ(y.values(), (std::vector<float>{5, 7, 13, 15}));
}

TEST(PadCropTest, ReplicatePadThenCropRestores) {
  Rng rng(72);
  Tensor x = random_tensor({1, 2, 3, 5}, rng);
  Tensor p = pad_replicate(x, 2, 3);
  ASSERT_EQ(p.shape(), (Shape{1, 2, 5, 8}));
  EXPECT_EQ(p.at(0, 1, 4, 7), x.at(0, 1, 2, 4));
  EXPECT_EQ(crop(p, 0, 0, 3, 5), x);
}

TEST(KernelDeterminismTest, RepeatedCallsBitIdentical) {
  Rng rng(81);
  Tensor x = random_tensor({1, 3, 8, 8}, rng);
  Tensor w = random_tensor({4, 3, 3, 3}, rng);
  EXPECT_EQ(conv2d(x, w, {}, 2, 1), conv2d(x, w, {}, 2, 1));
  PatchSequence s = unfold(random_tensor({1, 8, 4, 4}, rng), 2, 2);
  Tensor q = random_tensor({8, 8, 1, 1}, rng);
  EXPECT_EQ(multihead_self_attention(s, q, q, q, q, 4).data,
            multihead_self_attention(s, q, q, q, q, 4).data);
}

}  // namespace
}  // namespace meter

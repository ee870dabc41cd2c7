#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "alignkit/conv.hpp"
#include "test_util.hpp"

using namespace alignkit;

TEST(Conv2d, DeltaKernelIsIdentity) {
  std::mt19937 gen(1);
  const Tensor x = testutil::random_tensor({1, 6, 7}, gen);
  Conv2dWeights w = Conv2dWeights::zeros(1, 1);
  w.weight[4] = 1.0f;
  EXPECT_TRUE(conv2d(x, w) == x);
}

TEST(Conv2d, OnesKernelOnConstantGivesNineTimes) {
  Conv2dWeights w = Conv2dWeights::zeros(1, 1);
  for (float& v : w.weight.data()) v = 1.0f;
  const Tensor out = conv2d(Tensor({1, 5, 5}, 0.5f), w);
  for (int y = 1; y < 4; ++y) {
    for (int x = 1; x < 4; ++x) EXPECT_FLOAT_EQ(out.at(0, y, x), 4.5f);
  }
  EXPECT_FLOAT_EQ(out.at(0, 0, 0), 2.0f);
}

TEST(Conv2d, MatchesDirectSummation) {
  std::mt19937 gen(2);
  for (int trial = 0; trial < 40; ++trial) {
    const int groups = 1 + trial % 2;
    const int cin = 2 * (1 + trial % 2), cout = 2 * (1 + (trial / 2) % 2);
    const int h = 1 + trial % 8, w = 1 + (trial * 3) % 8;
    const int k = trial % 5 == 0 ? 1 : 3;
    Conv2dWeights cw;
    cw.groups = groups;
    cw.weight = testutil::random_tensor({cout, cin / groups, k, k}, gen, -1.0f, 1.0f);
    cw.bias = testutil::random_tensor({cout}, gen, -1.0f, 1.0f);
    const Tensor x = testutil::random_tensor({cin, h, w}, gen, -1.0f, 1.0f);
    EXPECT_LE(max_abs_diff(conv2d(x, cw), testutil::conv_ref(x, cw.weight, cw.bias, groups)), 1e-5f)
        << "trial " << trial;
  }
}

TEST(Conv2d, ThreeChannelSixBySix) {
  std::mt19937 gen(3);
  Conv2dWeights cw;
  cw.weight = testutil::random_tensor({4, 3, 3, 3}, gen, -1.0f, 1.0f);
  cw.bias = testutil::random_tensor({4}, gen);
  const Tensor x = testutil::random_tensor({3, 6, 6}, gen);
  EXPECT_LE(max_abs_diff(conv2d(x, cw), testutil::conv_ref(x, cw.weight, cw.bias, 1)), 1e-5f);
}

TEST(Conv2d, LargeInputCrossesTiles) {
  std::mt19937 gen(4);
  Conv2dWeights cw;
  cw.weight = testutil::random_tensor({3, 5, 3, 3}, gen, -1.0f, 1.0f);
  cw.bias = testutil::random_tensor({3}, gen);
  const Tensor x = testutil::random_tensor({5, 70, 75}, gen);
  EXPECT_LE(max_abs_diff(conv2d(x, cw), testutil::conv_ref(x, cw.weight, cw.bias, 1)), 1e-5f);
}

TEST(Conv2d, ChannelAndGroupErrors) {
  EXPECT_THROW(conv2d(Tensor({3, 4, 4}), Conv2dWeights::zeros(2, 2)), ShapeError);
  Conv2dWeights g = Conv2dWeights::zeros(4, 4, 3, 2);
  EXPECT_NO_THROW(conv2d(Tensor({4, 4, 4}), g));
  EXPECT_THROW(conv2d(Tensor({3, 4, 4}), g), ShapeError);
  Conv2dWeights bad = Conv2dWeights::zeros(2, 2);
  bad.bias = Tensor({3});
  EXPECT_THROW(conv2d(Tensor({2, 4, 4}), bad), ShapeError);
  Conv2dWeights k5;
  k5.weight = Tensor({1, 1, 5, 5});
  k5.bias = Tensor({1});
  EXPECT_THROW(conv2d(Tensor({1, 6, 6}), k5), ShapeError);
}

TEST(Conv2d, HeUniformIsSeededAndBounded) {
  const Conv2dWeights a = Conv2dWeights::he_uniform(8, 4, 3, CounterRng(5));
  const Conv2dWeights b = Conv2dWeights::he_uniform(8, 4, 3, CounterRng(5));
  EXPECT_TRUE(a.weight == b.weight);
  const float bound = std::sqrt(6.0f / 36.0f);
  for (float v : a.weight.data()) EXPECT_LE(std::abs(v), bound);
  for (float v : a.bias.data()) EXPECT_EQ(v, 0.0f);
}

TEST(PixelShuffle, ShapeArithmetic) {
  EXPECT_EQ(pixel_shuffle(Tensor({4, 2, 2}), 2).dims(), (Shape{1, 4, 4}));
  EXPECT_EQ(pixel_shuffle(Tensor({18, 3, 5}), 3).dims(), (Shape{2, 9, 15}));
  EXPECT_THROW(pixel_shuffle(Tensor({6, 2, 2}), 2), ShapeError);
  EXPECT_THROW(pixel_unshuffle(Tensor({1, 5, 4}), 2), ShapeError);
}

TEST(PixelShuffle, HandEnumeratedIndexMap) {
  // in[c*4 + dy*2 + dx, 0, 0] lands on out[c, dy, dx].
  const Tensor in({4, 1, 1}, std::vector<float>{10, 11, 12, 13});
  const Tensor out = pixel_shuffle(in, 2);
  EXPECT_EQ(out.at(0, 0, 0), 10.0f);
  EXPECT_EQ(out.at(0, 0, 1), 11.0f);
  EXPECT_EQ(out.at(0, 1, 0), 12.0f);
  EXPECT_EQ(out.at(0, 1, 1), 13.0f);
}

TEST(PixelShuffle, UnshuffleInvertsShuffle) {
  std::mt19937 gen(6);
  for (int s : {1, 2, 3, 4}) {
    for (int c : {1, 2, 3}) {
      const Tensor x = testutil::random_tensor({c * s * s, 3, 4}, gen);
      EXPECT_TRUE(pixel_unshuffle(pixel_shuffle(x, s), s) == x);
      const Tensor y = testutil::random_tensor({c, 3 * s, 2 * s}, gen);
      EXPECT_TRUE(pixel_shuffle(pixel_unshuffle(y, s), s) == y);
    }
  }
}

TEST(Activations, Pointwise) {
  Tensor t({1, 1, 3}, std::vector<float>{-2, 0, 3});
  Tensor r = t;
  relu_inplace(r);
  EXPECT_EQ(r.vec(), (std::vector<float>{0, 0, 3}));
  Tensor l = t;
  leaky_relu_inplace(l, 0.1f);
  EXPECT_FLOAT_EQ(l[0], -0.2f);
  EXPECT_FLOAT_EQ(l[2], 3.0f);
  Tensor s = t;
  sigmoid_inplace(s);
  EXPECT_FLOAT_EQ(s[1], 0.5f);
  EXPECT_NEAR(s[2], 1.0 / (1.0 + std::exp(-3.0)), 1e-7);
}

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "alignkit/sampling.hpp"
#include "test_util.hpp"

using namespace alignkit;

namespace {

Tensor coords_of(const std::vector<std::pair<float, float>>& pts) {
  Tensor c({2, 1, static_cast<int>(pts.size())});
  for (std::size_t i = 0; i < pts.size(); ++i) {
    c.at(0, 0, static_cast<int>(i)) = pts[i].first;
    c.at(1, 0, static_cast<int>(i)) = pts[i].second;
  }
  return c;
}

}  // namespace

TEST(BilinearSample, IntegerCoordinateReadsThePixel) {
  std::mt19937 gen(1);
  const Tensor img = testutil::random_tensor({2, 4, 5}, gen);
  const Tensor out = bilinear_sample(img, coords_of({{3, 1}, {0, 0}, {4, 3}}));
  for (int c = 0; c < 2; ++c) {
    EXPECT_EQ(out.at(c, 0, 0), img.at(c, 1, 3));
    EXPECT_EQ(out.at(c, 0, 1), img.at(c, 0, 0));
    EXPECT_EQ(out.at(c, 0, 2), img.at(c, 3, 4));
  }
}

TEST(BilinearSample, CentreOfTwoByTwoIsTheMean) {
  const Tensor img({1, 2, 2}, std::vector<float>{1, 2, 3, 6});
  EXPECT_FLOAT_EQ(bilinear_sample(img, coords_of({{0.5f, 0.5f}}))[0], 3.0f);
}

TEST(BilinearSample, MatchesFourNeighbourOracle) {
  std::mt19937 gen(7);
  const Tensor img = testutil::random_tensor({3, 5, 5}, gen);
  Tensor coords = testutil::random_tensor({2, 6, 6}, gen, 0.0f, 4.0f);
  const Tensor out = bilinear_sample(img, coords);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 6; ++y) {
      for (int x = 0; x < 6; ++x) {
        EXPECT_NEAR(out.at(c, y, x), testutil::bilinear_ref(img, c, coords.at(0, y, x), coords.at(1, y, x)), 1e-6);
      }
    }
  }
}

TEST(BilinearSample, LinearInTheImage) {
  std::mt19937 gen(3);
  const Tensor x = testutil::random_tensor({2, 6, 7}, gen), y = testutil::random_tensor({2, 6, 7}, gen);
  const Tensor coords = testutil::random_tensor({2, 5, 5}, gen, -1.0f, 7.0f);
  const float a = 0.7f, b = -1.3f;
  const Tensor lhs = bilinear_sample(x * a + y * b, coords);
  const Tensor rhs = bilinear_sample(x, coords) * a + bilinear_sample(y, coords) * b;
  EXPECT_LE(max_abs_diff(lhs, rhs), 1e-6f);
}

TEST(BilinearSample, OutsideCoordinatesClamp) {
  std::mt19937 gen(4);
  const Tensor img = testutil::random_tensor({1, 4, 4}, gen);
  const Tensor out = bilinear_sample(img, coords_of({{-5, -5}, {10, 10}, {-3, 2}}));
  EXPECT_EQ(out[0], img.at(0, 0, 0));
  EXPECT_EQ(out[1], img.at(0, 3, 3));
  EXPECT_EQ(out[2], img.at(0, 2, 0));
}

TEST(BilinearSample, Errors) {
  const Tensor img({1, 4, 4});
  EXPECT_THROW(bilinear_sample(img, Tensor({3, 2, 2})), ShapeError);
  Tensor bad({2, 1, 1});
  bad[0] = std::nanf("");
  EXPECT_THROW(bilinear_sample(img, bad), NonFiniteError);
}

TEST(Warp, ZeroFlowIsBitExactIdentity) {
  std::mt19937 gen(5);
  const Tensor f = testutil::random_tensor({4, 9, 11}, gen, -3.0f, 3.0f);
  EXPECT_TRUE(warp(f, FlowField(9, 11)) == f);
}

TEST(Warp, UndoesAOnePixelShift) {
  std::mt19937 gen(6);
  const Tensor a = testutil::random_tensor({2, 8, 10}, gen);
  Tensor b(a.dims());
  for (int c = 0; c < 2; ++c) {
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 10; ++x) b.at(c, y, x) = a.at(c, y, std::max(x - 1, 0));
    }
  }
  const Tensor out = warp(b, FlowField::uniform(8, 10, 1.0f, 0.0f));
  for (int c = 0; c < 2; ++c) {
    for (int y = 0; y < 8; ++y) {
      for (int x = 1; x < 9; ++x) EXPECT_NEAR(out.at(c, y, x), a.at(c, y, x), 1e-6);
    }
  }
}

TEST(Warp, FarOutsideTakesTheCornerValue) {
  std::mt19937 gen(8);
  const Tensor f = testutil::random_tensor({1, 5, 5}, gen);
  FlowField flow(5, 5);
  flow.dx(2, 3) = -8.0f;
  flow.dy(2, 3) = -7.0f;
  EXPECT_EQ(warp(f, flow).at(0, 2, 3), f.at(0, 0, 0));
}

TEST(Warp, ResolutionMismatch) {
  EXPECT_THROW(warp(Tensor({1, 4, 4}), FlowField(4, 5)), ShapeError);
}

TEST(Warp, FiniteDifferenceMatchesAnalyticBilinearDerivative) {
  std::mt19937 gen(9);
  const int h = 10, w = 10;
  const Tensor f = testutil::random_tensor({2, h, w}, gen);
  std::uniform_real_distribution<float> frac(0.2f, 0.8f);
  std::uniform_int_distribution<int> whole(-2, 2);
  FlowField flow(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      flow.dx(y, x) = static_cast<float>(whole(gen)) + frac(gen);
      flow.dy(y, x) = static_cast<float>(whole(gen)) + frac(gen);
    }
  }
  const ScalarOp op = [&](const Tensor& t) { return sum(warp(f, FlowField(t))); };
  std::vector<std::size_t> idx;
  for (int y = 3; y < 7; ++y) {
    for (int x = 3; x < 7; ++x) {
      idx.push_back(static_cast<std::size_t>(y * w + x));
      idx.push_back(static_cast<std::size_t>(h * w + y * w + x));
    }
  }
  const std::vector<double> fd = finite_diff_at(op, flow.tensor(), idx, 1e-3f);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const bool vertical = idx[k] >= static_cast<std::size_t>(h * w);
    const int p = static_cast<int>(idx[k] % static_cast<std::size_t>(h * w));
    const int y = p / w, x = p % w;
    const double sx = x + flow.dx(y, x), sy = y + flow.dy(y, x);
    const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
    const double fx = sx - x0, fy = sy - y0;
    double analytic = 0.0;
    for (int c = 0; c < 2; ++c) {
      const double a = f.at(c, y0, x0), b = f.at(c, y0, x0 + 1), cc = f.at(c, y0 + 1, x0),
                   d = f.at(c, y0 + 1, x0 + 1);
      analytic += vertical ? (1 - fx) * (cc - a) + fx * (d - b) : (1 - fy) * (b - a) + fy * (d - cc);
    }
    EXPECT_LE(std::abs(fd[k] - analytic) / std::max(std::abs(analytic), 1e-4), 1e-3) << "element " << idx[k];
  }
}

TEST(Warp, FlowVjpMatchesFiniteDifference) {
  std::mt19937 gen(10);
  const Tensor f = testutil::random_tensor({3, 8, 8}, gen);
  const Tensor up = testutil::random_tensor({3, 8, 8}, gen, -1.0f, 1.0f);
  FlowField flow(8, 8);
  for (float& v : flow.tensor_mut().data()) v = std::uniform_real_distribution<float>(0.2f, 0.8f)(gen);
  const FlowField g = warp_flow_vjp(f, flow, up);
  const ScalarOp op = [&](const Tensor& t) {
    const Tensor o = warp(f, FlowField(t));
    double s = 0.0;
    for (std::size_t i = 0; i < o.size(); ++i) s += static_cast<double>(o[i]) * up[i];
    return s;
  };
  const std::vector<std::size_t> idx{9, 18, 27, 36, 64 + 10, 64 + 45};
  const std::vector<double> fd = finite_diff_at(op, flow.tensor(), idx, 1e-3f);
  for (std::size_t k = 0; k < idx.size(); ++k) EXPECT_NEAR(g.tensor()[idx[k]], fd[k], 2e-3);
}

TEST(Resize, ConstantStaysConstant) {
  const Tensor c({2, 8, 6}, 0.37f);
  for (const Tensor& r : {resize(c, ResizeMode::Half), resize(c, ResizeMode::Double)}) {
    for (float v : r.data()) EXPECT_FLOAT_EQ(v, 0.37f);
  }
  EXPECT_EQ(resize(c, ResizeMode::Half).dims(), (Shape{2, 4, 3}));
  EXPECT_EQ(resize(c, ResizeMode::Double).dims(), (Shape{2, 16, 12}));
}

TEST(Resize, OddExtentsArePaddedBeforeHalving) {
  EXPECT_EQ(resize(Tensor({1, 5, 7}, 1.0f), ResizeMode::Half).dims(), (Shape{1, 3, 4}));
}

TEST(Resize, FlowValuesFollowTheGrid) {
  const FlowField half = resize(FlowField::uniform(8, 8, 4.0f, 2.0f), ResizeMode::Half);
  EXPECT_EQ(half.height(), 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      EXPECT_EQ(half.dx(y, x), 2.0f);
      EXPECT_EQ(half.dy(y, x), 1.0f);
    }
  }
  const FlowField v = FlowField::uniform(6, 10, -1.75f, 3.5f);
  EXPECT_TRUE(resize(resize(v, ResizeMode::Half), ResizeMode::Double) == v);
}

TEST(Resize, HalfThenDoubleRecoversSmoothField) {
  Tensor f({1, 32, 32});
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      f.at(0, y, x) = static_cast<float>(std::sin(2 * std::numbers::pi * x / 32.0) * std::cos(2 * std::numbers::pi * y / 32.0));
    }
  }
  const Tensor back = resize(resize(f, ResizeMode::Half), ResizeMode::Double);
  EXPECT_LE(max_abs_diff(back, f), 0.05f * 2.0f);
}

TEST(Resample, BoxDownsampleAveragesBlocks) {
  const Tensor t({1, 2, 4}, std::vector<float>{1, 2, 3, 4, 5, 6, 7, 8});
  const Tensor d = box_downsample(t, 2);
  EXPECT_EQ(d.dims(), (Shape{1, 1, 2}));
  EXPECT_FLOAT_EQ(d[0], 3.5f);
  EXPECT_FLOAT_EQ(d[1], 5.5f);
  EXPECT_THROW(box_downsample(Tensor({1, 3, 4}), 2), ShapeError);
  EXPECT_THROW(box_downsample(t, 0), InvalidArgument);
}

TEST(Resample, UpsampleKeepsConstantsAndShape) {
  const Tensor u = upsample_bilinear(Tensor({3, 4, 5}, 0.25f), 4);
  EXPECT_EQ(u.dims(), (Shape{3, 16, 20}));
  for (float v : u.data()) EXPECT_FLOAT_EQ(v, 0.25f);
  EXPECT_THROW(upsample_bilinear(u, 0), InvalidArgument);
}

TEST(Resample, ResizeFlowToScalesValues) {
  const FlowField f = resize_flow_to(FlowField::uniform(4, 4, 1.0f, -0.5f), 16, 16, 4.0f);
  EXPECT_EQ(f.height(), 16);
  EXPECT_FLOAT_EQ(f.dx(7, 9), 4.0f);
  EXPECT_FLOAT_EQ(f.dy(0, 15), -2.0f);
}

TEST(Resample, InteriorMask) {
  const Tensor m = interior_mask(6, 7, 2);
  EXPECT_EQ(m.at(0, 1, 3), 0.0f);
  EXPECT_EQ(m.at(0, 2, 2), 1.0f);
  EXPECT_EQ(m.at(0, 3, 4), 1.0f);
  EXPECT_EQ(m.at(0, 4, 3), 0.0f);
  EXPECT_DOUBLE_EQ(sum(m), 6.0);
}

TEST(FiniteDiff, LinearAndConstantOps) {
  std::mt19937 gen(11);
  const Tensor x = testutil::random_tensor({2, 3, 3}, gen);
  const Tensor g = finite_diff_gradient([](const Tensor& t) { return sum(t); }, x, 1e-2f);
  for (float v : g.data()) EXPECT_NEAR(v, 1.0f, 1e-6);
  const Tensor z = finite_diff_gradient([](const Tensor&) { return 4.0; }, x, 1e-2f);
  for (float v : z.data()) EXPECT_EQ(v, 0.0f);
}

TEST(FiniteDiff, Errors) {
  const Tensor x({1, 2, 2});
  EXPECT_THROW(finite_diff_gradient([](const Tensor&) { return std::nan(""); }, x, 1e-3f), NonFiniteError);
  EXPECT_THROW(finite_diff_gradient([](const Tensor& t) { return sum(t); }, x, 0.0f), InvalidArgument);
  const std::vector<std::size_t> idx{4};
  EXPECT_THROW(finite_diff_at([](const Tensor& t) { return sum(t); }, x, idx, 1e-3f), ShapeError);
}

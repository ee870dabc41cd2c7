#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "alignkit/rectify.hpp"
#include "alignkit/sampling.hpp"
#include "alignkit/synthdata.hpp"
#include "test_util.hpp"

using namespace alignkit;

namespace {

// Direct guided filter on one channel: explicit window loops, windows
// truncated at the border and averaged over the pixels they cover.
Tensor guided_ref(const Tensor& I, const Tensor& p, int r, double eps) {
  const int h = I.height(), w = I.width();
  auto box = [&](const std::vector<double>& v) {
    std::vector<double> out(v.size());
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        int n = 0;
        for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy) {
          for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx) {
            s += v[yy * w + xx];
            ++n;
          }
        }
        out[y * w + x] = s / n;
      }
    }
    return out;
  };
  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::vector<double> vi(n), vp(n), vii(n), vip(n);
  for (std::size_t i = 0; i < n; ++i) {
    vi[i] = I[i];
    vp[i] = p[i];
    vii[i] = vi[i] * vi[i];
    vip[i] = vi[i] * vp[i];
  }
  const auto mi = box(vi), mp = box(vp), mii = box(vii), mip = box(vip);
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = (mip[i] - mi[i] * mp[i]) / (mii[i] - mi[i] * mi[i] + eps);
    b[i] = mp[i] - a[i] * mi[i];
  }
  const auto ma = box(a), mb = box(b);
  Tensor out({1, h, w});
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(ma[i] * vi[i] + mb[i]);
  return out;
}

Tensor textured(int c, int h, int w, unsigned seed) {
  SceneParams sp;
  sp.seed = seed;
  sp.height = h;
  sp.width = w;
  sp.frames = 1;
  Tensor f = make_scene(sp).frames[0];
  return c == 3 ? f : slice_channels(f, 0, c);
}

}  // namespace

TEST(GuidedFilter, ConstantSourceStaysConstant) {
  std::mt19937 gen(1);
  const Tensor guide = testutil::random_tensor({3, 12, 10}, gen);
  const Tensor out = guided_filter(guide, Tensor({3, 12, 10}, 0.42f), 2, 1e-3f);
  for (float v : out.data()) EXPECT_NEAR(v, 0.42f, 1e-6);
}

TEST(GuidedFilter, SelfGuidedWithTinyEpsIsIdentity) {
  const Tensor img = textured(3, 32, 32, 2);
  EXPECT_LE(max_abs_diff(guided_filter(img, img, 4, 1e-8f), img), 1e-3f);
}

TEST(GuidedFilter, FiveByOneMatchesClosedForm) {
  const Tensor I({1, 1, 5}, std::vector<float>{0.1f, 0.5f, 0.2f, 0.9f, 0.4f});
  const Tensor p({1, 1, 5}, std::vector<float>{0.3f, 0.2f, 0.8f, 0.6f, 0.1f});
  EXPECT_LE(max_abs_diff(guided_filter(I, p, 1, 0.01f), guided_ref(I, p, 1, 0.01)), 1e-6f);
}

TEST(GuidedFilter, MatchesDirectOracleOnRandomImages) {
  std::mt19937 gen(3);
  const Tensor I = testutil::random_tensor({2, 9, 13}, gen), p = testutil::random_tensor({2, 9, 13}, gen);
  const Tensor out = guided_filter(I, p, 3, 1e-3f);
  for (int c = 0; c < 2; ++c) {
    const Tensor ref = guided_ref(slice_channels(I, c, c + 1), slice_channels(p, c, c + 1), 3, 1e-3);
    EXPECT_LE(max_abs_diff(slice_channels(out, c, c + 1), ref), 1e-5f);
  }
}

TEST(GuidedFilter, SingleChannelGuideIsShared) {
  std::mt19937 gen(4);
  const Tensor I = testutil::random_tensor({1, 8, 8}, gen), p = testutil::random_tensor({3, 8, 8}, gen);
  const Tensor out = guided_filter(I, p, 2, 1e-3f);
  for (int c = 0; c < 3; ++c) {
    EXPECT_LE(max_abs_diff(slice_channels(out, c, c + 1), guided_ref(I, slice_channels(p, c, c + 1), 2, 1e-3)), 1e-5f);
  }
}

TEST(GuidedFilter, AddingAConstantToTheSourceShiftsTheOutput) {
  std::mt19937 gen(5);
  const Tensor I = testutil::random_tensor({3, 10, 10}, gen), p = testutil::random_tensor({3, 10, 10}, gen);
  const Tensor shifted = guided_filter(I, p + Tensor(p.dims(), 0.25f), 2, 1e-3f);
  const Tensor base = guided_filter(I, p, 2, 1e-3f) + Tensor(p.dims(), 0.25f);
  EXPECT_LE(max_abs_diff(shifted, base), 1e-6f);
}

TEST(GuidedFilter, ConstantRegionKeepsItsMean) {
  std::mt19937 gen(6);
  Tensor I = testutil::random_tensor({1, 20, 20}, gen), p({1, 20, 20});
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 20; ++x) p.at(0, y, x) = x < 10 ? 0.2f : 0.7f;
  }
  const Tensor out = guided_filter(I, p, 2, 1e-3f);
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 6; ++x) EXPECT_NEAR(out.at(0, y, x), 0.2f, 1e-6);
  }
}

TEST(GuidedFilter, Errors) {
  const Tensor a({3, 8, 8});
  EXPECT_THROW(guided_filter(a, a, 0, 1e-3f), InvalidArgument);
  EXPECT_THROW(guided_filter(a, a, 2, 0.0f), InvalidArgument);
  EXPECT_THROW(guided_filter(Tensor({2, 8, 8}), a, 2, 1e-3f), ShapeError);
  EXPECT_THROW(guided_filter(a, Tensor({3, 8, 9}), 2, 1e-3f), ShapeError);
}

TEST(ColorCorrect, MatchedPairIsUnchanged) {
  const Tensor y = textured(3, 96, 96, 7);
  const Tensor x = box_downsample(y, 4);
  EXPECT_LE(max_abs_diff(color_correct(x, y, 4), y), 1e-3f);
}

TEST(ColorCorrect, UpsampledLrKeepsItsColors) {
  const Tensor x = textured(3, 24, 24, 7);
  const Tensor y = upsample_bilinear(x, 4);
  const Tensor yg = color_correct(x, y, 4);
  for (int c = 0; c < 3; ++c) {
    EXPECT_NEAR(mean(slice_channels(yg, c, c + 1)), mean(slice_channels(y, c, c + 1)), 2e-4);
  }
}

TEST(ColorCorrect, UndoesAnAffineShiftExactly) {
  const Tensor y = textured(3, 96, 96, 13);
  const Tensor x = box_downsample(y, 4) * 0.8f + Tensor({3, 24, 24}, 0.05f);
  const Tensor want = y * 0.8f + Tensor(y.dims(), 0.05f);
  EXPECT_LE(max_abs_diff(color_correct(x, y, 4), want), 1e-3f);
}

TEST(ColorCorrect, RemovesAUniformGain) {
  const Tensor hr = textured(3, 96, 96, 8);
  const Tensor x = box_downsample(hr, 4);
  const Tensor y = hr * 1.2f;
  const Tensor yg = color_correct(x, y, 4);
  const Tensor up = upsample_bilinear(x, 4);
  for (int c = 0; c < 3; ++c) {
    const double target = mean(slice_channels(up, c, c + 1));
    EXPECT_NEAR(mean(slice_channels(yg, c, c + 1)), target, 0.02 * target);
  }
}

TEST(ColorCorrect, ConstantPairStaysConstant) {
  const Tensor yg = color_correct(Tensor({3, 8, 8}, 0.3f), Tensor({3, 32, 32}, 0.3f), 4);
  for (float v : yg.data()) EXPECT_NEAR(v, 0.3f, 1e-6);
}

TEST(ColorCorrect, ScaleMismatch) {
  EXPECT_THROW(color_correct(Tensor({3, 8, 8}), Tensor({3, 30, 32}), 4), ShapeError);
  EXPECT_THROW(color_correct(Tensor({3, 8, 8}), Tensor({1, 32, 32}), 4), ShapeError);
}

TEST(Rectify, AlignedPairIsLeftAlone) {
  const Tensor y = textured(3, 128, 128, 9);
  const Tensor x = box_downsample(y, 4);
  const RectifiedTarget t = rectify_target(x, y, 4);
  EXPECT_LE(endpoint_error(t.flow, FlowField(32, 32), interior_mask(32, 32, 4)), 0.1);
  for (float v : t.mask.data()) EXPECT_EQ(v, 1.0f);
  const Tensor yg = color_correct(x, y, 4);
  EXPECT_LE(masked_l1(t.y_w, yg, interior_mask(128, 128, 16)), 5e-3);
}

TEST(Rectify, ShiftedTargetIsRealigned) {
  const int lr = 48, r = 4;
  SceneParams sp;
  sp.seed = 10;
  sp.height = sp.width = lr * r;
  sp.frames = 1;
  sp.min_period = 16;
  sp.max_period = 96;
  const Tensor truth = make_scene(sp).frames[0];
  const Tensor x = box_downsample(truth, r);
  // HR content shifted right by 4 px: y(p) = truth(p - (4, 0)).
  const Tensor y = warp(truth, FlowField::uniform(lr * r, lr * r, -4.0f, 0.0f));
  const RectifiedTarget t = rectify_target(x, y, r);
  Tensor inner = interior_mask(lr * r, lr * r, 8);
  for (std::size_t i = 0; i < inner.size(); ++i) inner[i] *= t.mask[i];
  const double before = masked_l1(y, truth, inner), after = masked_l1(t.y_w, truth, inner);
  EXPECT_LE(after, 0.3 * before) << before << " -> " << after;
}

TEST(Rectify, IdempotentInTheAlignedLimit) {
  const Tensor y = textured(3, 128, 128, 11);
  const Tensor x = box_downsample(y, 4);
  const RectifiedTarget once = rectify_target(x, y, 4);
  const RectifiedTarget twice = rectify_target(x, once.y_w, 4);
  EXPECT_LE(masked_l1(twice.y_w, once.y_w, Tensor({1, 128, 128}, 1.0f)), 1e-2);
}

TEST(Rectify, LowTextureIsAFlagNotAFailure) {
  const RectifiedTarget t = rectify_target(Tensor({3, 32, 32}, 0.5f), Tensor({3, 128, 128}, 0.5f), 4);
  EXPECT_TRUE(t.low_texture);
  for (float v : t.mask.data()) EXPECT_EQ(v, 1.0f);
}

TEST(OutOfBoundsMask, BorderStripIsZeroed) {
  const Tensor m = out_of_bounds_mask(FlowField::uniform(6, 8, 2.5f, 0.0f));
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 8; ++x) EXPECT_EQ(m.at(0, y, x), x + 2.5f <= 7.5f ? 1.0f : 0.0f) << x;
  }
  const Tensor up = out_of_bounds_mask(FlowField::uniform(6, 8, 0.0f, -0.75f));
  for (int x = 0; x < 8; ++x) {
    EXPECT_EQ(up.at(0, 0, x), 0.0f);
    EXPECT_EQ(up.at(0, 1, x), 1.0f);
  }
}

TEST(MaskedL1, HandArithmetic) {
  const Tensor pred({1, 2, 2}, std::vector<float>{0.1f, 0.2f, 0.3f, 0.4f}), target({1, 2, 2});
  const Tensor m({1, 2, 2}, std::vector<float>{1, 1, 0, 0});
  EXPECT_NEAR(masked_l1(pred, target, m), 0.075, 1e-7);
  EXPECT_EQ(masked_l1(pred, target, Tensor({1, 2, 2})), 0.0);
  EXPECT_EQ(masked_l1(pred, pred, Tensor({1, 2, 2}, 1.0f)), 0.0);
}

TEST(MaskedL1, MonotoneInTheMask) {
  std::mt19937 gen(12);
  const Tensor a = testutil::random_tensor({3, 6, 6}, gen), b = testutil::random_tensor({3, 6, 6}, gen);
  Tensor m({1, 6, 6}, 1.0f);
  double last = masked_l1(a, b, m);
  for (std::size_t i = 0; i < m.size(); i += 5) {
    m[i] = 0.0f;
    const double now = masked_l1(a, b, m);
    EXPECT_LE(now, last);
    last = now;
  }
}

TEST(MaskedL1, Errors) {
  EXPECT_THROW(masked_l1(Tensor({3, 4, 4}), Tensor({3, 4, 5}), Tensor({1, 4, 4})), ShapeError);
  EXPECT_THROW(masked_l1(Tensor({3, 4, 4}), Tensor({3, 4, 4}), Tensor({2, 4, 4})), ShapeError);
}

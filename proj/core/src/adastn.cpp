#include "alignkit/adastn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace alignkit {

namespace {

Tensor trunk(const Tensor& f_ref, const Tensor& f_warped, const PredictorWeights& w) {
  require_same_dims(f_ref, f_warped, "adastn");
  if (2 * f_ref.channels() != w.shared1.in_channels()) {
    throw ShapeError("adastn: feature channel axis " + std::to_string(f_ref.channels()) +
                     " does not match predictor input " +
                     std::to_string(w.shared1.in_channels() / 2));
  }
  Tensor x = conv2d(concat_channels({&f_ref, &f_warped}), w.shared1);
  relu_inplace(x);
  x = conv2d(x, w.shared2);
  relu_inplace(x);
  return x;
}

void check_branch(const Conv2dWeights& c, int expected, const char* name) {
  if (c.out_channels() != expected) {
    throw ShapeError(std::string("adastn: ") + name + " branch has " +
                     std::to_string(c.out_channels()) + " output channels, expected " +
                     std::to_string(expected));
  }
}

AffineField affine_branches(const Tensor& hidden, const PredictorWeights& w) {
  const int n = w.groups, h = hidden.height(), wd = hidden.width();
  return {conv2d(hidden, *w.affine).reshaped({n, 2, 2, h, wd}),
          conv2d(hidden, w.translation).reshaped({n, 2, 1, h, wd})};
}

constexpr float kMaskFloor = 1e-6f;

}  // namespace

DeformParams DeformParams::identity(int groups, int height, int width, float mask) {
  DeformParams p{Tensor({groups, 2, kTaps, height, width}), Tensor({groups, kTaps, height, width}, mask)};
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  for (int g = 0; g < groups; ++g) {
    for (int axis = 0; axis < 2; ++axis) {
      for (int k = 0; k < kTaps; ++k) {
        float* dst = p.offsets.raw() + ((static_cast<std::size_t>(g) * 2 + axis) * kTaps + k) * hw;
        std::fill(dst, dst + hw, static_cast<float>(kPositionalGrid[axis][k]));
      }
    }
  }
  return p;
}

PredictorWeights make_adastn_weights(int feature_channels, std::uint64_t seed, int hidden) {
  const CounterRng rng(seed, 0xada5);
  PredictorWeights w;
  w.groups = 1;
  w.shared1 = Conv2dWeights::he_uniform(hidden, 2 * feature_channels, 3, rng.child(1));
  w.shared2 = Conv2dWeights::he_uniform(hidden, hidden, 3, rng.child(2));
  w.translation = Conv2dWeights::zeros(2, hidden);
  return w;
}

PredictorWeights make_adastn_v2_weights(int feature_channels, int groups, std::uint64_t seed,
                                        int hidden) {
  if (groups < 1) throw InvalidArgument("adastn v2: groups must be >= 1");
  PredictorWeights w = make_adastn_weights(feature_channels, seed, hidden);
  w.groups = groups;
  w.translation = Conv2dWeights::zeros(2 * groups, hidden);
  Conv2dWeights affine = Conv2dWeights::zeros(4 * groups, hidden);
  for (int g = 0; g < groups; ++g) {
    affine.bias[4 * g + 0] = 1.0f;
    affine.bias[4 * g + 3] = 1.0f;
  }
  w.affine = std::move(affine);
  Conv2dWeights mask = Conv2dWeights::zeros(kTaps * groups, hidden);
  for (std::size_t i = 0; i < mask.bias.size(); ++i) mask.bias[i] = kMaskInitBias;
  w.mask = std::move(mask);
  return w;
}

Tensor offsets_from_affine(const AffineField& af) {
  const Tensor& A = af.A;
  const Tensor& b = af.b;
  if (A.rank() != 5 || A.dim(1) != 2 || A.dim(2) != 2) {
    throw ShapeError("offsets_from_affine: A must be (n,2,2,H,W), got " + shape_to_string(A.dims()));
  }
  if (b.rank() != 5 || b.dim(0) != A.dim(0) || b.dim(1) != 2 || b.dim(2) != 1 ||
      b.dim(3) != A.dim(3) || b.dim(4) != A.dim(4)) {
    throw ShapeError("offsets_from_affine: b must be (n,2,1,H,W) matching A, got " +
                     shape_to_string(b.dims()));
  }
  const int n = A.dim(0), h = A.dim(3), w = A.dim(4);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  Tensor P({n, 2, kTaps, h, w});
  for (int g = 0; g < n; ++g) {
    const float* a = A.raw() + static_cast<std::size_t>(g) * 4 * hw;
    const float* t = b.raw() + static_cast<std::size_t>(g) * 2 * hw;
    for (int row = 0; row < 2; ++row) {
      const float* a0 = a + (row * 2 + 0) * hw;
      const float* a1 = a + (row * 2 + 1) * hw;
      const float* tr = t + row * hw;
      for (int k = 0; k < kTaps; ++k) {
        const float g0 = static_cast<float>(kPositionalGrid[0][k]);
        const float g1 = static_cast<float>(kPositionalGrid[1][k]);
        float* dst = P.raw() + ((static_cast<std::size_t>(g) * 2 + row) * kTaps + k) * hw;
        for (std::size_t i = 0; i < hw; ++i) dst[i] = a0[i] * g0 + a1[i] * g1 + tr[i];
      }
    }
  }
  return P;
}

FlowField adastn_predict(const Tensor& f_ref, const Tensor& f_warped, const PredictorWeights& w) {
  check_branch(w.translation, 2 * w.groups, "translation");
  const Tensor b = conv2d(trunk(f_ref, f_warped, w), w.translation);
  const int h = f_ref.height(), wd = f_ref.width();
  FlowField flow(h, wd);
  const float inv = 1.0f / static_cast<float>(w.groups);
  for (int g = 0; g < w.groups; ++g) {
    const auto by = b.plane(2 * g);
    const auto bx = b.plane(2 * g + 1);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < wd; ++x) {
        flow.dx(y, x) += bx[y * wd + x];
        flow.dy(y, x) += by[y * wd + x];
      }
    }
  }
  if (w.groups > 1) {
    for (float& v : flow.tensor_mut().data()) v *= inv;
  }
  if (!flow.tensor().all_finite()) throw NonFiniteError("adastn: non-finite residual flow");
  return flow;
}

AffineField adastn_v2_affine(const Tensor& f_ref, const Tensor& f_warped, const PredictorWeights& w) {
  if (!w.affine) throw InvalidArgument("adastn v2: weights have no affine branch");
  check_branch(w.translation, 2 * w.groups, "translation");
  check_branch(*w.affine, 4 * w.groups, "affine");
  return affine_branches(trunk(f_ref, f_warped, w), w);
}

DeformParams adastn_v2_predict(const Tensor& f_ref, const Tensor& f_warped,
                               const PredictorWeights& w) {
  if (!w.is_v2()) throw InvalidArgument("adastn v2: weights lack affine or mask branch");
  const int n = w.groups;
  check_branch(w.translation, 2 * n, "translation");
  check_branch(*w.affine, 4 * n, "affine");
  check_branch(*w.mask, kTaps * n, "mask");
  const Tensor hidden = trunk(f_ref, f_warped, w);
  Tensor masks = conv2d(hidden, *w.mask);
  // Saturated sigmoids would round to exactly 0 or 1 in float32.
  for (float& v : masks.data()) {
    v = std::clamp(1.0f / (1.0f + std::exp(-v)), kMaskFloor, 1.0f - kMaskFloor);
  }
  return {offsets_from_affine(affine_branches(hidden, w)),
          masks.reshaped({n, kTaps, f_ref.height(), f_ref.width()})};
}

}  // namespace alignkit

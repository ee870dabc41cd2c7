#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "alignkit/conv.hpp"
#include "alignkit/tensor.hpp"

namespace alignkit {

// Offset coordinates follow the grid's row order: index 0 is vertical (y),
// index 1 horizontal (x). Tap k sits at kernel position (k / 3, k % 3), which
// is the usual deformable-convolution layout.

/// The 2x9 positional grid: row 0 is the vertical offset of each 3x3 tap,
/// row 1 the horizontal offset.
inline constexpr std::array<std::array<int, 9>, 2> kPositionalGrid = {{
    {-1, -1, -1, 0, 0, 0, 1, 1, 1},
    {-1, 0, 1, -1, 0, 1, -1, 0, 1},
}};

inline constexpr int kTaps = 9;

/// Per-pixel, per-group affine transforms: A (n,2,2,H,W), b (n,2,1,H,W).
struct AffineField {
  Tensor A;
  Tensor b;
  int groups() const { return A.dim(0); }
};

/// Absolute sampling pattern per tap (n,2,9,H,W) and modulation masks
/// (n,9,H,W) in (0,1).
struct DeformParams {
  Tensor offsets;
  Tensor masks;
  int groups() const { return offsets.dim(0); }
  int height() const { return offsets.dim(3); }
  int width() const { return offsets.dim(4); }

  /// Plain-convolution pattern (offsets = grid) with every mask at `mask`.
  static DeformParams identity(int groups, int height, int width, float mask = 1.0f);
};

/// Small convolutional head shared by AdaSTN and AdaSTN v2.
///
/// Input is concat(reference feature, warped feature). Two shared 3x3
/// conv + ReLU layers, then per-branch 3x3 heads: translation b (2n
/// channels, ordered y then x per group), affine A (4n, row-major 2x2 per
/// group) and masks (9n). AdaSTN v1 has only the translation branch.
struct PredictorWeights {
  int groups = 1;
  Conv2dWeights shared1;
  Conv2dWeights shared2;
  Conv2dWeights translation;
  std::optional<Conv2dWeights> affine;
  std::optional<Conv2dWeights> mask;

  int feature_channels() const { return shared1.in_channels() / 2; }
  bool is_v2() const { return affine.has_value() && mask.has_value(); }
};

inline constexpr float kMaskInitBias = 7.0f;

/// AdaSTN (v1) head with He-uniform shared layers drawn from `seed` and a
/// zero translation branch.
PredictorWeights make_adastn_weights(int feature_channels, std::uint64_t seed, int hidden = 64);

/// AdaSTN v2 head. Branch layers start at identity A, zero b and mask bias
/// +7, so the deformable stage reduces to a plain convolution.
PredictorWeights make_adastn_v2_weights(int feature_channels, int groups, std::uint64_t seed,
                                        int hidden = 64);

/// P = A G + b for every group and pixel; returns (n,2,9,H,W).
Tensor offsets_from_affine(const AffineField& af);

/// Residual flow: the translation branch averaged over groups.
FlowField adastn_predict(const Tensor& f_ref, const Tensor& f_warped, const PredictorWeights& w);

/// Offsets and sigmoid masks from the affine, translation and mask branches.
DeformParams adastn_v2_predict(const Tensor& f_ref, const Tensor& f_warped,
                               const PredictorWeights& w);

/// Affine field straight from the v2 branches (A and b before composing
/// with the grid).
AffineField adastn_v2_affine(const Tensor& f_ref, const Tensor& f_warped, const PredictorWeights& w);

}  // namespace alignkit

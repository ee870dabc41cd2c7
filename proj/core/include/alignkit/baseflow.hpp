#pragma once

#include "alignkit/tensor.hpp"

namespace alignkit {

/// Pyramidal Lucas-Kanade settings.
struct FlowEstimatorConfig {
  int levels = 3;           ///< pyramid depth, >= 1
  int iters_per_level = 10; ///< Gauss-Newton refinements per level
  int window = 7;           ///< odd side of the uniform local window, >= 3
  /// Map both frames onto a shared global mean and contrast first. Needed
  /// when the frames come from different devices.
  bool match_photometry = false;

  void validate() const;
  /// Smallest frame extent the configuration accepts.
  int min_extent() const { return (1 << (levels - 1)) * window; }
  /// Copy with `levels` lowered until frames of (h, w) are accepted.
  /// Throws InvalidArgument if even a single level does not fit.
  FlowEstimatorConfig fitted_to(int height, int width) const;
};

struct FlowEstimate {
  FlowField flow;
  /// Set when an input is constant; the flow is then all zeros.
  bool low_texture = false;
};

/// Backward flow from `a` to `b`: warp(b, flow) approximates a.
/// Inputs with three channels are reduced to luma first.
FlowEstimate estimate_base_flow(const Tensor& a, const Tensor& b,
                                const FlowEstimatorConfig& cfg = {});

/// Exhaustive integer SAD search over [-radius, radius]^2 with a
/// (2*patch_radius+1)^2 patch. Ties go to the smallest |d|^2, then to the
/// lexicographically smallest (dy, dx).
FlowField block_match_flow(const Tensor& a, const Tensor& b, int radius, int patch_radius = 3);

/// Mean Euclidean endpoint error over pixels where `valid_mask` (1,H,W) is
/// non-zero. A default-constructed mask means "all pixels".
double endpoint_error(const FlowField& est, const FlowField& gt, const Tensor& valid_mask = {});

/// 0.299 R + 0.587 G + 0.114 B for three channels, the channel mean
/// otherwise. Returns (1,H,W).
Tensor to_luma(const Tensor& img);

}  // namespace alignkit

#pragma once

#include "alignkit/baseflow.hpp"
#include "alignkit/tensor.hpp"

namespace alignkit {

/// Per-channel guided filter. Window statistics are box means over the
/// (2*radius+1)^2 window truncated at the borders. A single-channel guide
/// is shared by every source channel; otherwise channels pair up.
Tensor guided_filter(const Tensor& guide, const Tensor& src, int radius, float eps);

struct ColorCorrectParams {
  int radius = 16;
  float eps = 1e-6f;
};

/// Moves the colors of the HR frame y onto those of the LR frame x while
/// keeping y's detail: each y channel is the guide of a filter whose
/// source is x upsampled by `scale`.
Tensor color_correct(const Tensor& x, const Tensor& y, int scale, const ColorCorrectParams& p = {});

struct RectifyOptions {
  bool color = true;
  bool position = true;
  ColorCorrectParams color_params;
  FlowEstimatorConfig flow{.match_photometry = true};
};

struct RectifiedTarget {
  Tensor y_w;      ///< (3, rH, rW)
  Tensor mask;     ///< (1, rH, rW), values in {0, 1}
  FlowField flow;  ///< LR-scale flow from x into y
  bool low_texture = false;
};

/// 1 where p + flow(p) lies inside the frame, taken as [-0.5, W - 0.5] x
/// [-0.5, H - 0.5], else 0. Returns (1,H,W).
Tensor out_of_bounds_mask(const FlowField& flow);

/// Aligns y to x with a flow estimated between x and downsampled y, then
/// color corrects the aligned frame. Either step can be switched off.
RectifiedTarget rectify_target(const Tensor& x, const Tensor& y, int scale,
                               const RectifyOptions& opt = {});

/// mean over every element of |m * (pred - target)|. `mask` is either
/// (1,H,W), broadcast over channels, or the same extents as pred.
double masked_l1(const Tensor& pred, const Tensor& target, const Tensor& mask);

}  // namespace alignkit

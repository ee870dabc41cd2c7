#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "alignkit/adastn.hpp"
#include "alignkit/baseflow.hpp"
#include "alignkit/conv.hpp"
#include "alignkit/tensor.hpp"

namespace alignkit {

/// Level 0 is full resolution; each next level is resize(Half) of the
/// previous one.
struct FeaturePyramid {
  std::vector<Tensor> levels;

  int size() const { return static_cast<int>(levels.size()); }
  const Tensor& operator[](int l) const { return levels.at(l); }
};

FeaturePyramid build_pyramid(const Tensor& f, int levels);

struct AlignConfig {
  int levels = 3;  ///< ResflowNet pyramid depth
  int groups = 4;  ///< deformable offset groups
  bool use_resflow = true;
  bool use_deform = true;
  FlowEstimatorConfig flow;

  void validate() const;
};

/// DeformNet parameters: the AdaSTN v2 head and the deformable conv.
struct DeformNetWeights {
  PredictorWeights offset_head;
  Conv2dWeights dcn;  ///< (C', C, 3, 3), no conv groups
};

struct AlignWeights {
  std::vector<PredictorWeights> resflow;  ///< one AdaSTN head per level, finest first
  DeformNetWeights deform;
};

/// Initial alignment weights. `feature_channels` is the width of the
/// encoder features the predictors look at; `hidden_channels` the width of
/// the propagated state the deformable conv resamples.
AlignWeights make_align_weights(int feature_channels, int hidden_channels, const AlignConfig& cfg,
                                std::uint64_t seed, int predictor_hidden = 64);

/// Every conv layer of the alignment weights under a dotted name, in a
/// fixed order. Used for archives and parameter selection.
std::vector<std::pair<std::string, Conv2dWeights*>> named_layers(AlignWeights& w,
                                                                 const std::string& prefix);

/// Deformable conv weights that copy each channel through its centre tap.
Conv2dWeights identity_dcn(int channels);

/// Coarse-to-fine residual flow. Returns the finest-level residual; the
/// refined flow is base_flow + result.
FlowField resflownet(const FeaturePyramid& pyr_prev, const FeaturePyramid& pyr_cur,
                     const FlowField& base_flow, const std::vector<PredictorWeights>& weights);

/// Modulated deformable convolution:
///   out_o(p) = b_o + sum_{c,k} w[o,c,k] m_{g(c),k}(p) feature_c(p + P_{g(c),k}(p))
/// with bilinear sampling that reads zero outside the image.
Tensor deform_sample(const Tensor& feature, const DeformParams& params, const Conv2dWeights& weights);

/// Gradient of sum(upstream * deform_sample(...)) with respect to the masks.
Tensor deform_sample_mask_vjp(const Tensor& feature, const DeformParams& params,
                              const Conv2dWeights& weights, const Tensor& upstream);

/// Warp f_prev and h_prev with `flow`, predict offsets and masks from
/// (f_cur, warped f_prev), then deformably resample the warped h_prev.
Tensor deformnet(const Tensor& f_cur, const Tensor& f_prev, const Tensor& h_prev,
                 const FlowField& flow, const DeformNetWeights& w);

struct AlignResult {
  Tensor aligned;
  FlowField base_flow;
  FlowField residual;  ///< zero when ResflowNet is disabled
  FlowField flow;      ///< base_flow + residual
  bool low_texture = false;
};

/// Full alignment: base flow from the frames, optional ResflowNet
/// refinement, then either DeformNet or a plain warp of h_prev.
AlignResult align(const Tensor& x_prev, const Tensor& x_cur, const Tensor& f_prev,
                  const Tensor& f_cur, const Tensor& h_prev, const AlignConfig& cfg,
                  const AlignWeights& w);

/// The same with a caller-supplied base flow.
AlignResult align_with_base(const FlowField& base_flow, const Tensor& f_prev, const Tensor& f_cur,
                            const Tensor& h_prev, const AlignConfig& cfg, const AlignWeights& w);

}  // namespace alignkit

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "alignkit/conv.hpp"
#include "alignkit/multiadastn.hpp"
#include "alignkit/tensor.hpp"

namespace alignkit {

inline constexpr int kEncoderChannels = 256;
inline constexpr int kHiddenChannels = 64;
inline constexpr int kRcabCount = 30;
inline constexpr int kRcabReduction = 16;

/// conv3x3 -> ReLU -> conv3x3, gated by squeeze-excite channel attention,
/// plus the identity path.
struct RcabWeights {
  Conv2dWeights conv1;    ///< 64 -> 64, 3x3
  Conv2dWeights conv2;    ///< 64 -> 64, 3x3
  Conv2dWeights squeeze;  ///< 64 -> 4, 1x1
  Conv2dWeights excite;   ///< 4 -> 64, 1x1
};

struct PipelineWeights {
  std::vector<Conv2dWeights> encoder;  ///< 3->64->64->128->128->256, 3x3
  Conv2dWeights bridge;                ///< 256 -> 64, 1x1

  // Recurrent cells: concat(frame, aligned state) 67 -> 64, 3x3.
  Conv2dWeights cell_forward;
  Conv2dWeights cell_backward;
  AlignWeights align_forward;
  AlignWeights align_backward;
  Conv2dWeights fuse;  ///< concat(forward, backward) 128 -> 64, 1x1

  Conv2dWeights recon_in;  ///< 67 -> 64, 3x3
  std::vector<RcabWeights> rcabs;
  Conv2dWeights recon_out;  ///< 64 -> 64, 1x1

  std::vector<Conv2dWeights> up_stages;  ///< 64 -> 256 then pixel shuffle, one per x2
  Conv2dWeights up_conv;                 ///< 64 -> 64, 3x3
  Conv2dWeights up_out;                  ///< 64 -> 3, 3x3

  AlignConfig align_config;
  int predictor_hidden = 64;
};

/// Every weight set at zero. The network then reduces to bilinear
/// upsampling of each frame.
PipelineWeights make_zero_pipeline_weights(const AlignConfig& cfg = {}, int predictor_hidden = 64);

/// Deterministic random weights from `seed`. Residual branches are scaled
/// down so activations stay bounded through the 30 blocks.
PipelineWeights make_random_pipeline_weights(std::uint64_t seed, const AlignConfig& cfg = {},
                                             int predictor_hidden = 64);

std::vector<std::pair<std::string, Conv2dWeights*>> named_layers(PipelineWeights& w);

void save_pipeline_weights(const std::filesystem::path& dir, const PipelineWeights& w);
PipelineWeights load_pipeline_weights(const std::filesystem::path& dir);

Tensor rcab(const Tensor& x, const RcabWeights& w);

/// Per-frame features (256,H,W).
Tensor encode(const Tensor& x, const PipelineWeights& w);

/// concat(x, h_bar) -> conv + LeakyReLU -> RCABs -> 1x1 conv + LeakyReLU.
Tensor reconstruct(const Tensor& x, const Tensor& h_bar, const PipelineWeights& w);

/// Learned x`scale` upsampling of h plus the bilinear-upsampled frame.
Tensor upsample(const Tensor& h, const Tensor& x, int scale, const PipelineWeights& w);

/// Bidirectional recurrent super-resolution of a frame sequence.
std::vector<Tensor> vsr_forward(const std::vector<Tensor>& seq, int scale, const PipelineWeights& w);

}  // namespace alignkit

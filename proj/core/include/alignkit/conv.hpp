#pragma once

#include "alignkit/rng.hpp"
#include "alignkit/tensor.hpp"

namespace alignkit {

/// Weights of a same-size, stride-1 convolution.
///
/// `weight` is (Cout, Cin/groups, k, k) with k in {1, 3}; 3x3 kernels use a
/// zero pad of one pixel. `bias` is (Cout).
struct Conv2dWeights {
  Tensor weight;
  Tensor bias;
  int groups = 1;

  int out_channels() const { return weight.dim(0); }
  int in_channels() const { return weight.dim(1) * groups; }
  int kernel() const { return weight.dim(2); }

  /// All-zero layer of the given geometry.
  static Conv2dWeights zeros(int out_channels, int in_channels, int kernel = 3, int groups = 1);
  /// He-uniform weights scaled by `gain`, zero bias.
  static Conv2dWeights he_uniform(int out_channels, int in_channels, int kernel,
                                  const CounterRng& rng, float gain = 1.0f, int groups = 1);
};

/// Grouped cross-correlation of a (Cin,H,W) input.
Tensor conv2d(const Tensor& input, const Conv2dWeights& w);

/// Depth-to-space: out[c, s*y+dy, s*x+dx] = in[c*s*s + dy*s + dx, y, x].
Tensor pixel_shuffle(const Tensor& input, int scale);
/// Inverse of pixel_shuffle.
Tensor pixel_unshuffle(const Tensor& input, int scale);

void relu_inplace(Tensor& t);
void leaky_relu_inplace(Tensor& t, float slope = 0.1f);
void sigmoid_inplace(Tensor& t);

}  // namespace alignkit

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "alignkit/tensor.hpp"

namespace alignkit {

// Coordinates are absolute pixel positions (x, y) with pixel centres at
// integers. Out-of-range positions clamp to the edge before interpolating.

/// Bilinear interpolation of img (C,H,W) at coords (2,H',W'); coords channel
/// 0 is x, channel 1 is y. Returns (C,H',W').
Tensor bilinear_sample(const Tensor& img, const Tensor& coords);

/// Backward warp: out(x,y) = feature(x + dx, y + dy).
Tensor warp(const Tensor& feature, const FlowField& flow);

/// Gradient of sum(upstream * warp(feature, flow)) with respect to the flow.
/// Zero where the sampling position was clamped.
FlowField warp_flow_vjp(const Tensor& feature, const FlowField& flow, const Tensor& upstream);

enum class ResizeMode { Half, Double };
enum class FieldKind { Feature, Flow };

/// Bilinear resampling by a factor of two with half-pixel-centred grids.
/// Half on an odd extent first reflect-pads one row/column. For
/// FieldKind::Flow the values are scaled by the same factor so that they stay
/// in pixels of the new grid.
Tensor resize(const Tensor& t, ResizeMode mode, FieldKind kind = FieldKind::Feature);
FlowField resize(const FlowField& flow, ResizeMode mode);

/// General bilinear resize to (h, w), half-pixel-centred.
Tensor resize_to(const Tensor& t, int height, int width);
/// Resize a flow to (h, w) and multiply its values by `value_scale`.
FlowField resize_flow_to(const FlowField& flow, int height, int width, float value_scale);

/// Bilinear upsampling by an integer factor.
Tensor upsample_bilinear(const Tensor& t, int factor);
/// Mean over non-overlapping factor x factor blocks. Extents must divide.
Tensor box_downsample(const Tensor& t, int factor);

/// Single-channel mask that is 1 at least `margin` pixels from every edge.
Tensor interior_mask(int height, int width, int margin);

using ScalarOp = std::function<double(const Tensor&)>;

/// Central-difference gradient of a scalar function. The divisor is the
/// perturbation actually representable in float32, not 2*eps.
Tensor finite_diff_gradient(const ScalarOp& op, const Tensor& input, float eps);

/// Same estimate restricted to a subset of flat element indices.
std::vector<double> finite_diff_at(const ScalarOp& op, const Tensor& input,
                                   std::span<const std::size_t> indices, float eps);

}  // namespace alignkit

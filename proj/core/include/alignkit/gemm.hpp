#pragma once

#include <cstddef>

namespace alignkit {

/// Output pixels per GEMM tile in convolution-like kernels. Tiles depend only
/// on image extents, never on the worker count.
inline constexpr int kTilePixels = 4096;

/// out[i, j] = bias[i] + sum_k a[i, k] * b[k, j]. Row-major; `a` is m x k,
/// `b` is k x n, and consecutive output rows are `out_stride` floats apart.
void gemm_bias(const float* a, int m, int k, const float* b, int n, const float* bias, float* out,
               std::size_t out_stride);

}  // namespace alignkit

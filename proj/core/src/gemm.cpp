#include "alignkit/gemm.hpp"

#include <Eigen/Core>

namespace alignkit {

void gemm_bias(const float* a, int m, int k, const float* b, int n, const float* bias, float* out,
               std::size_t out_stride) {
  using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Stride = Eigen::OuterStride<>;
  Eigen::Map<const RowMat> A(a, m, k);
  Eigen::Map<const RowMat> B(b, k, n);
  Eigen::Map<RowMat, 0, Stride> C(out, m, n, Stride(static_cast<Eigen::Index>(out_stride)));
  C.noalias() = A * B;
  if (bias != nullptr) {
    for (int i = 0; i < m; ++i) C.row(i).array() += bias[i];
  }
}

}  // namespace alignkit

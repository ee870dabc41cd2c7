#pragma once

#include <string>
#include <vector>

#include "alignkit/tensor.hpp"

namespace alignkit {

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) on [0,1] data, computed in double; 99 dB when equal.
double psnr(const Tensor& a, const Tensor& b);

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Gaussian-window SSIM with dynamic range 1, averaged over every valid
/// window position and channel.
double ssim(const Tensor& a, const Tensor& b, const SsimParams& p = {});

struct MetricReport {
  std::string experiment;
  std::vector<double> psnr;
  std::vector<double> ssim;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  double wall_seconds = 0.0;
};

MetricReport evaluate_frames(const std::vector<Tensor>& pred, const std::vector<Tensor>& target,
                             const std::string& experiment = {});

}  // namespace alignkit

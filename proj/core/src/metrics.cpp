#include "alignkit/metrics.hpp"

#include <cmath>
#include <string>

namespace alignkit {

double psnr(const Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

namespace {

std::vector<double> gaussian_window(const SsimParams& p) {
  std::vector<double> w(p.window);
  const double c = (p.window - 1) / 2.0;
  double s = 0.0;
  for (int i = 0; i < p.window; ++i) s += w[i] = std::exp(-(i - c) * (i - c) / (2.0 * p.sigma * p.sigma));
  for (double& v : w) v /= s;
  return w;
}

// Separable valid-region filtering of a plane.
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int oh = h - n + 1, ow = w - n + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[i] * src[static_cast<std::size_t>(y) * w + x + i];
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b, const SsimParams& p) {
  require_chw(a, "ssim");
  require_same_dims(a, b, "ssim");
  if (p.window < 1 || p.window % 2 == 0) throw InvalidArgument("ssim: window must be odd and positive");
  if (a.height() < p.window || a.width() < p.window) {
    throw ShapeError("ssim: image " + std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                     " smaller than the " + std::to_string(p.window) + "px window");
  }
  const int h = a.height(), w = a.width();
  const std::size_t n = static_cast<std::size_t>(h) * w;
  const std::vector<double> k = gaussian_window(p);
  const double c1 = (p.k1 * 1.0) * (p.k1 * 1.0), c2 = (p.k2 * 1.0) * (p.k2 * 1.0);
  double total = 0.0;
  std::size_t count = 0;
  for (int c = 0; c < a.channels(); ++c) {
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = a.plane(c)[i];
      y[i] = b.plane(c)[i];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w, k), my = filter_valid(y, h, w, k);
    const auto sxx = filter_valid(xx, h, w, k), syy = filter_valid(yy, h, w, k), sxy = filter_valid(xy, h, w, k);
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2);
      const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
      total += num / den;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

MetricReport evaluate_frames(const std::vector<Tensor>& pred, const std::vector<Tensor>& target,
                             const std::string& experiment) {
  if (pred.size() != target.size()) {
    throw ShapeError("evaluate_frames: " + std::to_string(pred.size()) + " predictions for " +
                     std::to_string(target.size()) + " targets");
  }
  MetricReport r;
  r.experiment = experiment;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    r.psnr.push_back(psnr(pred[i], target[i]));
    r.ssim.push_back(ssim(pred[i], target[i]));
    r.mean_psnr += r.psnr.back();
    r.mean_ssim += r.ssim.back();
  }
  if (!pred.empty()) {
    r.mean_psnr /= static_cast<double>(pred.size());
    r.mean_ssim /= static_cast<double>(pred.size());
  }
  return r;
}

}  // namespace alignkit

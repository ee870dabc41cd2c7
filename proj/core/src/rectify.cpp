#include "alignkit/rectify.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "alignkit/sampling.hpp"

namespace alignkit {

namespace {

// Truncated box mean of an H x W plane, via a double-precision summed-area
// table.
class BoxMean {
 public:
  BoxMean(int h, int w, int radius) : h_(h), w_(w), r_(radius), sat_((h + 1) * static_cast<std::size_t>(w + 1)) {}

  std::vector<double> operator()(const std::vector<double>& p) {
    const std::size_t stride = w_ + 1;
    for (int y = 0; y < h_; ++y) {
      double row = 0.0;
      for (int x = 0; x < w_; ++x) {
        row += p[static_cast<std::size_t>(y) * w_ + x];
        sat_[(y + 1) * stride + x + 1] = sat_[y * stride + x + 1] + row;
      }
    }
    std::vector<double> out(p.size());
    for (int y = 0; y < h_; ++y) {
      const int y0 = std::max(0, y - r_), y1 = std::min(h_, y + r_ + 1);
      for (int x = 0; x < w_; ++x) {
        const int x0 = std::max(0, x - r_), x1 = std::min(w_, x + r_ + 1);
        const double s = sat_[y1 * stride + x1] - sat_[y0 * stride + x1] - sat_[y1 * stride + x0] +
                         sat_[y0 * stride + x0];
        out[static_cast<std::size_t>(y) * w_ + x] = s / static_cast<double>((y1 - y0) * (x1 - x0));
      }
    }
    return out;
  }

 private:
  int h_, w_, r_;
  std::vector<double> sat_;
};

std::vector<double> plane_of(const Tensor& t, int c) {
  auto p = t.plane(c);
  return {p.begin(), p.end()};
}


// Fits the per-window linear model p ~ a * fit_guide + b and applies the
// window-averaged coefficients to `apply_guide`, which may be a sharper
// image of the same extents.
Tensor apply_guided(const Tensor& fit_guide, const Tensor& apply_guide, const Tensor& src, int radius, float eps) {
  const int h = src.height(), w = src.width();
  const std::size_t n = static_cast<std::size_t>(h) * w;
  BoxMean box(h, w, radius);
  Tensor out(src.dims());
  for (int c = 0; c < src.channels(); ++c) {
    const int gc = fit_guide.channels() == 1 ? 0 : c;
    const std::vector<double> I = plane_of(fit_guide, gc);
    const std::vector<double> J = plane_of(apply_guide, gc);
    const std::vector<double> p = plane_of(src, c);
    std::vector<double> ii(n), ip(n);
    for (std::size_t i = 0; i < n; ++i) {
      ii[i] = I[i] * I[i];
      ip[i] = I[i] * p[i];
    }
    const std::vector<double> mI = box(I), mp = box(p), mII = box(ii), mIp = box(ip);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double var = mII[i] - mI[i] * mI[i];
      const double cov = mIp[i] - mI[i] * mp[i];
      a[i] = cov / (var + eps);
      b[i] = mp[i] - a[i] * mI[i];
    }
    const std::vector<double> ma = box(a), mb = box(b);
    auto dst = out.plane(c);
    for (std::size_t i = 0; i < n; ++i) dst[i] = static_cast<float>(ma[i] * J[i] + mb[i]);
  }
  return out;
}

}  // namespace

Tensor guided_filter(const Tensor& guide, const Tensor& src, int radius, float eps) {
  require_chw(guide, "guided_filter");
  require_chw(src, "guided_filter");
  require_same_hw(guide, src, "guided_filter");
  if (guide.channels() != 1 && guide.channels() != src.channels()) {
    throw ShapeError("guided_filter: guide channel axis " + std::to_string(guide.channels()) +
                     " must be 1 or match src " + std::to_string(src.channels()));
  }
  if (radius < 1) throw InvalidArgument("guided_filter: radius must be >= 1");
  if (!(eps > 0.0f)) throw InvalidArgument("guided_filter: eps must be > 0");

  return apply_guided(guide, guide, src, radius, eps);
}

Tensor color_correct(const Tensor& x, const Tensor& y, int scale, const ColorCorrectParams& p) {
  require_chw(x, "color_correct");
  require_chw(y, "color_correct");
  if (scale < 1 || y.height() != scale * x.height() || y.width() != scale * x.width()) {
    throw ShapeError("color_correct: HR " + shape_to_string(y.dims()) + " is not x" +
                     std::to_string(scale) + " of LR " + shape_to_string(x.dims()));
  }
  if (x.channels() != y.channels()) {
    throw ShapeError("color_correct: channel axis mismatch");
  }
  // Coefficients are fitted against y at x's bandwidth, so that an affine
  // color shift is undone without flattening y's detail.
  const Tensor y_low = upsample_bilinear(box_downsample(y, scale), scale);
  return apply_guided(y_low, y, upsample_bilinear(x, scale), p.radius, p.eps);
}

// A sample is inside while it lands within the footprint of an edge pixel.
Tensor out_of_bounds_mask(const FlowField& flow) {
  const int h = flow.height(), w = flow.width();
  Tensor m({1, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float sx = static_cast<float>(x) + flow.dx(y, x);
      const float sy = static_cast<float>(y) + flow.dy(y, x);
      const bool inside = sx >= -0.5f && sx <= static_cast<float>(w) - 0.5f && sy >= -0.5f &&
                          sy <= static_cast<float>(h) - 0.5f;
      m.at(0, y, x) = inside ? 1.0f : 0.0f;
    }
  }
  return m;
}

RectifiedTarget rectify_target(const Tensor& x, const Tensor& y, int scale, const RectifyOptions& opt) {
  require_chw(x, "rectify_target");
  require_chw(y, "rectify_target");
  if (scale < 1 || y.height() != scale * x.height() || y.width() != scale * x.width()) {
    throw ShapeError("rectify_target: HR " + shape_to_string(y.dims()) + " is not x" +
                     std::to_string(scale) + " of LR " + shape_to_string(x.dims()));
  }
  RectifiedTarget r;
  r.mask = Tensor({1, y.height(), y.width()}, 1.0f);
  r.flow = FlowField(x.height(), x.width());
  Tensor aligned = y;
  FlowField hr_flow(y.height(), y.width());
  if (opt.position) {
    // The estimator is insensitive to global gain, so it runs on y itself:
    // a local color fit made first would soak up part of the shift.
    const FlowEstimate est =
        estimate_base_flow(x, box_downsample(y, scale), opt.flow.fitted_to(x.height(), x.width()));
    hr_flow = resize_flow_to(est.flow, y.height(), y.width(), static_cast<float>(scale));
    aligned = warp(y, hr_flow);
    r.flow = est.flow;
    r.low_texture = est.low_texture;
  }
  r.y_w = opt.color ? color_correct(x, aligned, scale, opt.color_params) : std::move(aligned);
  if (opt.position) r.mask = out_of_bounds_mask(hr_flow);
  return r;
}

double masked_l1(const Tensor& pred, const Tensor& target, const Tensor& mask) {
  require_chw(pred, "masked_l1");
  require_same_dims(pred, target, "masked_l1");
  require_chw(mask, "masked_l1");
  require_same_hw(pred, mask, "masked_l1");
  if (mask.channels() != 1 && mask.channels() != pred.channels()) {
    throw ShapeError("masked_l1: mask channel axis must be 1 or " + std::to_string(pred.channels()));
  }
  const std::size_t hw = static_cast<std::size_t>(pred.height()) * pred.width();
  double s = 0.0;
  for (int c = 0; c < pred.channels(); ++c) {
    auto p = pred.plane(c);
    auto t = target.plane(c);
    auto m = mask.plane(mask.channels() == 1 ? 0 : c);
    for (std::size_t i = 0; i < hw; ++i) {
      s += std::abs(static_cast<double>(m[i]) * (static_cast<double>(p[i]) - t[i]));
    }
  }
  return s / static_cast<double>(pred.size());
}

}  // namespace alignkit

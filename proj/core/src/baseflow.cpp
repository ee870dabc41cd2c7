#include "alignkit/baseflow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "alignkit/parallel.hpp"
#include "alignkit/sampling.hpp"

namespace alignkit {

namespace {

constexpr float kMinEigen = 1e-6f;
constexpr float kMaxStep = 2.0f;
constexpr float kDamping = 1e-3f;

inline int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}

// Central differences with reflect padding; both outputs are (1,H,W).
void gradients(const Tensor& img, Tensor& gx, Tensor& gy) {
  const int h = img.height(), w = img.width();
  gx = Tensor({1, h, w});
  gy = Tensor({1, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      gx.at(0, y, x) = 0.5f * (img.at(0, y, reflect(x + 1, w)) - img.at(0, y, reflect(x - 1, w)));
      gy.at(0, y, x) = 0.5f * (img.at(0, reflect(y + 1, h), x) - img.at(0, reflect(y - 1, h), x));
    }
  }
}

// Uniform window mean with reflect padding, separable.
Tensor box_mean(const Tensor& src, int radius) {
  const int h = src.height(), w = src.width();
  const float inv = 1.0f / static_cast<float>(2 * radius + 1);
  Tensor tmp({1, h, w}), out({1, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int d = -radius; d <= radius; ++d) acc += src.at(0, y, reflect(x + d, w));
      tmp.at(0, y, x) = acc * inv;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int d = -radius; d <= radius; ++d) acc += tmp.at(0, reflect(y + d, h), x);
      out.at(0, y, x) = acc * inv;
    }
  }
  return out;
}

// 3x3 median of each flow component, clamped at the borders.
void median3(FlowField& flow) {
  const int h = flow.height(), w = flow.width();
  Tensor out = flow.tensor();
  float win[9];
  for (int c = 0; c < 2; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        int n = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            win[n++] = flow.tensor().at(c, std::clamp(y + dy, 0, h - 1), std::clamp(x + dx, 0, w - 1));
          }
        }
        std::nth_element(win, win + 4, win + 9);
        out.at(c, y, x) = win[4];
      }
    }
  }
  flow.tensor_mut() = std::move(out);
}

bool is_constant(const Tensor& t) {
  auto [lo, hi] = std::minmax_element(t.data().begin(), t.data().end());
  return *hi - *lo < 1e-6f;
}

// Maps both frames onto a shared mean and contrast so that a global gain or
// offset between them does not read as motion. Identical inputs stay
// identical.
void match_global_photometry(Tensor& a, Tensor& b) {
  auto stats = [](const Tensor& t) {
    const double mu = mean(t);
    double var = 0.0;
    for (float v : t.data()) var += (v - mu) * (v - mu);
    return std::pair{mu, std::sqrt(var / static_cast<double>(t.size()))};
  };
  const auto [ma, sa] = stats(a);
  const auto [mb, sb] = stats(b);
  const double mu = 0.5 * (ma + mb), sigma = 0.5 * (sa + sb);
  for (float& v : a.data()) v = static_cast<float>((v - ma) / sa * sigma + mu);
  for (float& v : b.data()) v = static_cast<float>((v - mb) / sb * sigma + mu);
}

// Gauss-Newton iterations of local least squares at one pyramid level, with
// the gradients of `a` held fixed. Samples that the current flow pushes
// outside the frame carry no weight, a small damping term keeps weakly
// textured windows from jumping, and a 3x3 median after every iteration
// stops isolated pixels from drifting off.
void refine_level(const Tensor& a, const Tensor& b, FlowField& flow, int iters, int window) {
  const int h = a.height(), w = a.width(), radius = window / 2;
  Tensor ax, ay;
  gradients(a, ax, ay);
  for (int it = 0; it < iters; ++it) {
    const Tensor bw = warp(b, flow);
    Tensor ixx({1, h, w}), ixy({1, h, w}), iyy({1, h, w}), ixt({1, h, w}), iyt({1, h, w});
    float peak = 0.0f;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const float sx = static_cast<float>(x) + flow.dx(y, x);
        const float sy = static_cast<float>(y) + flow.dy(y, x);
        if (sx < 0.0f || sx > static_cast<float>(w - 1) || sy < 0.0f || sy > static_cast<float>(h - 1)) continue;
        const float gx = ax[i];
        const float gy = ay[i];
        const float gt = bw[i] - a[i];
        ixx[i] = gx * gx;
        ixy[i] = gx * gy;
        iyy[i] = gy * gy;
        ixt[i] = gx * gt;
        iyt[i] = gy * gt;
        peak = std::max(peak, ixx[i] + iyy[i]);
      }
    }
    const Tensor sxx = box_mean(ixx, radius), sxy = box_mean(ixy, radius),
                 syy = box_mean(iyy, radius), sxt = box_mean(ixt, radius),
                 syt = box_mean(iyt, radius);
    const float damping = kDamping * peak;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const float m00 = sxx.at(0, y, x) + damping, m01 = sxy.at(0, y, x), m11 = syy.at(0, y, x) + damping;
        const float half_trace = 0.5f * (m00 + m11);
        const float disc = std::sqrt(0.25f * (m00 - m11) * (m00 - m11) + m01 * m01);
        if (half_trace - disc < kMinEigen) continue;
        const float det = m00 * m11 - m01 * m01;
        const float r0 = -sxt.at(0, y, x), r1 = -syt.at(0, y, x);
        const float ux = std::clamp((m11 * r0 - m01 * r1) / det, -kMaxStep, kMaxStep);
        const float uy = std::clamp((m00 * r1 - m01 * r0) / det, -kMaxStep, kMaxStep);
        flow.dx(y, x) += ux;
        flow.dy(y, x) += uy;
      }
    }
    median3(flow);
  }
}

}  // namespace

void FlowEstimatorConfig::validate() const {
  if (levels < 1) throw InvalidArgument("flow config: levels must be >= 1");
  if (window < 3 || window % 2 == 0) throw InvalidArgument("flow config: window must be odd and >= 3");
  if (iters_per_level < 0) throw InvalidArgument("flow config: iters_per_level must be >= 0");
}

FlowEstimatorConfig FlowEstimatorConfig::fitted_to(int height, int width) const {
  validate();
  FlowEstimatorConfig c = *this;
  while (c.levels > 1 && std::min(height, width) < c.min_extent()) --c.levels;
  if (std::min(height, width) < c.min_extent()) {
    throw InvalidArgument("flow config: frame " + std::to_string(height) + "x" +
                          std::to_string(width) + " smaller than the " +
                          std::to_string(window) + "-pixel window");
  }
  return c;
}

Tensor to_luma(const Tensor& img) {
  require_chw(img, "to_luma");
  const int c = img.channels();
  if (c == 1) return img;
  Tensor out({1, img.height(), img.width()});
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (c == 3) {
      out[i] = 0.299f * img.plane(0)[i] + 0.587f * img.plane(1)[i] + 0.114f * img.plane(2)[i];
    } else {
      float acc = 0.0f;
      for (int ch = 0; ch < c; ++ch) acc += img.plane(ch)[i];
      out[i] = acc / static_cast<float>(c);
    }
  }
  return out;
}

FlowEstimate estimate_base_flow(const Tensor& a, const Tensor& b, const FlowEstimatorConfig& cfg) {
  cfg.validate();
  require_same_dims(a, b, "estimate_base_flow");
  if (a.channels() < 1 || a.channels() > 3) {
    throw ShapeError("estimate_base_flow: channel axis must be 1..3, got " +
                     std::to_string(a.channels()));
  }
  const int h = a.height(), w = a.width();
  if (h < cfg.min_extent() || w < cfg.min_extent()) {
    throw ShapeError("estimate_base_flow: " + std::string(h < cfg.min_extent() ? "height " : "width ") +
                     std::to_string(h < cfg.min_extent() ? h : w) + " below the minimum " +
                     std::to_string(cfg.min_extent()) + " for " + std::to_string(cfg.levels) +
                     " levels");
  }
  Tensor la = to_luma(a), lb = to_luma(b);
  if (is_constant(la) || is_constant(lb)) return {FlowField(h, w), true};
  if (cfg.match_photometry) match_global_photometry(la, lb);

  std::vector<Tensor> pa{la}, pb{lb};
  for (int l = 1; l < cfg.levels; ++l) {
    pa.push_back(resize(pa.back(), ResizeMode::Half));
    pb.push_back(resize(pb.back(), ResizeMode::Half));
  }
  FlowField flow(pa.back().height(), pa.back().width());
  for (int l = cfg.levels - 1; l >= 0; --l) {
    if (flow.height() != pa[l].height() || flow.width() != pa[l].width()) {
      flow = resize_flow_to(flow, pa[l].height(), pa[l].width(), 2.0f);
    }
    refine_level(pa[l], pb[l], flow, cfg.iters_per_level, cfg.window);
  }
  return {std::move(flow), false};
}

FlowField block_match_flow(const Tensor& a, const Tensor& b, int radius, int patch_radius) {
  require_same_dims(a, b, "block_match_flow");
  if (radius < 1) throw InvalidArgument("block_match_flow: radius must be >= 1");
  if (patch_radius < 0) throw InvalidArgument("block_match_flow: patch_radius must be >= 0");
  const Tensor la = to_luma(a), lb = to_luma(b);
  const int h = la.height(), w = la.width();
  auto pa = [&](int y, int x) { return la.at(0, std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1)); };
  auto pb = [&](int y, int x) { return lb.at(0, std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1)); };

  // Candidates in tie-break order: |d|^2, then dy, then dx.
  std::vector<std::pair<int, int>> cands;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) cands.emplace_back(dy, dx);
  }
  std::stable_sort(cands.begin(), cands.end(), [](auto p, auto q) {
    return p.first * p.first + p.second * p.second < q.first * q.first + q.second * q.second;
  });

  FlowField flow(h, w);
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < w; ++x) {
      double best = std::numeric_limits<double>::infinity();
      std::pair<int, int> arg{0, 0};
      for (auto [dy, dx] : cands) {
        double sad = 0.0;
        for (int qy = -patch_radius; qy <= patch_radius; ++qy) {
          for (int qx = -patch_radius; qx <= patch_radius; ++qx) {
            sad += std::abs(pa(y + qy, x + qx) - pb(y + qy + dy, x + qx + dx));
          }
        }
        if (sad < best) {
          best = sad;
          arg = {dy, dx};
        }
      }
      flow.dx(y, x) = static_cast<float>(arg.second);
      flow.dy(y, x) = static_cast<float>(arg.first);
    }
  });
  return flow;
}

double endpoint_error(const FlowField& est, const FlowField& gt, const Tensor& valid_mask) {
  require_same_dims(est.tensor(), gt.tensor(), "endpoint_error");
  const int h = est.height(), w = est.width();
  if (!valid_mask.empty()) {
    if (valid_mask.rank() != 3 || valid_mask.channels() != 1) {
      throw ShapeError("endpoint_error: mask must be (1,H,W)");
    }
    require_same_hw(valid_mask, est.tensor(), "endpoint_error");
  }
  double total = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!valid_mask.empty() && valid_mask.at(0, y, x) == 0.0f) continue;
      const double ex = static_cast<double>(est.dx(y, x)) - gt.dx(y, x);
      const double ey = static_cast<double>(est.dy(y, x)) - gt.dy(y, x);
      total += std::sqrt(ex * ex + ey * ey);
      ++count;
    }
  }
  if (count == 0) throw InvalidArgument("endpoint_error: empty validity mask");
  return total / static_cast<double>(count);
}

}  // namespace alignkit

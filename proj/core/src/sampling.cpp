#include "alignkit/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "alignkit/parallel.hpp"

namespace alignkit {

namespace {

inline float lerp(float a, float b, float t) { return a + t * (b - a); }

struct Tap {
  int x0, x1, y0, y1;
  float fx, fy;
  bool clamped_x, clamped_y;
};

inline Tap clamp_tap(float x, float y, int w, int h) {
  Tap t{};
  const float xc = std::clamp(x, 0.0f, static_cast<float>(w - 1));
  const float yc = std::clamp(y, 0.0f, static_cast<float>(h - 1));
  t.clamped_x = xc != x;
  t.clamped_y = yc != y;
  t.x0 = static_cast<int>(std::floor(xc));
  t.y0 = static_cast<int>(std::floor(yc));
  t.x1 = std::min(t.x0 + 1, w - 1);
  t.y1 = std::min(t.y0 + 1, h - 1);
  t.fx = xc - static_cast<float>(t.x0);
  t.fy = yc - static_cast<float>(t.y0);
  return t;
}

inline float interp(const float* plane, int w, const Tap& t) {
  const float top = lerp(plane[t.y0 * w + t.x0], plane[t.y0 * w + t.x1], t.fx);
  const float bot = lerp(plane[t.y1 * w + t.x0], plane[t.y1 * w + t.x1], t.fx);
  return lerp(top, bot, t.fy);
}

void require_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) throw NonFiniteError(std::string(what) + ": non-finite coordinates");
}

// Index/weight tables for one axis of a half-pixel-centred resize.
struct AxisMap {
  std::vector<int> i0, i1;
  std::vector<float> f;
};

AxisMap axis_map(int in, int out) {
  AxisMap m;
  m.i0.resize(out);
  m.i1.resize(out);
  m.f.resize(out);
  const double ratio = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double s = (o + 0.5) * ratio - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in - 1));
    const int i0 = static_cast<int>(std::floor(s));
    m.i0[o] = i0;
    m.i1[o] = std::min(i0 + 1, in - 1);
    m.f[o] = static_cast<float>(s - i0);
  }
  return m;
}

Tensor halve(const Tensor& t) {
  const int c = t.channels(), h = t.height(), w = t.width();
  const int oh = (h + 1) / 2, ow = (w + 1) / 2;
  // Reflect index for the padded row/column on odd extents.
  auto src = [](int i, int n) { return i < n ? i : (n >= 2 ? n - 2 : n - 1); };
  Tensor out({c, oh, ow});
  for (int ch = 0; ch < c; ++ch) {
    const float* p = t.plane(ch).data();
    float* q = out.plane(ch).data();
    for (int y = 0; y < oh; ++y) {
      const int y0 = src(2 * y, h), y1 = src(2 * y + 1, h);
      for (int x = 0; x < ow; ++x) {
        const int x0 = src(2 * x, w), x1 = src(2 * x + 1, w);
        const float top = lerp(p[y0 * w + x0], p[y0 * w + x1], 0.5f);
        const float bot = lerp(p[y1 * w + x0], p[y1 * w + x1], 0.5f);
        q[y * ow + x] = lerp(top, bot, 0.5f);
      }
    }
  }
  return out;
}

}  // namespace

Tensor bilinear_sample(const Tensor& img, const Tensor& coords) {
  require_chw(img, "bilinear_sample");
  require_chw(coords, "bilinear_sample");
  if (coords.channels() != 2) {
    throw ShapeError("bilinear_sample: coords channel axis must be 2, got " +
                     std::to_string(coords.channels()));
  }
  require_finite(coords, "bilinear_sample");
  const int c = img.channels(), h = img.height(), w = img.width();
  const int oh = coords.height(), ow = coords.width();
  Tensor out({c, oh, ow});
  const float* cx = coords.plane(0).data();
  const float* cy = coords.plane(1).data();
  for (int i = 0; i < oh * ow; ++i) {
    const Tap t = clamp_tap(cx[i], cy[i], w, h);
    for (int ch = 0; ch < c; ++ch) out.plane(ch)[i] = interp(img.plane(ch).data(), w, t);
  }
  return out;
}

Tensor warp(const Tensor& feature, const FlowField& flow) {
  require_same_hw(feature, flow.tensor(), "warp");
  const int c = feature.channels(), h = feature.height(), w = feature.width();
  Tensor out({c, h, w});
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < w; ++x) {
      const Tap t = clamp_tap(static_cast<float>(x) + flow.dx(y, x),
                              static_cast<float>(y) + flow.dy(y, x), w, h);
      for (int ch = 0; ch < c; ++ch) out.at(ch, y, x) = interp(feature.plane(ch).data(), w, t);
    }
  });
  return out;
}

FlowField warp_flow_vjp(const Tensor& feature, const FlowField& flow, const Tensor& upstream) {
  require_same_hw(feature, flow.tensor(), "warp_flow_vjp");
  require_same_dims(feature, upstream, "warp_flow_vjp");
  const int c = feature.channels(), h = feature.height(), w = feature.width();
  FlowField grad(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Tap t = clamp_tap(static_cast<float>(x) + flow.dx(y, x),
                              static_cast<float>(y) + flow.dy(y, x), w, h);
      double gx = 0.0, gy = 0.0;
      for (int ch = 0; ch < c; ++ch) {
        const float* p = feature.plane(ch).data();
        const float a = p[t.y0 * w + t.x0], b = p[t.y0 * w + t.x1];
        const float cc = p[t.y1 * w + t.x0], d = p[t.y1 * w + t.x1];
        const double up = upstream.at(ch, y, x);
        // d/dx of lerp(lerp(a,b,fx), lerp(c,d,fx), fy) and the symmetric term.
        gx += up * ((1.0 - t.fy) * (b - a) + t.fy * (d - cc));
        gy += up * (lerp(cc, d, t.fx) - lerp(a, b, t.fx));
      }
      // The x1 == x0 case at the right edge has zero slope, as does clamping.
      grad.dx(y, x) = (t.clamped_x || t.x1 == t.x0) ? 0.0f : static_cast<float>(gx);
      grad.dy(y, x) = (t.clamped_y || t.y1 == t.y0) ? 0.0f : static_cast<float>(gy);
    }
  }
  return grad;
}

Tensor resize(const Tensor& t, ResizeMode mode, FieldKind kind) {
  require_chw(t, "resize");
  Tensor out = mode == ResizeMode::Half ? halve(t) : resize_to(t, 2 * t.height(), 2 * t.width());
  if (kind == FieldKind::Flow) {
    const float s = mode == ResizeMode::Half ? 0.5f : 2.0f;
    for (float& v : out.data()) v *= s;
  }
  return out;
}

FlowField resize(const FlowField& flow, ResizeMode mode) {
  return FlowField(resize(flow.tensor(), mode, FieldKind::Flow));
}

Tensor resize_to(const Tensor& t, int height, int width) {
  require_chw(t, "resize_to");
  if (height < 1 || width < 1) throw ShapeError("resize_to: target extents must be >= 1");
  const int c = t.channels(), h = t.height(), w = t.width();
  if (h == height && w == width) return t;
  const AxisMap my = axis_map(h, height), mx = axis_map(w, width);
  Tensor out({c, height, width});
  for (int ch = 0; ch < c; ++ch) {
    const float* p = t.plane(ch).data();
    float* q = out.plane(ch).data();
    for (int y = 0; y < height; ++y) {
      const float* r0 = p + my.i0[y] * w;
      const float* r1 = p + my.i1[y] * w;
      for (int x = 0; x < width; ++x) {
        const float top = lerp(r0[mx.i0[x]], r0[mx.i1[x]], mx.f[x]);
        const float bot = lerp(r1[mx.i0[x]], r1[mx.i1[x]], mx.f[x]);
        q[y * width + x] = lerp(top, bot, my.f[y]);
      }
    }
  }
  return out;
}

FlowField resize_flow_to(const FlowField& flow, int height, int width, float value_scale) {
  Tensor t = resize_to(flow.tensor(), height, width);
  if (value_scale != 1.0f) {
    for (float& v : t.data()) v *= value_scale;
  }
  return FlowField(std::move(t));
}

Tensor upsample_bilinear(const Tensor& t, int factor) {
  if (factor < 1) throw InvalidArgument("upsample_bilinear: factor must be >= 1");
  require_chw(t, "upsample_bilinear");
  return resize_to(t, t.height() * factor, t.width() * factor);
}

Tensor box_downsample(const Tensor& t, int factor) {
  require_chw(t, "box_downsample");
  if (factor < 1) throw InvalidArgument("box_downsample: factor must be >= 1");
  if (t.height() % factor != 0) {
    throw ShapeError("box_downsample: height " + std::to_string(t.height()) +
                     " not divisible by " + std::to_string(factor));
  }
  if (t.width() % factor != 0) {
    throw ShapeError("box_downsample: width " + std::to_string(t.width()) +
                     " not divisible by " + std::to_string(factor));
  }
  if (factor == 1) return t;
  const int c = t.channels(), h = t.height() / factor, w = t.width() / factor;
  const int sw = t.width();
  const float inv = 1.0f / static_cast<float>(factor * factor);
  Tensor out({c, h, w});
  for (int ch = 0; ch < c; ++ch) {
    const float* p = t.plane(ch).data();
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        float acc = 0.0f;
        for (int dy = 0; dy < factor; ++dy) {
          const float* row = p + (y * factor + dy) * sw + x * factor;
          for (int dx = 0; dx < factor; ++dx) acc += row[dx];
        }
        out.at(ch, y, x) = acc * inv;
      }
    }
  }
  return out;
}

Tensor interior_mask(int height, int width, int margin) {
  Tensor m({1, height, width});
  for (int y = margin; y < height - margin; ++y) {
    for (int x = margin; x < width - margin; ++x) m.at(0, y, x) = 1.0f;
  }
  return m;
}

namespace {

double central_difference(const ScalarOp& op, Tensor& probe, std::size_t i, float eps) {
  const float orig = probe[i];
  const float up = orig + eps;
  const float down = orig - eps;
  probe[i] = up;
  const double f_up = op(probe);
  probe[i] = down;
  const double f_down = op(probe);
  probe[i] = orig;
  if (!std::isfinite(f_up) || !std::isfinite(f_down)) {
    throw NonFiniteError("finite_diff: op returned a non-finite value at element " +
                         std::to_string(i));
  }
  return (f_up - f_down) / (static_cast<double>(up) - static_cast<double>(down));
}

}  // namespace

Tensor finite_diff_gradient(const ScalarOp& op, const Tensor& input, float eps) {
  if (!(eps > 0.0f)) throw InvalidArgument("finite_diff_gradient: eps must be > 0");
  Tensor probe = input;
  Tensor grad(input.dims());
  for (std::size_t i = 0; i < input.size(); ++i) {
    grad[i] = static_cast<float>(central_difference(op, probe, i, eps));
  }
  return grad;
}

std::vector<double> finite_diff_at(const ScalarOp& op, const Tensor& input,
                                   std::span<const std::size_t> indices, float eps) {
  if (!(eps > 0.0f)) throw InvalidArgument("finite_diff_at: eps must be > 0");
  Tensor probe = input;
  std::vector<double> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= input.size()) throw ShapeError("finite_diff_at: index out of range");
    out.push_back(central_difference(op, probe, i, eps));
  }
  return out;
}

}  // namespace alignkit

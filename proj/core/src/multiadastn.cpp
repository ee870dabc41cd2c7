#include "alignkit/multiadastn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "alignkit/gemm.hpp"
#include "alignkit/parallel.hpp"
#include "alignkit/sampling.hpp"

namespace alignkit {

namespace {

inline float lerp(float a, float b, float t) { return a + t * (b - a); }

// Bilinear read that treats everything outside the image as zero.
inline float sample_zero(const float* p, int h, int w, float y, float x) {
  const float fy0 = std::floor(y), fx0 = std::floor(x);
  const int y0 = static_cast<int>(fy0), x0 = static_cast<int>(fx0);
  const float ty = y - fy0, tx = x - fx0;
  auto at = [&](int yy, int xx) {
    return (yy >= 0 && yy < h && xx >= 0 && xx < w) ? p[yy * w + xx] : 0.0f;
  };
  if (y0 < -1 || y0 >= h || x0 < -1 || x0 >= w) return 0.0f;
  const float top = lerp(at(y0, x0), at(y0, x0 + 1), tx);
  const float bot = lerp(at(y0 + 1, x0), at(y0 + 1, x0 + 1), tx);
  return lerp(top, bot, ty);
}

void validate_deform(const Tensor& feature, const DeformParams& params, const Conv2dWeights& w) {
  require_chw(feature, "deform_sample");
  const Tensor& off = params.offsets;
  const Tensor& m = params.masks;
  if (off.rank() != 5 || off.dim(1) != 2 || off.dim(2) != kTaps) {
    throw ShapeError("deform_sample: offsets must be (n,2,9,H,W), got " + shape_to_string(off.dims()));
  }
  const int n = off.dim(0);
  if (m.rank() != 4 || m.dim(0) != n || m.dim(1) != kTaps) {
    throw ShapeError("deform_sample: mask group axis mismatch, masks " + shape_to_string(m.dims()) +
                     " vs offsets " + shape_to_string(off.dims()));
  }
  if (off.dim(3) != feature.height() || m.dim(2) != feature.height()) {
    throw ShapeError("deform_sample: height mismatch between feature and offsets/masks");
  }
  if (off.dim(4) != feature.width() || m.dim(3) != feature.width()) {
    throw ShapeError("deform_sample: width mismatch between feature and offsets/masks");
  }
  if (feature.channels() % n != 0) {
    throw ShapeError("deform_sample: channel axis " + std::to_string(feature.channels()) +
                     " not divisible by " + std::to_string(n) + " offset groups");
  }
  if (w.groups != 1 || w.kernel() != 3 || w.in_channels() != feature.channels()) {
    throw ShapeError("deform_sample: weights must be (C', " + std::to_string(feature.channels()) +
                     ", 3, 3) without conv groups, got " + shape_to_string(w.weight.dims()));
  }
}

// Masked, deformed im2col rows for output rows [y_begin, y_end): row c*9+k.
void deform_columns(const Tensor& feature, const DeformParams& params, int y_begin, int y_end,
                    std::vector<float>& cols) {
  const int c = feature.channels(), h = feature.height(), w = feature.width();
  const int n = params.groups(), per_group = c / n;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  const int npix = (y_end - y_begin) * w;
  cols.assign(static_cast<std::size_t>(c) * kTaps * npix, 0.0f);
  for (int ch = 0; ch < c; ++ch) {
    const int g = ch / per_group;
    const float* src = feature.plane(ch).data();
    for (int k = 0; k < kTaps; ++k) {
      const float* oy = params.offsets.raw() + ((static_cast<std::size_t>(g) * 2 + 0) * kTaps + k) * hw;
      const float* ox = params.offsets.raw() + ((static_cast<std::size_t>(g) * 2 + 1) * kTaps + k) * hw;
      const float* mk = params.masks.raw() + (static_cast<std::size_t>(g) * kTaps + k) * hw;
      float* dst = cols.data() + static_cast<std::size_t>(ch * kTaps + k) * npix;
      for (int y = y_begin; y < y_end; ++y) {
        for (int x = 0; x < w; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * w + x;
          dst[(y - y_begin) * w + x] =
              mk[i] * sample_zero(src, h, w, static_cast<float>(y) + oy[i], static_cast<float>(x) + ox[i]);
        }
      }
    }
  }
}

}  // namespace

FeaturePyramid build_pyramid(const Tensor& f, int levels) {
  require_chw(f, "build_pyramid");
  if (levels < 1) throw InvalidArgument("build_pyramid: levels must be >= 1");
  const int need = 1 << (levels - 1);
  if (f.height() < need || f.width() < need) {
    throw ShapeError("build_pyramid: " + std::string(f.height() < need ? "height " : "width ") +
                     std::to_string(f.height() < need ? f.height() : f.width()) +
                     " too small for " + std::to_string(levels) + " levels (need " +
                     std::to_string(need) + ")");
  }
  FeaturePyramid p;
  p.levels.push_back(f);
  for (int l = 1; l < levels; ++l) p.levels.push_back(resize(p.levels.back(), ResizeMode::Half));
  return p;
}

void AlignConfig::validate() const {
  if (levels < 1) throw InvalidArgument("align config: levels must be >= 1");
  if (groups < 1) throw InvalidArgument("align config: groups must be >= 1");
  flow.validate();
}

namespace {

void predictor_layers(PredictorWeights& p, const std::string& prefix,
                      std::vector<std::pair<std::string, Conv2dWeights*>>& out) {
  out.emplace_back(prefix + ".shared1", &p.shared1);
  out.emplace_back(prefix + ".shared2", &p.shared2);
  out.emplace_back(prefix + ".translation", &p.translation);
  if (p.affine) out.emplace_back(prefix + ".affine", &*p.affine);
  if (p.mask) out.emplace_back(prefix + ".mask", &*p.mask);
}

}  // namespace

std::vector<std::pair<std::string, Conv2dWeights*>> named_layers(AlignWeights& w,
                                                                 const std::string& prefix) {
  std::vector<std::pair<std::string, Conv2dWeights*>> out;
  for (std::size_t l = 0; l < w.resflow.size(); ++l) {
    predictor_layers(w.resflow[l], prefix + ".resflow" + std::to_string(l), out);
  }
  predictor_layers(w.deform.offset_head, prefix + ".deform.head", out);
  out.emplace_back(prefix + ".deform.dcn", &w.deform.dcn);
  return out;
}

Conv2dWeights identity_dcn(int channels) {
  Conv2dWeights w = Conv2dWeights::zeros(channels, channels, 3);
  for (int c = 0; c < channels; ++c) {
    w.weight[((static_cast<std::size_t>(c) * channels + c) * 3 + 1) * 3 + 1] = 1.0f;
  }
  return w;
}

AlignWeights make_align_weights(int feature_channels, int hidden_channels, const AlignConfig& cfg,
                                std::uint64_t seed, int predictor_hidden) {
  cfg.validate();
  if (hidden_channels % cfg.groups != 0) {
    throw InvalidArgument("align weights: hidden channels " + std::to_string(hidden_channels) +
                          " not divisible by " + std::to_string(cfg.groups) + " groups");
  }
  const CounterRng rng(seed, 0xa11);
  AlignWeights w;
  for (int l = 0; l < cfg.levels; ++l) {
    w.resflow.push_back(make_adastn_weights(feature_channels, rng.bits(l), predictor_hidden));
  }
  w.deform.offset_head =
      make_adastn_v2_weights(feature_channels, cfg.groups, rng.bits(1000), predictor_hidden);
  w.deform.dcn = Conv2dWeights::he_uniform(hidden_channels, hidden_channels, 3, rng.child(2000));
  return w;
}

FlowField resflownet(const FeaturePyramid& pyr_prev, const FeaturePyramid& pyr_cur,
                     const FlowField& base_flow, const std::vector<PredictorWeights>& weights) {
  const int levels = pyr_cur.size();
  if (pyr_prev.size() != levels) {
    throw ShapeError("resflownet: pyramid level mismatch (" + std::to_string(pyr_prev.size()) +
                     " vs " + std::to_string(levels) + ")");
  }
  if (static_cast<int>(weights.size()) != levels) {
    throw ShapeError("resflownet: " + std::to_string(weights.size()) + " predictor heads for " +
                     std::to_string(levels) + " levels");
  }
  require_same_hw(pyr_cur[0], base_flow.tensor(), "resflownet");

  std::vector<FlowField> base{base_flow};
  for (int l = 1; l < levels; ++l) base.push_back(resize(base.back(), ResizeMode::Half));

  FlowField residual;
  for (int l = levels - 1; l >= 0; --l) {
    require_same_dims(pyr_prev[l], pyr_cur[l], "resflownet");
    const int h = pyr_cur[l].height(), w = pyr_cur[l].width();
    FlowField up = l == levels - 1 ? FlowField(h, w) : resize_flow_to(residual, h, w, 2.0f);
    const FlowField coarse = base[l] + up;
    const Tensor warped = warp(pyr_prev[l], coarse);
    const FlowField fine = adastn_predict(pyr_cur[l], warped, weights[l]);
    residual = up + fine;
  }
  return residual;
}

Tensor deform_sample(const Tensor& feature, const DeformParams& params, const Conv2dWeights& weights) {
  validate_deform(feature, params, weights);
  const int c = feature.channels(), h = feature.height(), w = feature.width();
  const int cout = weights.out_channels(), kdim = c * kTaps;
  Tensor out({cout, h, w});
  const int rows_per_tile = std::max(1, kTilePixels / w);
  const int tiles = (h + rows_per_tile - 1) / rows_per_tile;
  parallel_for(static_cast<std::size_t>(tiles), [&](std::size_t tile) {
    const int y_begin = static_cast<int>(tile) * rows_per_tile;
    const int y_end = std::min(h, y_begin + rows_per_tile);
    std::vector<float> cols;
    deform_columns(feature, params, y_begin, y_end, cols);
    gemm_bias(weights.weight.raw(), cout, kdim, cols.data(), (y_end - y_begin) * w,
              weights.bias.raw(), out.raw() + static_cast<std::size_t>(y_begin) * w,
              static_cast<std::size_t>(h) * w);
  });
  return out;
}

Tensor deform_sample_mask_vjp(const Tensor& feature, const DeformParams& params,
                              const Conv2dWeights& weights, const Tensor& upstream) {
  validate_deform(feature, params, weights);
  const int c = feature.channels(), h = feature.height(), w = feature.width();
  const int cout = weights.out_channels(), n = params.groups(), per_group = c / n;
  if (upstream.rank() != 3 || upstream.channels() != cout) {
    throw ShapeError("deform_sample_mask_vjp: upstream channel axis must be " + std::to_string(cout));
  }
  require_same_hw(upstream, feature, "deform_sample_mask_vjp");
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  Tensor grad({n, kTaps, h, w});
  for (int ch = 0; ch < c; ++ch) {
    const int g = ch / per_group;
    const float* src = feature.plane(ch).data();
    for (int k = 0; k < kTaps; ++k) {
      const float* oy = params.offsets.raw() + ((static_cast<std::size_t>(g) * 2 + 0) * kTaps + k) * hw;
      const float* ox = params.offsets.raw() + ((static_cast<std::size_t>(g) * 2 + 1) * kTaps + k) * hw;
      float* dst = grad.raw() + (static_cast<std::size_t>(g) * kTaps + k) * hw;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * w + x;
          double up = 0.0;
          for (int o = 0; o < cout; ++o) {
            up += static_cast<double>(upstream.plane(o)[i]) *
                  weights.weight[(static_cast<std::size_t>(o) * c + ch) * kTaps + k];
          }
          const float v = sample_zero(src, h, w, static_cast<float>(y) + oy[i], static_cast<float>(x) + ox[i]);
          dst[i] += static_cast<float>(up * v);
        }
      }
    }
  }
  return grad;
}

Tensor deformnet(const Tensor& f_cur, const Tensor& f_prev, const Tensor& h_prev,
                 const FlowField& flow, const DeformNetWeights& w) {
  require_same_hw(f_cur, h_prev, "deformnet");
  const Tensor f_warped = warp(f_prev, flow);
  const Tensor h_warped = warp(h_prev, flow);
  const DeformParams params = adastn_v2_predict(f_cur, f_warped, w.offset_head);
  return deform_sample(h_warped, params, w.dcn);
}

AlignResult align_with_base(const FlowField& base_flow, const Tensor& f_prev, const Tensor& f_cur,
                            const Tensor& h_prev, const AlignConfig& cfg, const AlignWeights& w) {
  cfg.validate();
  require_same_dims(f_prev, f_cur, "align");
  require_same_hw(f_cur, base_flow.tensor(), "align");
  require_same_hw(f_cur, h_prev, "align");
  AlignResult r;
  r.base_flow = base_flow;
  r.residual = FlowField(f_cur.height(), f_cur.width());
  if (cfg.use_resflow) {
    r.residual = resflownet(build_pyramid(f_prev, cfg.levels), build_pyramid(f_cur, cfg.levels),
                            base_flow, w.resflow);
    r.flow = base_flow + r.residual;
  } else {
    r.flow = base_flow;
  }
  r.aligned = cfg.use_deform ? deformnet(f_cur, f_prev, h_prev, r.flow, w.deform)
                             : warp(h_prev, r.flow);
  return r;
}

AlignResult align(const Tensor& x_prev, const Tensor& x_cur, const Tensor& f_prev,
                  const Tensor& f_cur, const Tensor& h_prev, const AlignConfig& cfg,
                  const AlignWeights& w) {
  cfg.validate();
  require_same_dims(x_prev, x_cur, "align");
  const FlowEstimatorConfig flow_cfg = cfg.flow.fitted_to(x_cur.height(), x_cur.width());
  // Backward flow from the current frame into the neighbour.
  FlowEstimate base = estimate_base_flow(x_cur, x_prev, flow_cfg);
  AlignResult r = align_with_base(base.flow, f_prev, f_cur, h_prev, cfg, w);
  r.low_texture = base.low_texture;
  return r;
}

}  // namespace alignkit

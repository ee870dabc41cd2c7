#include "alignkit/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "alignkit/baseflow.hpp"
#include "alignkit/rectify.hpp"
#include "alignkit/rng.hpp"
#include "alignkit/sampling.hpp"

namespace alignkit {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

FlowField with_bias(const FlowField& f, const std::array<float, 2>& bias) {
  return f + FlowField::uniform(f.height(), f.width(), bias[0], bias[1]);
}

double interior_error(const Tensor& a, const Tensor& b, int margin, bool squared) {
  const int h = a.height(), w = a.width();
  double s = 0.0;
  std::size_t n = 0;
  for (int c = 0; c < a.channels(); ++c) {
    for (int y = margin; y < h - margin; ++y) {
      for (int x = margin; x < w - margin; ++x) {
        const double d = static_cast<double>(a.at(c, y, x)) - b.at(c, y, x);
        s += squared ? d * d : std::abs(d);
        ++n;
      }
    }
  }
  if (n == 0) throw InvalidArgument("alignment error: margin leaves no interior pixels");
  return s / static_cast<double>(n);
}

double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4});
}

}  // namespace

std::vector<AlignPair> make_align_pairs(const AlignBenchConfig& cfg, int count, std::uint64_t stream) {
  const CounterRng rng(cfg.seed, 0xa1b0 + stream);
  const FlowEstimatorConfig flow_cfg = cfg.align.flow.fitted_to(cfg.size, cfg.size);
  std::vector<AlignPair> pairs;
  for (int i = 0; i < count; ++i) {
    SceneParams sp;
    sp.seed = rng.bits(4 * i);
    sp.height = sp.width = cfg.size;
    sp.frames = 2;
    const double radius = cfg.max_shift * std::sqrt(rng.uniform(4 * i + 1));
    const double angle = rng.uniform(4 * i + 2, 0.0, 2.0 * std::numbers::pi);
    sp.velocity = {radius * std::cos(angle), radius * std::sin(angle)};
    const Scene s = make_scene(sp);
    AlignPair p{s.frames[0], s.frames[1], s.flows[0], {}};
    p.base = with_bias(estimate_base_flow(p.cur, p.prev, flow_cfg).flow, cfg.bias);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<AlignPair> pairs_from_dataset(const PairedSequence& seq, const AlignBenchConfig& cfg) {
  std::vector<AlignPair> pairs;
  for (std::size_t t = 0; t < seq.flows.size() && t + 1 < seq.lr.size(); ++t) {
    AlignPair p{seq.lr[t], seq.lr[t + 1], seq.flows[t], {}};
    const FlowEstimatorConfig flow_cfg = cfg.align.flow.fitted_to(p.cur.height(), p.cur.width());
    p.base = with_bias(estimate_base_flow(p.cur, p.prev, flow_cfg).flow, cfg.bias);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

double refined_epe(const std::vector<AlignPair>& pairs, const AlignWeights& w, const AlignBenchConfig& cfg) {
  double total = 0.0;
  for (const AlignPair& p : pairs) {
    FlowField flow = p.base;
    if (cfg.align.use_resflow) {
      flow = flow + resflownet(build_pyramid(p.prev, cfg.align.levels), build_pyramid(p.cur, cfg.align.levels),
                               p.base, w.resflow);
    }
    total += endpoint_error(flow, p.gt, interior_mask(p.cur.height(), p.cur.width(), cfg.margin));
  }
  return total / static_cast<double>(pairs.size());
}

namespace {

double mean_alignment_error(const std::vector<AlignPair>& pairs, const AlignWeights& w, const AlignConfig& align,
                            int margin, bool squared) {
  if (pairs.empty()) throw InvalidArgument("alignment error: no pairs");
  double total = 0.0;
  for (const AlignPair& p : pairs) {
    const AlignResult r = align_with_base(p.base, p.prev, p.cur, p.prev, align, w);
    total += interior_error(r.aligned, p.cur, margin, squared);
  }
  return total / static_cast<double>(pairs.size());
}

}  // namespace

FitConfig default_deform_fit() {
  FitConfig c;
  c.step = 0.005;
  c.perturbation = 0.01;
  c.objective = FitObjective::Mse;
  return c;
}

double alignment_error(const std::vector<AlignPair>& pairs, const AlignWeights& w,
                       const AlignConfig& align, int margin) {
  return mean_alignment_error(pairs, w, align, margin, false);
}

double alignment_mse(const std::vector<AlignPair>& pairs, const AlignWeights& w, const AlignConfig& align,
                     int margin) {
  return mean_alignment_error(pairs, w, align, margin, true);
}

AlignWeights make_bench_weights(const AlignBenchConfig& cfg) {
  AlignWeights w = make_align_weights(3, 3, cfg.align, cfg.seed, cfg.predictor_hidden);
  w.deform.dcn = identity_dcn(3);
  return w;
}

AblationReport run_alignment_ablation(const std::vector<AlignPair>& train, const std::vector<AlignPair>& test,
                                      const AlignBenchConfig& cfg) {
  if (train.empty() || test.empty()) throw InvalidArgument("ablation: need training and test pairs");
  const auto t0 = std::chrono::steady_clock::now();
  AlignWeights w = make_bench_weights(cfg);
  AblationReport rep;

  AlignConfig resflow_only = cfg.align;
  resflow_only.use_resflow = true;
  resflow_only.use_deform = false;
  AlignBenchConfig resflow_cfg = cfg;
  resflow_cfg.align = resflow_only;
  {
    ParameterView view = alignment_parameters(w, cfg.scope, true, false);
    auto objective = [&] {
      switch (cfg.resflow_fit.objective) {
        case FitObjective::Epe: return refined_epe(train, w, resflow_cfg);
        case FitObjective::Mse: return alignment_mse(train, w, resflow_only, cfg.margin);
        default: return alignment_error(train, w, resflow_only, cfg.margin);
      }
    };
    rep.resflow_fit = fit_predictors(objective, view, cfg.resflow_fit);
  }

  AlignConfig both = cfg.align;
  both.use_resflow = true;
  both.use_deform = true;
  {
    ParameterView view = alignment_parameters(w, cfg.scope, false, true);
    auto objective = [&] {
      return cfg.deform_fit.objective == FitObjective::Mse ? alignment_mse(train, w, both, cfg.margin)
                                                           : alignment_error(train, w, both, cfg.margin);
    };
    rep.deform_fit = fit_predictors(objective, view, cfg.deform_fit);
  }

  AlignConfig base_only = cfg.align;
  base_only.use_resflow = false;
  base_only.use_deform = false;
  AlignBenchConfig base_cfg = cfg;
  base_cfg.align = base_only;
  for (const auto& [name, ac, bc] : {std::tuple{"base", base_only, base_cfg},
                                     std::tuple{"+resflow", resflow_only, resflow_cfg},
                                     std::tuple{"+resflow+deform", both, resflow_cfg}}) {
    rep.rows.push_back({name, ac.use_resflow, ac.use_deform, refined_epe(test, w, bc),
                        alignment_error(test, w, ac, cfg.margin)});
  }
  rep.seconds = seconds_since(t0);
  return rep;
}

PairedSequence make_rectify_pairs(const RectifyBenchConfig& cfg) {
  SceneParams sp;
  sp.seed = cfg.seed;
  sp.height = sp.width = cfg.lr_size * cfg.scale;
  sp.frames = cfg.pairs;
  sp.velocity = {1.5 * cfg.scale, 0.75 * cfg.scale};
  sp.min_period = 4.0 * cfg.scale;
  sp.max_period = 24.0 * cfg.scale;
  // Few sinusoids keep the contrast high enough that positional error is
  // visible next to the color error.
  sp.waves = 4;
  DegradeParams d;
  d.focal_crop = 1.0;
  d.scale = cfg.scale;
  // The HR branch is brighter than the LR branch by `gain`; expressed
  // as an LR gain so the targets carry the LR colors.
  d.gain.fill(1.0f / cfg.gain);
  d.misalign = cfg.misalign;
  d.seed = cfg.seed;
  return degrade(make_scene(sp), d);
}

RectifyReport run_rectify_experiment(const PairedSequence& seq) {
  const auto t0 = std::chrono::steady_clock::now();
  const int r = seq.params.scale;
  struct Variant {
    const char* name;
    bool color, position;
  };
  const Variant variants[] = {{"neither", false, false}, {"color", true, false}, {"position", false, true}, {"both", true, true}};
  std::vector<std::vector<RectifiedTarget>> out(4);
  for (std::size_t t = 0; t < seq.lr.size(); ++t) {
    for (int v = 0; v < 4; ++v) {
      RectifyOptions opt;
      opt.color = variants[v].color;
      opt.position = variants[v].position;
      out[v].push_back(rectify_target(seq.lr[t], seq.hr[t], r, opt));
    }
  }
  RectifyReport rep;
  for (int v = 0; v < 4; ++v) {
    double total = 0.0;
    for (std::size_t t = 0; t < seq.lr.size(); ++t) {
      // Shared support: pixels every position-corrected variant keeps.
      Tensor mask = out[2][t].mask;
      for (std::size_t i = 0; i < mask.size(); ++i) mask[i] *= out[3][t].mask[i];
      total += masked_l1(out[v][t].y_w, seq.targets[t], mask);
    }
    rep.rows.push_back({variants[v].name, variants[v].color, variants[v].position,
                        total / static_cast<double>(seq.lr.size())});
  }
  rep.ratio = rep.rows[3].masked_l1 / rep.rows[0].masked_l1;
  rep.seconds = seconds_since(t0);
  return rep;
}

GradcheckReport run_gradcheck(int points, std::uint64_t seed) {
  if (points < 2) throw InvalidArgument("gradcheck: need at least 2 points");
  const auto t0 = std::chrono::steady_clock::now();
  const CounterRng rng(seed, 0x96ad);
  GradcheckReport rep;
  rep.points = points;
  const int warp_points = points / 2, deform_points = points - warp_points;

  // Warp with respect to the flow. Flows keep their fractional parts away
  // from the bilinear kinks so the central difference stays on one piece.
  {
    const int c = 3, h = 24, w = 24, margin = 4;
    Tensor feature({c, h, w}), upstream({c, h, w}), flow({2, h, w});
    const CounterRng r = rng.child(1);
    for (std::size_t i = 0; i < feature.size(); ++i) feature[i] = static_cast<float>(r.uniform(i));
    for (std::size_t i = 0; i < upstream.size(); ++i) upstream[i] = static_cast<float>(r.uniform(1000000 + i, -1.0, 1.0));
    for (std::size_t i = 0; i < flow.size(); ++i) {
      flow[i] = static_cast<float>(std::floor(r.uniform(2000000 + i, -2.0, 2.0)) + r.uniform(3000000 + i, 0.2, 0.8));
    }
    const FlowField ff(flow);
    const FlowField analytic = warp_flow_vjp(feature, ff, upstream);
    ScalarOp op = [&](const Tensor& f) {
      const Tensor out = warp(feature, FlowField(f));
      double s = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) s += static_cast<double>(out[i]) * upstream[i];
      return s;
    };
    std::vector<std::size_t> idx;
    for (int k = 0; k < warp_points; ++k) {
      const int ch = static_cast<int>(r.bits(4000000 + k) % 2);
      const int y = margin + static_cast<int>(r.bits(5000000 + k) % (h - 2 * margin));
      const int x = margin + static_cast<int>(r.bits(6000000 + k) % (w - 2 * margin));
      idx.push_back((static_cast<std::size_t>(ch) * h + y) * w + x);
    }
    const std::vector<double> fd = finite_diff_at(op, flow, idx, 1e-2f);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      rep.warp_max_rel_error = std::max(rep.warp_max_rel_error, rel_error(fd[k], analytic.tensor()[idx[k]]));
    }
  }

  // Deformable sampling with respect to the masks (linear, so any step works).
  {
    const int c = 4, n = 2, h = 16, w = 16, cout = 5, margin = 3;
    const CounterRng r = rng.child(2);
    Tensor feature({c, h, w}), upstream({cout, h, w});
    for (std::size_t i = 0; i < feature.size(); ++i) feature[i] = static_cast<float>(r.uniform(i));
    for (std::size_t i = 0; i < upstream.size(); ++i) upstream[i] = static_cast<float>(r.uniform(1000000 + i, -1.0, 1.0));
    DeformParams params = DeformParams::identity(n, h, w);
    for (std::size_t i = 0; i < params.offsets.size(); ++i) params.offsets[i] += static_cast<float>(r.uniform(2000000 + i, -1.5, 1.5));
    for (std::size_t i = 0; i < params.masks.size(); ++i) params.masks[i] = static_cast<float>(r.uniform(3000000 + i, 0.2, 0.8));
    Conv2dWeights weights = Conv2dWeights::he_uniform(cout, c, 3, r.child(9));
    const Tensor analytic = deform_sample_mask_vjp(feature, params, weights, upstream);
    ScalarOp op = [&](const Tensor& m) {
      const DeformParams p{params.offsets, m};
      const Tensor out = deform_sample(feature, p, weights);
      double s = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) s += static_cast<double>(out[i]) * upstream[i];
      return s;
    };
    std::vector<std::size_t> idx;
    for (int k = 0; k < deform_points; ++k) {
      const int g = static_cast<int>(r.bits(4000000 + k) % n);
      const int tap = static_cast<int>(r.bits(5000000 + k) % kTaps);
      const int y = margin + static_cast<int>(r.bits(6000000 + k) % (h - 2 * margin));
      const int x = margin + static_cast<int>(r.bits(7000000 + k) % (w - 2 * margin));
      idx.push_back(((static_cast<std::size_t>(g) * kTaps + tap) * h + y) * w + x);
    }
    const std::vector<double> fd = finite_diff_at(op, params.masks, idx, 5e-2f);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      rep.deform_max_rel_error = std::max(rep.deform_max_rel_error, rel_error(fd[k], analytic[idx[k]]));
    }
  }
  rep.seconds = seconds_since(t0);
  return rep;
}

}  // namespace alignkit

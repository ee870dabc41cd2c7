#include "alignkit/pipeline.hpp"

#include <string>

#include "alignkit/io.hpp"
#include "alignkit/sampling.hpp"

namespace alignkit {

namespace {

constexpr int kEncoderWidths[] = {3, 64, 64, 128, 128, 256};
constexpr int kMaxUpStages = 2;

int stages_for(int scale) {
  if (scale == 2) return 1;
  if (scale == 4) return 2;
  throw InvalidArgument("upsample: scale must be 2 or 4, got " + std::to_string(scale));
}

void require_channels(const Tensor& t, int c, const char* what) {
  require_chw(t, what);
  if (t.channels() != c) {
    throw ShapeError(std::string(what) + ": channel axis is " + std::to_string(t.channels()) +
                     ", expected " + std::to_string(c));
  }
}

Tensor conv_lrelu(const Tensor& x, const Conv2dWeights& w) {
  Tensor y = conv2d(x, w);
  leaky_relu_inplace(y);
  return y;
}

// Shapes shared by the zero and random initialisers; `make` builds a layer.
template <class Make>
PipelineWeights build(const AlignConfig& cfg, int predictor_hidden, AlignWeights fwd,
                      AlignWeights bwd, Make&& make) {
  const int c = kHiddenChannels;
  PipelineWeights w;
  w.align_config = cfg;
  w.predictor_hidden = predictor_hidden;
  for (int i = 0; i < 5; ++i) w.encoder.push_back(make(kEncoderWidths[i + 1], kEncoderWidths[i], 3, 1.0f));
  w.bridge = make(c, kEncoderChannels, 1, 1.0f);
  w.cell_forward = make(c, c + 3, 3, 1.0f);
  w.cell_backward = make(c, c + 3, 3, 1.0f);
  w.align_forward = std::move(fwd);
  w.align_backward = std::move(bwd);
  w.fuse = make(c, 2 * c, 1, 1.0f);
  w.recon_in = make(c, c + 3, 3, 1.0f);
  for (int i = 0; i < kRcabCount; ++i) {
    RcabWeights r;
    r.conv1 = make(c, c, 3, 1.0f);
    r.conv2 = make(c, c, 3, 0.1f);
    r.squeeze = make(c / kRcabReduction, c, 1, 1.0f);
    r.excite = make(c, c / kRcabReduction, 1, 1.0f);
    w.rcabs.push_back(std::move(r));
  }
  w.recon_out = make(c, c, 1, 1.0f);
  for (int i = 0; i < kMaxUpStages; ++i) w.up_stages.push_back(make(4 * c, c, 3, 1.0f));
  w.up_conv = make(c, c, 3, 1.0f);
  w.up_out = make(3, c, 3, 0.1f);
  return w;
}

AlignWeights zero_align(const AlignConfig& cfg, int predictor_hidden) {
  AlignWeights a = make_align_weights(kHiddenChannels, kHiddenChannels, cfg, 0, predictor_hidden);
  for (auto& [name, layer] : named_layers(a, "")) {
    (void)name;
    *layer = Conv2dWeights::zeros(layer->out_channels(), layer->in_channels(), layer->kernel(),
                                  layer->groups);
  }
  return a;
}

std::vector<float> meta_values(const PipelineWeights& w) {
  const AlignConfig& c = w.align_config;
  return {static_cast<float>(c.levels),          static_cast<float>(c.groups),
          static_cast<float>(c.use_resflow),     static_cast<float>(c.use_deform),
          static_cast<float>(c.flow.levels),     static_cast<float>(c.flow.iters_per_level),
          static_cast<float>(c.flow.window),     static_cast<float>(w.predictor_hidden)};
}

}  // namespace

PipelineWeights make_zero_pipeline_weights(const AlignConfig& cfg, int predictor_hidden) {
  cfg.validate();
  return build(cfg, predictor_hidden, zero_align(cfg, predictor_hidden),
               zero_align(cfg, predictor_hidden),
               [](int out, int in, int k, float) { return Conv2dWeights::zeros(out, in, k); });
}

PipelineWeights make_random_pipeline_weights(std::uint64_t seed, const AlignConfig& cfg,
                                             int predictor_hidden) {
  cfg.validate();
  const CounterRng rng(seed, 0x5e9);
  std::uint64_t layer = 0;
  return build(cfg, predictor_hidden,
               make_align_weights(kHiddenChannels, kHiddenChannels, cfg, rng.bits(1u << 20), predictor_hidden),
               make_align_weights(kHiddenChannels, kHiddenChannels, cfg, rng.bits(1u << 21), predictor_hidden),
               [&](int out, int in, int k, float gain) {
                 return Conv2dWeights::he_uniform(out, in, k, rng.child(layer++), gain);
               });
}

std::vector<std::pair<std::string, Conv2dWeights*>> named_layers(PipelineWeights& w) {
  std::vector<std::pair<std::string, Conv2dWeights*>> out;
  for (std::size_t i = 0; i < w.encoder.size(); ++i) out.emplace_back("encoder" + std::to_string(i), &w.encoder[i]);
  out.emplace_back("bridge", &w.bridge);
  out.emplace_back("cell_forward", &w.cell_forward);
  out.emplace_back("cell_backward", &w.cell_backward);
  for (auto& l : named_layers(w.align_forward, "align_forward")) out.push_back(l);
  for (auto& l : named_layers(w.align_backward, "align_backward")) out.push_back(l);
  out.emplace_back("fuse", &w.fuse);
  out.emplace_back("recon_in", &w.recon_in);
  for (std::size_t i = 0; i < w.rcabs.size(); ++i) {
    const std::string p = "rcab" + std::to_string(i);
    out.emplace_back(p + ".conv1", &w.rcabs[i].conv1);
    out.emplace_back(p + ".conv2", &w.rcabs[i].conv2);
    out.emplace_back(p + ".squeeze", &w.rcabs[i].squeeze);
    out.emplace_back(p + ".excite", &w.rcabs[i].excite);
  }
  out.emplace_back("recon_out", &w.recon_out);
  for (std::size_t i = 0; i < w.up_stages.size(); ++i) out.emplace_back("up_stage" + std::to_string(i), &w.up_stages[i]);
  out.emplace_back("up_conv", &w.up_conv);
  out.emplace_back("up_out", &w.up_out);
  return out;
}

void save_pipeline_weights(const std::filesystem::path& dir, const PipelineWeights& w) {
  PipelineWeights copy = w;
  TensorArchive ar;
  const std::vector<float> meta = meta_values(w);
  ar.put("meta", Tensor({static_cast<int>(meta.size())}, meta));
  for (auto& [name, layer] : named_layers(copy)) {
    ar.put(name + ".weight", layer->weight);
    ar.put(name + ".bias", layer->bias);
  }
  ar.save(dir);
}

PipelineWeights load_pipeline_weights(const std::filesystem::path& dir) {
  const TensorArchive ar = TensorArchive::load(dir);
  if (!ar.contains("meta") || ar.get("meta").size() != 8) {
    throw CorruptDataset("weights archive " + dir.string() + ": missing or malformed meta record");
  }
  const Tensor& m = ar.get("meta");
  AlignConfig cfg;
  cfg.levels = static_cast<int>(m[0]);
  cfg.groups = static_cast<int>(m[1]);
  cfg.use_resflow = m[2] != 0.0f;
  cfg.use_deform = m[3] != 0.0f;
  cfg.flow.levels = static_cast<int>(m[4]);
  cfg.flow.iters_per_level = static_cast<int>(m[5]);
  cfg.flow.window = static_cast<int>(m[6]);
  PipelineWeights w = make_zero_pipeline_weights(cfg, static_cast<int>(m[7]));
  for (auto& [name, layer] : named_layers(w)) {
    for (const char* part : {".weight", ".bias"}) {
      const std::string key = name + part;
      if (!ar.contains(key)) throw CorruptDataset("weights archive " + dir.string() + ": missing " + key);
      Tensor& dst = std::string(part) == ".weight" ? layer->weight : layer->bias;
      const Tensor& src = ar.get(key);
      if (src.dims() != dst.dims()) {
        throw CorruptDataset("weights archive " + dir.string() + ": " + key + " has extents " +
                             shape_to_string(src.dims()) + ", expected " + shape_to_string(dst.dims()));
      }
      dst = src;
    }
  }
  return w;
}

Tensor rcab(const Tensor& x, const RcabWeights& w) {
  Tensor r = conv2d(x, w.conv1);
  relu_inplace(r);
  r = conv2d(r, w.conv2);
  const int c = r.channels();
  const std::size_t hw = static_cast<std::size_t>(r.height()) * r.width();
  Tensor pooled({c, 1, 1});
  for (int ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (float v : r.plane(ch)) s += v;
    pooled[ch] = static_cast<float>(s / static_cast<double>(hw));
  }
  Tensor gate = conv2d(pooled, w.squeeze);
  relu_inplace(gate);
  gate = conv2d(gate, w.excite);
  sigmoid_inplace(gate);
  Tensor out = x;
  for (int ch = 0; ch < c; ++ch) {
    auto dst = out.plane(ch);
    auto src = r.plane(ch);
    for (std::size_t i = 0; i < hw; ++i) dst[i] += gate[ch] * src[i];
  }
  return out;
}

Tensor encode(const Tensor& x, const PipelineWeights& w) {
  require_channels(x, 3, "encode");
  Tensor f = x;
  for (const Conv2dWeights& layer : w.encoder) {
    f = conv2d(f, layer);
    relu_inplace(f);
  }
  return f;
}

Tensor reconstruct(const Tensor& x, const Tensor& h_bar, const PipelineWeights& w) {
  require_channels(x, 3, "reconstruct");
  require_channels(h_bar, kHiddenChannels, "reconstruct");
  require_same_hw(x, h_bar, "reconstruct");
  Tensor h = conv_lrelu(concat_channels({&x, &h_bar}), w.recon_in);
  for (const RcabWeights& block : w.rcabs) h = rcab(h, block);
  return conv_lrelu(h, w.recon_out);
}

Tensor upsample(const Tensor& h, const Tensor& x, int scale, const PipelineWeights& w) {
  const int stages = stages_for(scale);
  require_channels(h, kHiddenChannels, "upsample");
  require_channels(x, 3, "upsample");
  require_same_hw(h, x, "upsample");
  if (static_cast<int>(w.up_stages.size()) < stages) {
    throw ShapeError("upsample: weights carry " + std::to_string(w.up_stages.size()) +
                     " pixel-shuffle stages, x" + std::to_string(scale) + " needs " +
                     std::to_string(stages));
  }
  Tensor t = h;
  for (int s = 0; s < stages; ++s) {
    t = pixel_shuffle(conv2d(t, w.up_stages[s]), 2);
    leaky_relu_inplace(t);
  }
  t = conv_lrelu(t, w.up_conv);
  t = conv2d(t, w.up_out);
  return t + upsample_bilinear(x, scale);
}

std::vector<Tensor> vsr_forward(const std::vector<Tensor>& seq, int scale, const PipelineWeights& w) {
  if (seq.empty()) throw InvalidArgument("vsr_forward: empty sequence");
  stages_for(scale);
  const int t_len = static_cast<int>(seq.size());
  for (const Tensor& x : seq) {
    require_channels(x, 3, "vsr_forward");
    require_same_dims(seq.front(), x, "vsr_forward");
  }
  const int h = seq.front().height(), wd = seq.front().width();

  std::vector<Tensor> feats;
  feats.reserve(seq.size());
  for (const Tensor& x : seq) feats.push_back(conv2d(encode(x, w), w.bridge));

  auto propagate = [&](bool forward) {
    const Conv2dWeights& cell = forward ? w.cell_forward : w.cell_backward;
    const AlignWeights& aw = forward ? w.align_forward : w.align_backward;
    std::vector<Tensor> states(seq.size());
    for (int step = 0; step < t_len; ++step) {
      const int i = forward ? step : t_len - 1 - step;
      const int j = forward ? i - 1 : i + 1;
      Tensor h_bar = step == 0
                         ? Tensor({kHiddenChannels, h, wd})
                         : align(seq[j], seq[i], feats[j], feats[i], states[j], w.align_config, aw).aligned;
      states[i] = conv_lrelu(concat_channels({&seq[i], &h_bar}), cell);
    }
    return states;
  };
  const std::vector<Tensor> backward = propagate(false);
  const std::vector<Tensor> forward = propagate(true);

  std::vector<Tensor> out;
  out.reserve(seq.size());
  for (int i = 0; i < t_len; ++i) {
    const Tensor fused = conv_lrelu(concat_channels({&forward[i], &backward[i]}), w.fuse);
    out.push_back(upsample(reconstruct(seq[i], fused, w), seq[i], scale, w));
  }
  return out;
}

}  // namespace alignkit

#include "alignkit/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <string>

#include <nlohmann/json.hpp>

#include "alignkit/io.hpp"
#include "alignkit/parallel.hpp"
#include "alignkit/rng.hpp"
#include "alignkit/sampling.hpp"

namespace alignkit {

namespace {

using json = nlohmann::json;

struct Wave {
  double kx, ky, phase, amp;
};

struct Disc {
  double cx, cy, radius, amp[3];
};

// Continuous texture in scene coordinates; values stay within [0.1, 0.9].
struct Texture {
  std::vector<Wave> waves[3];
  std::vector<Disc> discs;
  double edge = 1.5;

  double operator()(int c, double x, double y) const {
    double v = 0.5;
    for (const Wave& w : waves[c]) v += w.amp * std::sin(w.kx * x + w.ky * y + w.phase);
    for (const Disc& d : discs) {
      const double r = std::hypot(x - d.cx, y - d.cy);
      v += d.amp[c] / (1.0 + std::exp((r - d.radius) / edge));
    }
    return v;
  }
};

Texture make_texture(const SceneParams& p) {
  const CounterRng rng(p.seed, 0x7e47);
  Texture t;
  std::uint64_t k = 0;
  for (int c = 0; c < 3; ++c) {
    double total = 0.0;
    for (int i = 0; i < p.waves; ++i) {
      const double period = p.min_period * std::pow(p.max_period / p.min_period, rng.uniform(k++));
      const double angle = rng.uniform(k++, 0.0, std::numbers::pi);
      const double mag = 2.0 * std::numbers::pi / period;
      const double amp = rng.uniform(k++, 0.3, 1.0);
      t.waves[c].push_back({mag * std::cos(angle), mag * std::sin(angle), rng.uniform(k++, 0.0, 2.0 * std::numbers::pi), amp});
      total += amp;
    }
    for (Wave& w : t.waves[c]) w.amp *= 0.25 / std::max(total, 1e-12);
  }
  const double extent = std::max(p.height, p.width);
  for (int i = 0; i < p.discs; ++i) {
    Disc d{};
    d.cx = rng.uniform(k++, -0.25, 1.25) * p.width;
    d.cy = rng.uniform(k++, -0.25, 1.25) * p.height;
    d.radius = rng.uniform(k++, 0.05, 0.2) * extent;
    for (double& a : d.amp) a = rng.uniform(k++, -1.0, 1.0) * 0.15 / std::max(1, p.discs);
    t.discs.push_back(d);
  }
  return t;
}

struct Motion {
  double cx, cy, vx, vy;
  std::array<double, 4> D;
  std::vector<std::array<double, 2>> jitter;

  // Scene point -> frame position at time t.
  std::array<double, 2> forward(int t, double sx, double sy) const {
    const double ux = sx - cx, uy = sy - cy;
    return {cx + ux + t * (D[0] * ux + D[1] * uy) + vx * t + jitter[t][0],
            cy + uy + t * (D[2] * ux + D[3] * uy) + vy * t + jitter[t][1]};
  }

  std::array<double, 2> inverse(int t, double x, double y) const {
    const double a = 1.0 + t * D[0], b = t * D[1], c = t * D[2], d = 1.0 + t * D[3];
    const double det = a * d - b * c;
    const double rx = x - cx - vx * t - jitter[t][0];
    const double ry = y - cy - vy * t - jitter[t][1];
    return {cx + (d * rx - b * ry) / det, cy + (-c * rx + a * ry) / det};
  }
};

Tensor gaussian_blur(const Tensor& t, double sigma) {
  if (sigma <= 0.0) return t;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double s = 0.0;
  for (int i = -radius; i <= radius; ++i) s += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= s;
  const int h = t.height(), w = t.width();
  Tensor tmp(t.dims()), out(t.dims());
  for (int c = 0; c < t.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * t.at(c, y, std::clamp(x + i, 0, w - 1));
        tmp.at(c, y, x) = static_cast<float>(acc);
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp.at(c, std::clamp(y + i, 0, h - 1), x);
        out.at(c, y, x) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Tensor crop(const Tensor& t, int y0, int x0, int h, int w) {
  Tensor out({t.channels(), h, w});
  for (int c = 0; c < t.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) out.at(c, y, x) = t.at(c, y0 + y, x0 + x);
    }
  }
  return out;
}

Tensor apply_color(Tensor t, const DegradeParams& d) {
  for (int c = 0; c < t.channels(); ++c) {
    for (float& v : t.plane(c)) v = v * d.gain[c] + d.offset[c];
  }
  return t;
}

std::string frame_name(int i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d.%s", i, ext);
  return buf;
}

json params_to_json(const DegradeParams& d) {
  return {{"focal_crop", d.focal_crop},   {"scale", d.scale},
          {"blur_sigma", d.blur_sigma},   {"noise_sigma", d.noise_sigma},
          {"gain", d.gain},               {"offset", d.offset},
          {"misalign", d.misalign},       {"quantize", d.quantize},
          {"seed", d.seed}};
}

DegradeParams params_from_json(const json& j) {
  DegradeParams d;
  d.focal_crop = j.at("focal_crop").get<double>();
  d.scale = j.at("scale").get<int>();
  d.blur_sigma = j.at("blur_sigma").get<double>();
  d.noise_sigma = j.at("noise_sigma").get<double>();
  d.gain = j.at("gain").get<std::array<float, 3>>();
  d.offset = j.at("offset").get<std::array<float, 3>>();
  d.misalign = j.at("misalign").get<std::array<float, 2>>();
  d.quantize = j.at("quantize").get<bool>();
  d.seed = j.at("seed").get<std::uint64_t>();
  return d;
}

}  // namespace

void SceneParams::validate() const {
  if (frames < 1) throw InvalidArgument("scene: frames must be >= 1");
  if (height < 1 || width < 1) throw InvalidArgument("scene: extents must be positive");
  if (!(min_period > 0.0) || max_period < min_period) {
    throw InvalidArgument("scene: need 0 < min_period <= max_period");
  }
  if (waves < 0 || discs < 0) throw InvalidArgument("scene: negative primitive count");
  if (jitter < 0.0) throw InvalidArgument("scene: jitter must be >= 0");
  for (int t = 0; t < frames; ++t) {
    const double a = 1.0 + t * drift[0], b = t * drift[1], c = t * drift[2], d = 1.0 + t * drift[3];
    if (std::abs(a * d - b * c) < 1e-6) throw InvalidArgument("scene: drift makes the motion singular");
  }
}

Scene make_scene(const SceneParams& p) {
  p.validate();
  const Texture tex = make_texture(p);
  const CounterRng jrng(p.seed, 0x717e);
  Motion m{(p.width - 1) / 2.0, (p.height - 1) / 2.0, p.velocity[0], p.velocity[1], p.drift, {}};
  for (int t = 0; t < p.frames; ++t) {
    m.jitter.push_back({p.jitter * jrng.normal(2 * t), p.jitter * jrng.normal(2 * t + 1)});
  }

  Scene s;
  s.frames.assign(p.frames, Tensor({3, p.height, p.width}));
  parallel_for(static_cast<std::size_t>(p.frames), [&](std::size_t t) {
    Tensor& f = s.frames[t];
    for (int y = 0; y < p.height; ++y) {
      for (int x = 0; x < p.width; ++x) {
        const auto src = m.inverse(static_cast<int>(t), x, y);
        for (int c = 0; c < 3; ++c) f.at(c, y, x) = static_cast<float>(tex(c, src[0], src[1]));
      }
    }
  });
  for (int t = 0; t + 1 < p.frames; ++t) {
    FlowField flow(p.height, p.width);
    for (int y = 0; y < p.height; ++y) {
      for (int x = 0; x < p.width; ++x) {
        const auto src = m.inverse(t, x, y);
        const auto next = m.forward(t + 1, src[0], src[1]);
        flow.dx(y, x) = static_cast<float>(next[0] - x);
        flow.dy(y, x) = static_cast<float>(next[1] - y);
      }
    }
    s.flows.push_back(std::move(flow));
  }
  return s;
}

void DegradeParams::validate() const {
  if (!(focal_crop > 0.0 && focal_crop <= 1.0)) throw InvalidArgument("degrade: focal_crop must be in (0,1]");
  if (scale != 2 && scale != 4) throw InvalidArgument("degrade: scale must be 2 or 4");
  if (blur_sigma < 0.0 || noise_sigma < 0.0) throw InvalidArgument("degrade: sigmas must be >= 0");
  for (float v : misalign) {
    if (!std::isfinite(v)) throw InvalidArgument("degrade: misalignment must be finite");
  }
}

int cropped_lr_extent(int hr_extent, const DegradeParams& d) {
  return static_cast<int>(std::lround(d.focal_crop * hr_extent / d.scale));
}

PairedSequence degrade(const Scene& scene, const DegradeParams& d) {
  d.validate();
  if (scene.frames.empty()) throw InvalidArgument("degrade: empty scene");
  const int r = d.scale;
  const int H = scene.frames.front().height(), W = scene.frames.front().width();
  if (H % r != 0 || W % r != 0) {
    throw ShapeError("degrade: HR extents " + std::to_string(H) + "x" + std::to_string(W) +
                     " not divisible by scale " + std::to_string(r));
  }
  const int lh = cropped_lr_extent(H, d), lw = cropped_lr_extent(W, d);
  if (lh < 16 || lw < 16) {
    throw InvalidArgument("degrade: crop leaves " + std::to_string(lh) + "x" + std::to_string(lw) +
                          " LR pixels, need at least 16x16");
  }
  const int ch = r * lh, cw = r * lw;
  const int y0 = (H - ch) / 2, x0 = (W - cw) / 2;
  const FlowField shift = FlowField::uniform(H, W, -d.misalign[0], -d.misalign[1]);

  PairedSequence out;
  out.params = d;
  const std::size_t n = scene.frames.size();
  out.lr.resize(n);
  out.hr.resize(n);
  out.targets.resize(n);
  parallel_for(n, [&](std::size_t t) {
    const Tensor truth = crop(scene.frames[t], y0, x0, ch, cw);
    Tensor lr = gaussian_blur(box_downsample(truth, r), d.blur_sigma);
    if (d.noise_sigma > 0.0) {
      const CounterRng noise(d.seed, 0x0153 + t);
      for (std::size_t i = 0; i < lr.size(); ++i) lr[i] += static_cast<float>(d.noise_sigma * noise.normal(i));
    }
    lr = apply_color(std::move(lr), d);
    Tensor hr = crop(warp(scene.frames[t], shift), y0, x0, ch, cw);
    out.targets[t] = apply_color(truth, d);
    out.lr[t] = d.quantize ? quantize_8bit(lr) : std::move(lr);
    out.hr[t] = d.quantize ? quantize_8bit(hr) : std::move(hr);
  });
  for (const FlowField& f : scene.flows) {
    Tensor lr_flow = box_downsample(crop(f.tensor(), y0, x0, ch, cw), r) * (1.0f / static_cast<float>(r));
    out.flows.emplace_back(std::move(lr_flow));
  }
  return out;
}

void write_dataset(const PairedSequence& seq, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  for (const char* sub : {"hr", "lr", "gt"}) {
    fs::create_directories(dir / sub, ec);
    if (ec) throw IoError("cannot create directory " + (dir / sub).string() + ": " + ec.message());
  }
  const int T = static_cast<int>(seq.lr.size());
  for (int t = 0; t < T; ++t) {
    save_image(dir / "lr" / frame_name(t, "ppm"), seq.lr[t]);
    save_image(dir / "hr" / frame_name(t, "ppm"), seq.hr[t]);
    save_vten(dir / "gt" / ("target_" + frame_name(t, "vten")), seq.targets[t]);
  }
  for (std::size_t t = 0; t < seq.flows.size(); ++t) {
    save_vten(dir / "gt" / ("flow_" + frame_name(static_cast<int>(t), "vten")), seq.flows[t].tensor());
  }
  const json misalign = {{"dx", seq.params.misalign[0]}, {"dy", seq.params.misalign[1]}, {"units", "hr_px"}};
  const json manifest = {
      {"format", "alignkit-paired-sequence"},
      {"version", 1},
      {"frames", T},
      {"scale", seq.params.scale},
      {"lr_size", {seq.lr.empty() ? 0 : seq.lr[0].height(), seq.lr.empty() ? 0 : seq.lr[0].width()}},
      {"hr_size", {seq.hr.empty() ? 0 : seq.hr[0].height(), seq.hr.empty() ? 0 : seq.hr[0].width()}},
      {"flows", seq.flows.size()},
      {"degrade", params_to_json(seq.params)},
  };
  for (const auto& [name, doc] : {std::pair{"manifest.json", manifest}, std::pair{"gt/misalign.json", misalign}}) {
    std::ofstream os(dir / name);
    os << doc.dump(2) << '\n';
    if (!os) throw IoError("write failed: " + (dir / name).string());
  }
}

PairedSequence read_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream is(manifest_path);
  if (!is) throw CorruptDataset("dataset " + dir.string() + ": missing manifest.json");
  PairedSequence seq;
  int frames = 0;
  std::size_t flows = 0;
  try {
    const json m = json::parse(is);
    if (m.at("format") != "alignkit-paired-sequence") throw CorruptDataset("unknown format");
    frames = m.at("frames").get<int>();
    flows = m.at("flows").get<std::size_t>();
    seq.params = params_from_json(m.at("degrade"));
  } catch (const json::exception& e) {
    throw CorruptDataset("dataset " + dir.string() + ": malformed manifest.json (" + e.what() + ")");
  }
  if (frames < 1) throw CorruptDataset("dataset " + dir.string() + ": manifest lists no frames");
  try {
    for (int t = 0; t < frames; ++t) {
      seq.lr.push_back(load_image(dir / "lr" / frame_name(t, "ppm")));
      seq.hr.push_back(load_image(dir / "hr" / frame_name(t, "ppm")));
      seq.targets.push_back(load_vten(dir / "gt" / ("target_" + frame_name(t, "vten"))));
    }
    for (std::size_t t = 0; t < flows; ++t) {
      seq.flows.emplace_back(load_vten(dir / "gt" / ("flow_" + frame_name(static_cast<int>(t), "vten"))));
    }
  } catch (const IoError& e) {
    throw CorruptDataset("dataset " + dir.string() + ": " + e.what());
  }
  return seq;
}

}  // namespace alignkit

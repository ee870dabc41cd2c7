#include "alignkit/conv.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "alignkit/gemm.hpp"
#include "alignkit/parallel.hpp"

namespace alignkit {

Conv2dWeights Conv2dWeights::zeros(int out_channels, int in_channels, int kernel, int groups) {
  if (groups < 1 || in_channels % groups != 0 || out_channels % groups != 0) {
    throw ShapeError("conv2d: channels (" + std::to_string(in_channels) + " in, " +
                     std::to_string(out_channels) + " out) not divisible by groups " +
                     std::to_string(groups));
  }
  return {Tensor({out_channels, in_channels / groups, kernel, kernel}), Tensor({out_channels}),
          groups};
}

Conv2dWeights Conv2dWeights::he_uniform(int out_channels, int in_channels, int kernel,
                                        const CounterRng& rng, float gain, int groups) {
  Conv2dWeights w = zeros(out_channels, in_channels, kernel, groups);
  const double fan_in = static_cast<double>(in_channels / groups) * kernel * kernel;
  const double bound = gain * std::sqrt(6.0 / fan_in);
  for (std::size_t i = 0; i < w.weight.size(); ++i) {
    w.weight[i] = static_cast<float>(rng.uniform(i, -bound, bound));
  }
  return w;
}

namespace {

void validate(const Tensor& input, const Conv2dWeights& w) {
  require_chw(input, "conv2d");
  if (w.weight.rank() != 4) throw ShapeError("conv2d: weight must be rank 4");
  const int k = w.weight.dim(2);
  if (w.weight.dim(3) != k || (k != 1 && k != 3)) {
    throw ShapeError("conv2d: kernel must be 1x1 or 3x3, got " + shape_to_string(w.weight.dims()));
  }
  if (w.groups < 1 || input.channels() % w.groups != 0) {
    throw ShapeError("conv2d: input channel axis " + std::to_string(input.channels()) +
                     " not divisible by groups " + std::to_string(w.groups));
  }
  if (w.weight.dim(1) * w.groups != input.channels()) {
    throw ShapeError("conv2d: input channel axis mismatch (input " +
                     std::to_string(input.channels()) + ", weight expects " +
                     std::to_string(w.weight.dim(1) * w.groups) + ")");
  }
  if (w.weight.dim(0) % w.groups != 0) {
    throw ShapeError("conv2d: output channel axis " + std::to_string(w.weight.dim(0)) +
                     " not divisible by groups " + std::to_string(w.groups));
  }
  if (w.bias.rank() != 1 || w.bias.dim(0) != w.weight.dim(0)) {
    throw ShapeError("conv2d: bias must be (" + std::to_string(w.weight.dim(0)) + ")");
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Conv2dWeights& w) {
  validate(input, w);
  const int h = input.height(), wd = input.width();
  const int cout = w.out_channels(), k = w.kernel(), g = w.groups;
  const int cin_g = input.channels() / g, cout_g = cout / g;
  const int taps = k * k;
  const int kdim = cin_g * taps;
  Tensor out({cout, h, wd});

  // Fixed row tiles keep the GEMM shapes independent of the worker count.
  const int rows_per_tile = std::max(1, kTilePixels / wd);
  const int tiles = (h + rows_per_tile - 1) / rows_per_tile;
  parallel_for(static_cast<std::size_t>(tiles) * g, [&](std::size_t job) {
    const int grp = static_cast<int>(job) / tiles;
    const int tile = static_cast<int>(job) % tiles;
    const int y_begin = tile * rows_per_tile;
    const int y_end = std::min(h, y_begin + rows_per_tile);
    const int n = (y_end - y_begin) * wd;

    std::vector<float> cols(static_cast<std::size_t>(kdim) * n);
    for (int ci = 0; ci < cin_g; ++ci) {
      const float* src = input.plane(grp * cin_g + ci).data();
      for (int t = 0; t < taps; ++t) {
        const int oy = k == 3 ? t / 3 - 1 : 0;
        const int ox = k == 3 ? t % 3 - 1 : 0;
        float* dst = cols.data() + static_cast<std::size_t>(ci * taps + t) * n;
        for (int y = y_begin; y < y_end; ++y) {
          const int sy = y + oy;
          float* drow = dst + (y - y_begin) * wd;
          if (sy < 0 || sy >= h) {
            std::fill(drow, drow + wd, 0.0f);
            continue;
          }
          const float* srow = src + sy * wd;
          for (int x = 0; x < wd; ++x) {
            const int sx = x + ox;
            drow[x] = (sx >= 0 && sx < wd) ? srow[sx] : 0.0f;
          }
        }
      }
    }
    const float* wptr = w.weight.raw() + static_cast<std::size_t>(grp) * cout_g * kdim;
    gemm_bias(wptr, cout_g, kdim, cols.data(), n, w.bias.raw() + grp * cout_g,
              out.raw() + (static_cast<std::size_t>(grp) * cout_g * h + y_begin) * wd,
              static_cast<std::size_t>(h) * wd);
  });
  return out;
}

Tensor pixel_shuffle(const Tensor& input, int scale) {
  require_chw(input, "pixel_shuffle");
  if (scale < 1 || input.channels() % (scale * scale) != 0) {
    throw ShapeError("pixel_shuffle: channel axis " + std::to_string(input.channels()) +
                     " not divisible by scale^2 = " + std::to_string(scale * scale));
  }
  const int c = input.channels() / (scale * scale), h = input.height(), w = input.width();
  Tensor out({c, h * scale, w * scale});
  for (int ch = 0; ch < c; ++ch) {
    for (int dy = 0; dy < scale; ++dy) {
      for (int dx = 0; dx < scale; ++dx) {
        const int src_c = ch * scale * scale + dy * scale + dx;
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            out.at(ch, scale * y + dy, scale * x + dx) = input.at(src_c, y, x);
          }
        }
      }
    }
  }
  return out;
}

Tensor pixel_unshuffle(const Tensor& input, int scale) {
  require_chw(input, "pixel_unshuffle");
  if (scale < 1 || input.height() % scale != 0 || input.width() % scale != 0) {
    throw ShapeError("pixel_unshuffle: spatial extents " + shape_to_string(input.dims()) +
                     " not divisible by scale " + std::to_string(scale));
  }
  const int c = input.channels(), h = input.height() / scale, w = input.width() / scale;
  Tensor out({c * scale * scale, h, w});
  for (int ch = 0; ch < c; ++ch) {
    for (int dy = 0; dy < scale; ++dy) {
      for (int dx = 0; dx < scale; ++dx) {
        const int dst_c = ch * scale * scale + dy * scale + dx;
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            out.at(dst_c, y, x) = input.at(ch, scale * y + dy, scale * x + dx);
          }
        }
      }
    }
  }
  return out;
}

void relu_inplace(Tensor& t) {
  for (float& v : t.data()) v = v > 0.0f ? v : 0.0f;
}

void leaky_relu_inplace(Tensor& t, float slope) {
  for (float& v : t.data()) v = v >= 0.0f ? v : v * slope;
}

void sigmoid_inplace(Tensor& t) {
  for (float& v : t.data()) v = 1.0f / (1.0f + std::exp(-v));
}

}  // namespace alignkit

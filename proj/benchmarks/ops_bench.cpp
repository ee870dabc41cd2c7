#include <benchmark/benchmark.h>

#include <random>

#include "alignkit/baseflow.hpp"
#include "alignkit/conv.hpp"
#include "alignkit/metrics.hpp"
#include "alignkit/multiadastn.hpp"
#include "alignkit/pipeline.hpp"
#include "alignkit/rectify.hpp"
#include "alignkit/sampling.hpp"
#include "alignkit/synthdata.hpp"

using namespace alignkit;

namespace {

Tensor noise(const Shape& dims, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Tensor t(dims);
  for (float& v : t.data()) v = u(gen);
  return t;
}

void BM_Conv3x3(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const Tensor x = noise({c, 64, 64}, 1);
  const Conv2dWeights w{noise({c, c, 3, 3}, 2), noise({c}, 3), 1};
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w));
}
BENCHMARK(BM_Conv3x3)->Arg(16)->Arg(64);

void BM_Warp(benchmark::State& state) {
  const Tensor x = noise({64, 64, 64}, 4);
  const FlowField f = FlowField::uniform(64, 64, 1.3f, -0.7f);
  for (auto _ : state) benchmark::DoNotOptimize(warp(x, f));
}
BENCHMARK(BM_Warp);

void BM_DeformSample(benchmark::State& state) {
  const Tensor x = noise({64, 64, 64}, 5);
  const Conv2dWeights w{noise({64, 64, 3, 3}, 6), noise({64}, 7), 1};
  const DeformParams p = DeformParams::identity(4, 64, 64);
  for (auto _ : state) benchmark::DoNotOptimize(deform_sample(x, p, w));
}
BENCHMARK(BM_DeformSample);

void BM_BaseFlow(benchmark::State& state) {
  SceneParams sp;
  sp.frames = 2;
  sp.velocity = {2.5, -1.5};
  const Scene s = make_scene(sp);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_base_flow(s.frames[0], s.frames[1]));
}
BENCHMARK(BM_BaseFlow);

void BM_ColorCorrect(benchmark::State& state) {
  const Tensor y = noise({3, 192, 192}, 8);
  const Tensor x = noise({3, 48, 48}, 9);
  for (auto _ : state) benchmark::DoNotOptimize(color_correct(x, y, 4));
}
BENCHMARK(BM_ColorCorrect);

void BM_Ssim(benchmark::State& state) {
  const Tensor a = noise({3, 256, 256}, 10), b = noise({3, 256, 256}, 11);
  for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_Ssim);

void BM_VsrFrame(benchmark::State& state) {
  const PipelineWeights w = make_random_pipeline_weights(1);
  const std::vector<Tensor> seq{noise({3, 64, 64}, 12), noise({3, 64, 64}, 13)};
  for (auto _ : state) benchmark::DoNotOptimize(vsr_forward(seq, 4, w));
}
BENCHMARK(BM_VsrFrame)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

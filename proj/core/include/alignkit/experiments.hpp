#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "alignkit/fit.hpp"
#include "alignkit/multiadastn.hpp"
#include "alignkit/synthdata.hpp"

namespace alignkit {

/// One alignment problem: warp(prev, gt) reproduces cur.
struct AlignPair {
  Tensor cur;
  Tensor prev;
  FlowField gt;
  FlowField base;  ///< estimated flow plus any injected bias
};

/// DeformNet stage defaults: squared-error surrogate, small steps.
FitConfig default_deform_fit();

struct AlignBenchConfig {
  int size = 64;
  int train_pairs = 6;
  int test_pairs = 6;
  double max_shift = 3.0;              ///< |v| bound, px
  std::array<float, 2> bias{2.0f, 0.0f};  ///< added to every base flow
  int margin = 8;                      ///< interior border excluded from errors
  int predictor_hidden = 16;
  AlignConfig align{.levels = 3, .groups = 1, .use_resflow = true, .use_deform = true, .flow = {}};
  FitConfig resflow_fit;
  FitConfig deform_fit = default_deform_fit();
  FitScope scope = FitScope::Heads;
  std::uint64_t seed = 1;
};

/// Translation pairs from synthetic scenes; `stream` separates train and
/// test draws.
std::vector<AlignPair> make_align_pairs(const AlignBenchConfig& cfg, int count, std::uint64_t stream);

/// Consecutive frames of a dataset with their ground-truth flows.
std::vector<AlignPair> pairs_from_dataset(const PairedSequence& seq, const AlignBenchConfig& cfg);

/// Mean interior EPE of base + ResflowNet residual.
double refined_epe(const std::vector<AlignPair>& pairs, const AlignWeights& w, const AlignBenchConfig& cfg);

/// Mean interior |aligned - cur| with the frames standing in for features.
double alignment_error(const std::vector<AlignPair>& pairs, const AlignWeights& w,
                       const AlignConfig& align, int margin);

/// Mean interior squared difference, same convention as alignment_error.
double alignment_mse(const std::vector<AlignPair>& pairs, const AlignWeights& w, const AlignConfig& align,
                     int margin);

struct AblationRow {
  std::string name;
  bool resflow = false;
  bool deform = false;
  double epe = 0.0;
  double align_error = 0.0;
};

struct AblationReport {
  std::vector<AblationRow> rows;  ///< base, +resflow, +resflow+deform
  FitResult resflow_fit;
  FitResult deform_fit;
  double seconds = 0.0;
};

AlignWeights make_bench_weights(const AlignBenchConfig& cfg);

/// Fits ResflowNet then DeformNet on `train` and scores the three
/// configurations on `test`.
AblationReport run_alignment_ablation(const std::vector<AlignPair>& train, const std::vector<AlignPair>& test,
                                      const AlignBenchConfig& cfg);

struct RectifyBenchConfig {
  int pairs = 4;
  int lr_size = 48;
  int scale = 4;
  std::array<float, 2> misalign{4.0f, 0.0f};  ///< HR px
  float gain = 1.2f;                          ///< HR intensity relative to LR
  std::uint64_t seed = 3;
};

struct RectifyRow {
  std::string name;
  bool color = false;
  bool position = false;
  double masked_l1 = 0.0;
};

struct RectifyReport {
  std::vector<RectifyRow> rows;  ///< neither, color, position, both
  double ratio = 0.0;            ///< both / neither
  double seconds = 0.0;
};

/// Synthetic LR/HR pairs whose HR branch is shifted and brightened.
PairedSequence make_rectify_pairs(const RectifyBenchConfig& cfg);

/// Scores the four rectification variants against the aligned targets,
/// all under one shared mask.
RectifyReport run_rectify_experiment(const PairedSequence& seq);

struct GradcheckReport {
  int points = 0;
  double warp_max_rel_error = 0.0;
  double deform_max_rel_error = 0.0;
  double seconds = 0.0;
};

/// Finite differences against warp_flow_vjp and deform_sample_mask_vjp at
/// random interior points (half for each operator).
GradcheckReport run_gradcheck(int points, std::uint64_t seed);

}  // namespace alignkit

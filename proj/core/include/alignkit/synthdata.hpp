#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "alignkit/tensor.hpp"

namespace alignkit {

/// Scene content moves as M_t(s) = c + (I + t D)(s - c) + v t + j_t, where c
/// is the frame centre and j_t is per-frame Gaussian jitter.
struct SceneParams {
  std::uint64_t seed = 0;
  int height = 64;
  int width = 64;
  int frames = 3;
  std::array<double, 2> velocity{0.0, 0.0};               ///< (vx, vy) px per frame
  std::array<double, 4> drift{0.0, 0.0, 0.0, 0.0};        ///< D row-major
  double jitter = 0.0;                                    ///< std-dev of j_t in px
  double min_period = 8.0;   ///< shortest texture wavelength in px
  double max_period = 48.0;  ///< longest texture wavelength in px
  int waves = 12;            ///< sinusoids per channel
  int discs = 6;             ///< soft discs

  void validate() const;
};

struct Scene {
  std::vector<Tensor> frames;  ///< (3,H,W), values within [0.1, 0.9]
  /// flows[t] maps frame t into frame t+1: frame_t(x) = frame_{t+1}(x + flows[t](x)).
  std::vector<FlowField> flows;
};

Scene make_scene(const SceneParams& p);

struct DegradeParams {
  double focal_crop = 0.58;
  int scale = 4;
  double blur_sigma = 0.0;   ///< Gaussian blur of the LR frame, LR px
  double noise_sigma = 0.0;  ///< additive Gaussian noise on the LR frame
  std::array<float, 3> gain{1.0f, 1.0f, 1.0f};
  std::array<float, 3> offset{0.0f, 0.0f, 0.0f};
  /// Content displacement of the HR branch relative to the LR branch, HR px.
  std::array<float, 2> misalign{0.0f, 0.0f};
  bool quantize = false;  ///< round LR and HR to 8-bit codes
  std::uint64_t seed = 0;

  void validate() const;
};

struct PairedSequence {
  std::vector<Tensor> lr;       ///< (3,h,w)
  std::vector<Tensor> hr;       ///< (3,rh,rw), misaligned by params.misalign
  std::vector<Tensor> targets;  ///< HR content aligned with lr, in lr's colors
  std::vector<FlowField> flows; ///< LR-scale ground-truth flows, one per consecutive pair
  DegradeParams params;
};

/// LR extent (per axis) the crop keeps from an HR extent.
int cropped_lr_extent(int hr_extent, const DegradeParams& d);

PairedSequence degrade(const Scene& scene, const DegradeParams& d);

/// Directory layout: manifest.json, hr/%04d.ppm, lr/%04d.ppm,
/// gt/flow_%04d.vten, gt/target_%04d.vten, gt/misalign.json. Frames pass
/// through 8-bit PPM, so only quantized sequences round-trip exactly.
void write_dataset(const PairedSequence& seq, const std::filesystem::path& dir);
PairedSequence read_dataset(const std::filesystem::path& dir);

}  // namespace alignkit

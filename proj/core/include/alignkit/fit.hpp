#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "alignkit/error.hpp"
#include "alignkit/multiadastn.hpp"

namespace alignkit {

/// Mse is a smooth surrogate for the alignment L1, used where the L1 kink
/// at the starting point stalls the gradient estimate.
enum class FitObjective { Epe, MaskedL1, Mse };

/// SPSA settings. Step a_k = a / (k + 1 + stability)^alpha, perturbation
/// c_k = perturbation / (k + 1)^gamma.
///
/// With calibration > 0 the first `calibration` antithetic pairs only
/// measure the gradient estimate, and a is chosen so that the first update
/// moves each coordinate by `step` (times its scale). Without calibration
/// a = step.
struct FitConfig {
  int budget = 2000;  ///< objective evaluations, including the initial one
  double step = 0.05;
  int calibration = 4;
  double perturbation = 0.01;
  double alpha = 0.602;
  double gamma = 0.101;
  double stability = -1.0;  ///< < 0 means 10% of the iteration count
  double max_update = 0.0; ///< per-coordinate clamp on each update; 0 disables
  FitObjective objective = FitObjective::Epe;
  std::uint64_t seed = 0;

  void validate() const;
};

/// The parameters an optimiser may touch: spans into weight tensors, each
/// with a scale applied to both perturbation and step.
class ParameterView {
 public:
  void add(std::span<float> values, float scale = 1.0f);
  /// Weights and bias both get scale / sqrt(fan_in).
  void add(Conv2dWeights& layer, float scale = 1.0f);
  /// Kernel weights only, moved within the subspace that keeps every
  /// kernel's sum fixed, so the layer's DC gain never changes.
  void add_gain_preserving(Conv2dWeights& layer, float scale = 1.0f);

  std::size_t size() const { return total_; }
  std::vector<float> get() const;
  void set(const std::vector<float>& values);
  float scale_of(std::size_t i) const;
  /// Projects a direction so each zero-sum group sums to zero.
  void project(std::vector<double>& direction) const;

 private:
  struct Block {
    std::span<float> values;
    float scale;
    std::size_t group = 0;  ///< zero-sum group length, 0 = free
  };
  std::vector<Block> blocks_;
  std::size_t total_ = 0;
};

enum class FitScope { Heads, All };

/// Trainable slice of the alignment weights. For ResflowNet, Heads means
/// the last layer of each level's predictor and All adds the shared
/// layers. For DeformNet the slice is the deformable conv kernel, moved
/// gain-preservingly; the offset and mask heads keep their identity init.
ParameterView alignment_parameters(AlignWeights& w, FitScope scope, bool resflow, bool deform);

struct FitResult {
  std::vector<float> best;
  double initial_loss = 0.0;
  double best_loss = 0.0;
  std::vector<double> trace;  ///< best-so-far after every evaluation
  int evaluations = 0;
};

class FitAborted : public Error {
 public:
  FitAborted(const std::string& what, std::vector<double> trace)
      : Error(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

/// Minimises `objective`, which reads the current parameter values through
/// whatever `params` points into. On return the parameters hold the best
/// point seen. A non-finite loss throws FitAborted with the trace so far,
/// after restoring the best point.
FitResult fit_predictors(const std::function<double()>& objective, ParameterView& params,
                         const FitConfig& cfg);

}  // namespace alignkit

#include "alignkit/fit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "alignkit/rng.hpp"

namespace alignkit {

void FitConfig::validate() const {
  if (budget < 1) throw InvalidArgument("fit: budget must be >= 1");
  if (!(step > 0.0) || !(perturbation > 0.0)) throw InvalidArgument("fit: step and perturbation must be > 0");
  if (max_update < 0.0) throw InvalidArgument("fit: max_update must be >= 0");
  if (calibration < 0) throw InvalidArgument("fit: calibration must be >= 0");
}

void ParameterView::add(std::span<float> values, float scale) {
  blocks_.push_back({values, scale});
  total_ += values.size();
}

void ParameterView::add(Conv2dWeights& layer, float scale) {
  const float fan_in = static_cast<float>(layer.weight.size() / static_cast<std::size_t>(layer.out_channels()));
  add(layer.weight.data(), scale / std::sqrt(fan_in));
  add(layer.bias.data(), scale / std::sqrt(fan_in));
}

void ParameterView::add_gain_preserving(Conv2dWeights& layer, float scale) {
  const std::size_t area = static_cast<std::size_t>(layer.weight.dim(2)) * static_cast<std::size_t>(layer.weight.dim(3));
  const float fan_in = static_cast<float>(layer.weight.size() / static_cast<std::size_t>(layer.out_channels()));
  blocks_.push_back({layer.weight.data(), scale / std::sqrt(fan_in), area});
  total_ += layer.weight.size();
}

void ParameterView::project(std::vector<double>& direction) const {
  if (direction.size() != total_) throw ShapeError("parameter view: direction size mismatch");
  std::size_t offset = 0;
  for (const Block& b : blocks_) {
    if (b.group > 0) {
      for (std::size_t g = 0; g < b.values.size(); g += b.group) {
        const auto first = direction.begin() + static_cast<std::ptrdiff_t>(offset + g);
        const auto last = first + static_cast<std::ptrdiff_t>(b.group);
        const double mean = std::accumulate(first, last, 0.0) / static_cast<double>(b.group);
        for (auto it = first; it != last; ++it) *it -= mean;
      }
    }
    offset += b.values.size();
  }
}

std::vector<float> ParameterView::get() const {
  std::vector<float> out;
  out.reserve(total_);
  for (const Block& b : blocks_) out.insert(out.end(), b.values.begin(), b.values.end());
  return out;
}

void ParameterView::set(const std::vector<float>& values) {
  if (values.size() != total_) {
    throw ShapeError("parameter view: " + std::to_string(values.size()) + " values for " +
                     std::to_string(total_) + " parameters");
  }
  auto it = values.begin();
  for (Block& b : blocks_) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(b.values.size()), b.values.begin());
    it += static_cast<std::ptrdiff_t>(b.values.size());
  }
}

float ParameterView::scale_of(std::size_t i) const {
  for (const Block& b : blocks_) {
    if (i < b.values.size()) return b.scale;
    i -= b.values.size();
  }
  throw InvalidArgument("parameter view: index out of range");
}

ParameterView alignment_parameters(AlignWeights& w, FitScope scope, bool resflow, bool deform) {
  ParameterView v;
  auto add_head = [&](PredictorWeights& p) {
    if (scope == FitScope::All) {
      v.add(p.shared1);
      v.add(p.shared2);
    }
    v.add(p.translation);
    if (p.affine) v.add(*p.affine);
    if (p.mask) v.add(*p.mask);
  };
  if (resflow) {
    for (PredictorWeights& p : w.resflow) add_head(p);
  }
  if (deform) v.add_gain_preserving(w.deform.dcn);
  return v;
}

FitResult fit_predictors(const std::function<double()>& objective, ParameterView& params,
                         const FitConfig& cfg) {
  cfg.validate();
  FitResult r;
  const std::vector<float> theta0 = params.get();
  const std::size_t n = theta0.size();
  std::vector<double> theta(theta0.begin(), theta0.end());
  std::vector<float> scales(n);
  for (std::size_t i = 0; i < n; ++i) scales[i] = params.scale_of(i);
  r.best = theta0;

  auto evaluate = [&](const std::vector<float>& point) {
    params.set(point);
    const double loss = objective();
    ++r.evaluations;
    if (!std::isfinite(loss)) {
      params.set(r.best);
      throw FitAborted("fit: objective returned a non-finite value at evaluation " +
                           std::to_string(r.evaluations),
                       r.trace);
    }
    if (r.trace.empty() || loss < r.best_loss) {
      r.best_loss = loss;
      r.best = point;
    }
    r.trace.push_back(r.best_loss);
    return loss;
  };

  r.initial_loss = evaluate(theta0);
  const CounterRng rng(cfg.seed, 0x5b5a);
  std::vector<float> plus(n), minus(n);
  std::vector<double> delta(n);
  std::uint64_t draw = 0;
  // One antithetic pair around theta at perturbation c; returns the
  // simultaneous-perturbation slope (L+ - L-) / 2c.
  auto probe = [&](double c) {
    for (std::size_t i = 0; i < n; ++i) delta[i] = rng.sign(draw * n + i);
    params.project(delta);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = c * scales[i] * delta[i];
      plus[i] = static_cast<float>(theta[i] + d);
      minus[i] = static_cast<float>(theta[i] - d);
    }
    ++draw;
    // The pair is evaluated as a unit, plus first.
    const double lp = evaluate(plus);
    const double lm = evaluate(minus);
    return (lp - lm) / (2.0 * c);
  };

  const int remaining = (cfg.budget - 1) / 2;
  const int calib = std::min(cfg.calibration, remaining);
  const int iterations = remaining - calib;
  const double A = cfg.stability < 0.0 ? 0.1 * iterations : cfg.stability;
  double a = cfg.step;
  if (calib > 0) {
    double mag = 0.0;
    for (int k = 0; k < calib; ++k) mag += std::abs(probe(cfg.perturbation));
    mag /= calib;
    a = mag > 0.0 ? cfg.step * std::pow(1.0 + A, cfg.alpha) / mag : 0.0;
  }
  for (int k = 0; k < iterations; ++k) {
    const double ak = a / std::pow(k + 1 + A, cfg.alpha);
    const double ck = cfg.perturbation / std::pow(k + 1, cfg.gamma);
    const double g = probe(ck);
    for (std::size_t i = 0; i < n; ++i) {
      double u = ak * scales[i] * g * delta[i];
      if (cfg.max_update > 0.0) u = std::clamp(u, -cfg.max_update * scales[i], cfg.max_update * scales[i]);
      theta[i] -= u;
    }
  }
  params.set(r.best);
  return r;
}

}  // namespace alignkit

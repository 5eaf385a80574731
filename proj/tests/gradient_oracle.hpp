#pragma once

// Central finite-difference oracle for the training loss. Test-only: it
// perturbs parameters in place and re-evaluates the loss, so it shares
// nothing with autograd beyond the forward pass.
//
// Central differences at h and h/2 are combined by Richardson extrapolation,
// exact up to O(h^4) where the loss is smooth on [theta - h, theta + h]. ReLU and max-pooling make the network piecewise
// smooth, so every evaluation runs under an ActivationPatternProbe and a
// sample whose perturbed passes switch any ReLU or pooling winner is retried
// with the next smaller step; if every step crosses a kink the sample is
// flagged instead of being compared.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <torch/torch.h>

#include "ivdnet/blocks.hpp"

namespace ivdnet::oracle {

struct GradientSample {
  std::string parameter;
  std::int64_t index;
  double analytic;
  double numeric;
  double relative_error;
  double step;
  bool crosses_kink;
};

/// Relative error |a - n| / max(|a|, |n|); exact zeros on both sides count
/// as agreement.
inline double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale == 0.0) return 0.0;
  return std::abs(analytic - numeric) / scale;
}

/// Compares d(loss)/d(theta) from `analytic_grads` (aligned with
/// module.named_parameters()) against central differences of `loss_fn` for
/// `max_samples` scalars drawn uniformly without replacement (all scalars
/// when max_samples <= 0). `steps` are tried in order.
template <typename LossFn>
std::vector<GradientSample> finite_difference_check(torch::nn::Module& module, LossFn&& loss_fn,
                                                    const std::vector<torch::Tensor>& analytic_grads,
                                                    int max_samples, const std::vector<double>& steps,
                                                    std::uint64_t seed) {
  struct Slot {
    std::size_t param;
    std::int64_t index;
  };
  auto named = module.named_parameters();
  std::vector<Slot> slots;
  for (std::size_t p = 0; p < named.size(); ++p)
    for (std::int64_t i = 0; i < named[p].value().numel(); ++i) slots.push_back({p, i});
  if (max_samples > 0 && static_cast<std::size_t>(max_samples) < slots.size()) {
    std::mt19937_64 rng(seed);
    std::shuffle(slots.begin(), slots.end(), rng);
    slots.resize(max_samples);
  }

  auto same = [](const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!torch::equal(a[i], b[i])) return false;
    return true;
  };

  std::vector<GradientSample> out;
  torch::NoGradGuard no_grad;
  model::ActivationPatternProbe probe;
  loss_fn();
  const auto reference = probe.take();
  for (const auto& slot : slots) {
    auto flat = named[slot.param].value().view(-1);
    const double original = flat[slot.index].template item<double>();
    const double analytic = analytic_grads[slot.param].view(-1)[slot.index].template item<double>();
    GradientSample sample{named[slot.param].key(), slot.index, analytic, 0.0, 0.0, 0.0, true};
    for (double step : steps) {
      bool smooth = true;
      auto central = [&](double h) {
        flat[slot.index] = original + h;
        const double up = loss_fn();
        smooth = same(reference, probe.take()) && smooth;
        flat[slot.index] = original - h;
        const double down = loss_fn();
        smooth = same(reference, probe.take()) && smooth;
        flat[slot.index] = original;
        return (up - down) / (2.0 * h);
      };
      const double coarse = central(step);
      const double fine = central(step / 2.0);
      sample.numeric = (4.0 * fine - coarse) / 3.0;
      sample.step = step;
      sample.crosses_kink = !smooth;
      if (!sample.crosses_kink) break;
    }
    sample.relative_error = relative_error(analytic, sample.numeric);
    out.push_back(sample);
  }
  return out;
}

}  // namespace ivdnet::oracle

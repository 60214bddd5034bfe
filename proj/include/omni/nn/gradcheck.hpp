#pragma once

#include "omni/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

namespace omni::nn {

/// One block of values to perturb, with the analytic gradient already
/// computed for it.
struct GradSlot {
  std::string name;
  double* values = nullptr;
  const double* analytic = nullptr;
  Index size = 0;
};

struct GradCheckOptions {
  double eps = 1e-5;
  /// Relative errors are |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  /// Elements where the one-sided slopes disagree by more than this (relative)
  /// straddle a kink (ReLU at 0, max-pool switch) and are excluded.
  double kink_tolerance = 0.1;
  /// Per-slot cap on checked elements; 0 checks everything.
  Index max_per_slot = 0;
  std::uint64_t seed = 7;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst;
  Index checked = 0;
  Index skipped = 0;
};

/// Compares analytic gradients with central differences of `loss()`.
/// `loss` must recompute the forward pass from the current values.
template <typename LossFn>
GradCheckReport grad_check(LossFn&& loss, const std::vector<GradSlot>& slots,
                           const GradCheckOptions& opt = {}) {
  GradCheckReport report;
  std::mt19937_64 rng(opt.seed);
  const double base = loss();
  for (const auto& slot : slots) {
    std::vector<Index> order(static_cast<std::size_t>(slot.size));
    std::iota(order.begin(), order.end(), 0);
    if (opt.max_per_slot > 0 && slot.size > opt.max_per_slot) {
      std::shuffle(order.begin(), order.end(), rng);
      order.resize(static_cast<std::size_t>(opt.max_per_slot));
    }
    for (Index i : order) {
      double& v = slot.values[i];
      const double saved = v;
      v = saved + opt.eps;
      const double up = loss();
      v = saved - opt.eps;
      const double down = loss();
      v = saved;

      const double forward_slope = (up - base) / opt.eps;
      const double backward_slope = (base - down) / opt.eps;
      const double slope_scale = std::max({std::abs(forward_slope), std::abs(backward_slope), opt.floor});
      if (std::abs(forward_slope - backward_slope) > opt.kink_tolerance * slope_scale) {
        ++report.skipped;
        continue;
      }
      const double numeric = (up - down) / (2.0 * opt.eps);
      const double analytic = slot.analytic[i];
      const double rel =
          std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), opt.floor});
      ++report.checked;
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst = slot.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

template <typename Scalar>
GradSlot slot_for(Parameter<Scalar>& p) {
  static_assert(std::is_same_v<Scalar, double>, "gradient checks run in fp64");
  return {p.name, p.value.data(), p.grad.data(), p.value.size()};
}

}  // namespace omni::nn

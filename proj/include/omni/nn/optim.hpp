#pragma once

#include "omni/nn/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace omni::nn {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over the trainable entries of `params`.
template <typename Scalar>
void adam_step(const ParameterList<Scalar>& params, double lr, const AdamOptions& opt = {}) {
  const auto b1 = static_cast<Scalar>(opt.beta1);
  const auto b2 = static_cast<Scalar>(opt.beta2);
  for (auto* p : params) {
    if (!p->trainable) continue;
    ++p->steps;
    p->first_moment = b1 * p->first_moment + (1 - b1) * p->grad;
    p->second_moment = b2 * p->second_moment + (1 - b2) * p->grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(p->steps));
    const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(p->steps));
    const auto step_size = static_cast<Scalar>(lr / c1);
    const auto c2_sqrt = static_cast<Scalar>(std::sqrt(c2));
    p->value.array() -= step_size * p->first_moment.array() /
                        (p->second_moment.array().sqrt() / c2_sqrt + static_cast<Scalar>(opt.eps));
  }
}

/// Linear ramp from 0 to base_lr over the warmup, then linear decay to 0 at
/// total_steps.
struct LinearWarmupSchedule {
  double base_lr = 3e-4;
  long warmup_steps = 100;
  long total_steps = 1000;

  double lr_at(long step) const {
    step = std::clamp<long>(step, 0, total_steps);
    if (warmup_steps > 0 && step < warmup_steps) {
      return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
    }
    const long decay = total_steps - warmup_steps;
    if (decay <= 0) return step >= total_steps ? 0.0 : base_lr;
    return base_lr * std::max(0.0, static_cast<double>(total_steps - step) / static_cast<double>(decay));
  }
};

}  // namespace omni::nn

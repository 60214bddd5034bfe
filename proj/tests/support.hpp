#pragma once

#include "omni/nn/gradcheck.hpp"
#include "omni/nn/tensor.hpp"

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace omni::test {

using Mat = Eigen::MatrixXd;

inline Mat random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, scale);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

/// Finite-difference check of a layer under the loss sum(R .* forward()).
/// `backward` receives R, accumulates parameter gradients and returns the
/// input gradient.
inline nn::GradCheckReport check_layer(const nn::ParameterList<double>& params, Mat& input,
                                       const std::function<Mat()>& forward,
                                       const std::function<Mat(const Mat&)>& backward,
                                       const nn::GradCheckOptions& opt = {}) {
  const Mat y = forward();
  const Mat weights = random_matrix(y.rows(), y.cols(), 99);
  nn::zero_grad(params);
  const Mat dx = backward(weights);
  std::vector<Mat> grads;
  for (const auto* p : params) grads.push_back(p->grad);
  std::vector<nn::GradSlot> slots;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->trainable) continue;
    slots.push_back({params[i]->name, params[i]->value.data(), grads[i].data(), params[i]->value.size()});
  }
  slots.push_back({"input", input.data(), dx.data(), input.size()});
  return nn::grad_check([&] { return (forward().array() * weights.array()).sum(); }, slots, opt);
}

}  // namespace omni::test

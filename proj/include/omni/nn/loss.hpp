#pragma once

#include "omni/nn/tensor.hpp"

#include <span>

namespace omni::nn {

/// Column-wise softmax with max subtraction.
template <typename Scalar>
Matrix<Scalar> softmax(const Matrix<Scalar>& logits) {
  Matrix<Scalar> out = logits.rowwise() - logits.colwise().maxCoeff();
  out = out.array().exp();
  out.array().rowwise() /= out.colwise().sum().array();
  return out;
}

template <typename Scalar>
struct LossResult {
  Scalar loss = 0;
  Matrix<Scalar> grad;  // d loss / d logits
};

/// Mean negative log-likelihood over the batch (logits are classes x batch).
/// With class weights the mean is weighted by the weight of each target.
template <typename Scalar>
LossResult<Scalar> softmax_cross_entropy(const Matrix<Scalar>& logits, std::span<const int> labels,
                                         std::span<const double> class_weights = {}) {
  const Index classes = logits.rows();
  const Index batch = logits.cols();
  if (static_cast<Index>(labels.size()) != batch) throw ShapeError("label count does not match batch");
  if (!class_weights.empty() && static_cast<Index>(class_weights.size()) != classes) {
    throw ShapeError("class weight count does not match class count");
  }
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> max = logits.colwise().maxCoeff();
  const Matrix<Scalar> shifted = logits.rowwise() - max;
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> log_z = shifted.array().exp().colwise().sum().log();

  LossResult<Scalar> out;
  out.grad = shifted.array().exp().rowwise() / shifted.array().exp().colwise().sum();
  Scalar total_weight = 0;
  for (Index b = 0; b < batch; ++b) {
    const int y = labels[static_cast<std::size_t>(b)];
    if (y < 0 || y >= classes) throw InvalidParameter("label outside [0, n_classes)");
    const auto w = static_cast<Scalar>(class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(y)]);
    out.loss += w * (log_z(b) - shifted(y, b));
    out.grad(y, b) -= 1;
    out.grad.col(b) *= w;
    total_weight += w;
  }
  out.loss /= total_weight;
  out.grad /= total_weight;
  return out;
}

}  // namespace omni::nn

#pragma once

#include "omni/error.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace omni::nn {

using Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class Mode { Train, Eval };

/// A batch of equal-length 1-D sequences. Sample b occupies columns
/// [b*length, (b+1)*length) of `data`; rows are channels.
template <typename Scalar>
struct Sequence {
  Matrix<Scalar> data;
  Index batch = 0;
  Index length = 0;

  Sequence() = default;
  Sequence(Index channels, Index batch_size, Index len)
      : data(Matrix<Scalar>::Zero(channels, batch_size * len)), batch(batch_size), length(len) {}
  Sequence(Matrix<Scalar> values, Index batch_size, Index len)
      : data(std::move(values)), batch(batch_size), length(len) {
    if (data.cols() != batch * length) throw ShapeError("sequence data does not match batch x length");
  }

  Index channels() const { return data.rows(); }
  auto sample(Index b) { return data.middleCols(b * length, length); }
  auto sample(Index b) const { return data.middleCols(b * length, length); }
};

/// Learnable tensor with its gradient and Adam moments. Non-trainable
/// parameters (batch-norm running statistics) are stored alongside so they
/// travel through checkpoints, but the optimizer skips them.
template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
  Matrix<Scalar> first_moment;
  Matrix<Scalar> second_moment;
  std::int64_t steps = 0;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Index rows, Index cols, bool is_trainable = true)
      : name(std::move(n)),
        value(Matrix<Scalar>::Zero(rows, cols)),
        grad(Matrix<Scalar>::Zero(rows, cols)),
        first_moment(Matrix<Scalar>::Zero(rows, cols)),
        second_moment(Matrix<Scalar>::Zero(rows, cols)),
        trainable(is_trainable) {}

  Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(); }
};

template <typename Scalar>
using ParameterList = std::vector<Parameter<Scalar>*>;

template <typename Scalar>
void zero_grad(const ParameterList<Scalar>& params) {
  for (auto* p : params) p->zero_grad();
}

template <typename Scalar>
Index count_parameters(const ParameterList<Scalar>& params, bool trainable_only) {
  Index n = 0;
  for (const auto* p : params) {
    if (!trainable_only || p->trainable) n += p->size();
  }
  return n;
}

}  // namespace omni::nn

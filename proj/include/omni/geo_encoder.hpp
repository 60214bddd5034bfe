#pragma once

#include "omni/nn/layers.hpp"

#include <string>
#include <vector>

namespace omni {

/// conv(no pad) -> BN -> ReLU -> maxpool(2,2) -> R residual blocks ->
/// global max -> dropout. Input is a padded KDelta sequence, channels x
/// (batch * (P + 2)); output is kernels x batch.
template <typename Scalar>
class GeoEncoder {
 public:
  using Matrix = nn::Matrix<Scalar>;
  using Sequence = nn::Sequence<Scalar>;

  GeoEncoder() = default;
  GeoEncoder(Eigen::Index in_channels, Eigen::Index kernels, int blocks, double dropout)
      : stem_("geo.stem", in_channels, kernels, 0),
        stem_bn_("geo.stem_bn", kernels),
        dropout_(dropout, 1) {
    for (int r = 0; r < blocks; ++r) blocks_.emplace_back("geo.block" + std::to_string(r), kernels);
  }

  Eigen::Index out_features() const { return stem_.out_channels(); }
  Eigen::Index in_channels() const { return stem_.in_channels(); }

  void init(std::mt19937_64& rng) {
    stem_.init(rng);
    for (auto& b : blocks_) b.init(rng);
  }

  void collect(nn::ParameterList<Scalar>& out) {
    stem_.collect(out);
    stem_bn_.collect(out);
    for (auto& b : blocks_) b.collect(out);
  }

  Matrix forward(const Sequence& x, nn::Mode mode, const nn::DropoutKey& key) {
    Sequence h = stem_relu_.forward(stem_bn_.forward(stem_.forward(x), mode));
    h = pool_.forward(h);
    for (auto& b : blocks_) h = b.forward(h, mode);
    return dropout_.forward(global_.forward(h), mode, key);
  }

  Sequence backward(const Matrix& dy) {
    Sequence d = global_.backward(dropout_.backward(dy));
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) d = it->backward(d);
    d = pool_.backward(d);
    return stem_.backward(stem_bn_.backward(stem_relu_.backward(d)));
  }

 private:
  nn::Conv1d<Scalar> stem_;
  nn::BatchNorm1d<Scalar> stem_bn_;
  nn::ReLU<Scalar> stem_relu_;
  nn::MaxPool1d<Scalar> pool_{2, 2, 0};
  std::vector<nn::ResidualBlock<Scalar>> blocks_;
  nn::GlobalMaxPool<Scalar> global_;
  nn::Dropout<Scalar> dropout_;
};

}  // namespace omni

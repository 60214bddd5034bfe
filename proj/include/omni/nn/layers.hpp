#pragma once

#include "omni/nn/random.hpp"
#include "omni/nn/tensor.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <random>

namespace omni::nn {

/// Kaiming-normal fill with fan-in scaling.
template <typename Scalar>
void kaiming_normal(Matrix<Scalar>& w, Index fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(dist(rng));
}

// ---------------------------------------------------------------------------

/// Cross-correlation with 3-tap kernels. The weight is stored as
/// out x (3*in): column block t holds tap t, which reads input position
/// j*stride + t - padding for output position j.
template <typename Scalar>
class Conv1d {
 public:
  static constexpr Index kKernel = 3;

  Conv1d() = default;
  Conv1d(const std::string& name, Index in_channels, Index out_channels, Index padding,
         Index stride = 1, bool with_bias = false)
      : weight(name + ".weight", out_channels, kKernel * in_channels),
        in_(in_channels),
        out_(out_channels),
        padding_(padding),
        stride_(stride) {
    if (in_channels < 1 || out_channels < 1 || stride < 1 || padding < 0) {
      throw InvalidParameter("invalid Conv1d configuration");
    }
    if (with_bias) bias.emplace(name + ".bias", out_channels, 1);
  }

  Index in_channels() const { return in_; }
  Index out_channels() const { return out_; }

  Index output_length(Index length) const {
    const Index span = length + 2 * padding_ - kKernel;
    if (span < 0) throw ShapeError("Conv1d input shorter than the kernel");
    return span / stride_ + 1;
  }

  void init(std::mt19937_64& rng) {
    kaiming_normal(weight.value, kKernel * in_, rng);
    if (bias) bias->value.setZero();
  }

  void collect(ParameterList<Scalar>& out) {
    out.push_back(&weight);
    if (bias) out.push_back(&*bias);
  }

  Sequence<Scalar> forward(const Sequence<Scalar>& x) {
    if (x.channels() != in_) throw ShapeError("Conv1d channel mismatch");
    in_length_ = x.length;
    batch_ = x.batch;
    out_length_ = output_length(x.length);
    cols_.setZero(kKernel * in_, batch_ * out_length_);
    for (Index b = 0; b < batch_; ++b) {
      for (Index t = 0; t < kKernel; ++t) {
        for_each_tap(t, [&](Index j, Index p) {
          cols_.block(t * in_, b * out_length_ + j, in_, 1) = x.data.col(b * in_length_ + p);
        }, [&](Index j0, Index p0, Index n) {
          cols_.block(t * in_, b * out_length_ + j0, in_, n) = x.data.middleCols(b * in_length_ + p0, n);
        });
      }
    }
    Sequence<Scalar> y;
    y.batch = batch_;
    y.length = out_length_;
    y.data.noalias() = weight.value * cols_;
    if (bias) y.data.colwise() += bias->value.col(0);
    return y;
  }

  Sequence<Scalar> backward(const Sequence<Scalar>& dy) {
    if (dy.channels() != out_ || dy.batch != batch_ || dy.length != out_length_) {
      throw ShapeError("Conv1d gradient shape mismatch");
    }
    weight.grad.noalias() += dy.data * cols_.transpose();
    if (bias) bias->grad.col(0) += dy.data.rowwise().sum();
    const Matrix<Scalar> dcols = weight.value.transpose() * dy.data;
    Sequence<Scalar> dx(in_, batch_, in_length_);
    for (Index b = 0; b < batch_; ++b) {
      for (Index t = 0; t < kKernel; ++t) {
        for_each_tap(t, [&](Index j, Index p) {
          dx.data.col(b * in_length_ + p) += dcols.block(t * in_, b * out_length_ + j, in_, 1);
        }, [&](Index j0, Index p0, Index n) {
          dx.data.middleCols(b * in_length_ + p0, n) += dcols.block(t * in_, b * out_length_ + j0, in_, n);
        });
      }
    }
    return dx;
  }

  Parameter<Scalar> weight;
  std::optional<Parameter<Scalar>> bias;

 private:
  // Calls `single(j, p)` per in-range output/input position pair, or
  // `block(j0, p0, n)` once when stride is 1.
  template <typename Single, typename Block>
  void for_each_tap(Index t, Single&& single, Block&& block) const {
    if (stride_ == 1) {
      const Index j0 = std::max<Index>(0, padding_ - t);
      const Index j1 = std::min<Index>(out_length_, in_length_ + padding_ - t);
      if (j1 > j0) block(j0, j0 + t - padding_, j1 - j0);
      return;
    }
    for (Index j = 0; j < out_length_; ++j) {
      const Index p = j * stride_ + t - padding_;
      if (p >= 0 && p < in_length_) single(j, p);
    }
  }

  Index in_ = 0, out_ = 0, padding_ = 0, stride_ = 1;
  Index in_length_ = 0, out_length_ = 0, batch_ = 0;
  Matrix<Scalar> cols_;
};

// ---------------------------------------------------------------------------

/// Per-channel normalization over batch x length. Train mode needs at least
/// two samples.
template <typename Scalar>
class BatchNorm1d {
 public:
  BatchNorm1d() = default;
  BatchNorm1d(const std::string& name, Index channels, double momentum = 0.1, double eps = 1e-5)
      : gamma(name + ".gamma", channels, 1),
        beta(name + ".beta", channels, 1),
        running_mean(name + ".running_mean", channels, 1, false),
        running_var(name + ".running_var", channels, 1, false),
        momentum_(momentum),
        eps_(eps) {
    gamma.value.setOnes();
    running_var.value.setOnes();
  }

  void collect(ParameterList<Scalar>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
    out.push_back(&running_mean);
    out.push_back(&running_var);
  }

  Sequence<Scalar> forward(const Sequence<Scalar>& x, Mode mode) {
    if (x.channels() != gamma.value.rows()) throw ShapeError("BatchNorm1d channel mismatch");
    mode_ = mode;
    Sequence<Scalar> y;
    y.batch = x.batch;
    y.length = x.length;
    if (mode == Mode::Train) {
      if (x.batch < 2) throw InvalidParameter("BatchNorm1d in train mode needs a batch of at least 2");
      const auto n = static_cast<Scalar>(x.data.cols());
      const Vector<Scalar> mean = x.data.rowwise().mean();
      centered_ = x.data.colwise() - mean;
      const Vector<Scalar> var = centered_.array().square().rowwise().sum() / n;
      inv_std_ = (var.array() + static_cast<Scalar>(eps_)).rsqrt();
      xhat_ = centered_.array().colwise() * inv_std_.array();
      const auto m = static_cast<Scalar>(momentum_);
      running_mean.value.col(0) = (1 - m) * running_mean.value.col(0) + m * mean;
      running_var.value.col(0) = (1 - m) * running_var.value.col(0) + m * var * (n / std::max<Scalar>(n - 1, 1));
    } else {
      inv_std_ = (running_var.value.col(0).array() + static_cast<Scalar>(eps_)).rsqrt();
      xhat_ = (x.data.colwise() - running_mean.value.col(0)).array().colwise() * inv_std_.array();
    }
    y.data = (xhat_.array().colwise() * gamma.value.col(0).array()).colwise() + beta.value.col(0).array();
    return y;
  }

  Sequence<Scalar> backward(const Sequence<Scalar>& dy) {
    gamma.grad.col(0) += (dy.data.array() * xhat_.array()).rowwise().sum().matrix();
    beta.grad.col(0) += dy.data.rowwise().sum();
    Sequence<Scalar> dx;
    dx.batch = dy.batch;
    dx.length = dy.length;
    const Matrix<Scalar> dxhat = dy.data.array().colwise() * gamma.value.col(0).array();
    if (mode_ == Mode::Eval) {
      dx.data = dxhat.array().colwise() * inv_std_.array();
      return dx;
    }
    const auto n = static_cast<Scalar>(dy.data.cols());
    const Vector<Scalar> sum_dxhat = dxhat.rowwise().sum();
    const Vector<Scalar> sum_dxhat_xhat = (dxhat.array() * xhat_.array()).rowwise().sum();
    dx.data = ((n * dxhat.array()).colwise() - sum_dxhat.array() -
               xhat_.array().colwise() * sum_dxhat_xhat.array())
                  .colwise() *
              (inv_std_.array() / n);
    return dx;
  }

  Parameter<Scalar> gamma, beta, running_mean, running_var;

 private:
  double momentum_ = 0.1, eps_ = 1e-5;
  Mode mode_ = Mode::Train;
  Matrix<Scalar> centered_, xhat_;
  Vector<Scalar> inv_std_;
};

// ---------------------------------------------------------------------------

template <typename Scalar>
class ReLU {
 public:
  Matrix<Scalar> forward(const Matrix<Scalar>& x) {
    mask_ = (x.array() > Scalar(0)).template cast<Scalar>();
    return x.cwiseMax(Scalar(0));
  }
  Matrix<Scalar> backward(const Matrix<Scalar>& dy) const { return dy.cwiseProduct(mask_); }

  Sequence<Scalar> forward(const Sequence<Scalar>& x) {
    return Sequence<Scalar>(forward(x.data), x.batch, x.length);
  }
  Sequence<Scalar> backward(const Sequence<Scalar>& dy) const {
    return Sequence<Scalar>(backward(dy.data), dy.batch, dy.length);
  }

 private:
  Matrix<Scalar> mask_;
};

// ---------------------------------------------------------------------------

/// Windowed max per sample. Padding positions act as -inf. Ties route the
/// gradient to the earliest index.
template <typename Scalar>
class MaxPool1d {
 public:
  explicit MaxPool1d(Index kernel = 2, Index stride = 2, Index padding = 0)
      : kernel_(kernel), stride_(stride), padding_(padding) {}

  Index output_length(Index length) const { return (length + 2 * padding_ - kernel_) / stride_ + 1; }

  Sequence<Scalar> forward(const Sequence<Scalar>& x) {
    in_length_ = x.length;
    const Index out_len = output_length(x.length);
    if (out_len < 1) throw ShapeError("MaxPool1d input shorter than the window");
    Sequence<Scalar> y(x.channels(), x.batch, out_len);
    argmax_.resize(x.channels(), x.batch * out_len);
    for (Index b = 0; b < x.batch; ++b) {
      for (Index j = 0; j < out_len; ++j) {
        for (Index c = 0; c < x.channels(); ++c) {
          Scalar best = -std::numeric_limits<Scalar>::infinity();
          Index where = -1;
          for (Index t = 0; t < kernel_; ++t) {
            const Index p = j * stride_ + t - padding_;
            if (p < 0 || p >= x.length) continue;
            const Scalar v = x.data(c, b * x.length + p);
            if (where < 0 || v > best) {
              best = v;
              where = p;
            }
          }
          y.data(c, b * out_len + j) = best;
          argmax_(c, b * out_len + j) = where;
        }
      }
    }
    return y;
  }

  Sequence<Scalar> backward(const Sequence<Scalar>& dy) const {
    Sequence<Scalar> dx(dy.channels(), dy.batch, in_length_);
    for (Index b = 0; b < dy.batch; ++b) {
      for (Index j = 0; j < dy.length; ++j) {
        for (Index c = 0; c < dy.channels(); ++c) {
          const Index p = argmax_(c, b * dy.length + j);
          if (p >= 0) dx.data(c, b * in_length_ + p) += dy.data(c, b * dy.length + j);
        }
      }
    }
    return dx;
  }

 private:
  Index kernel_, stride_, padding_;
  Index in_length_ = 0;
  Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> argmax_;
};

// ---------------------------------------------------------------------------

/// Max over the length axis: [C, batch*L] -> C x batch.
template <typename Scalar>
class GlobalMaxPool {
 public:
  Matrix<Scalar> forward(const Sequence<Scalar>& x) {
    if (x.length < 1) throw ShapeError("GlobalMaxPool needs length >= 1");
    batch_ = x.batch;
    length_ = x.length;
    Matrix<Scalar> y(x.channels(), x.batch);
    argmax_.resize(x.channels(), x.batch);
    for (Index b = 0; b < x.batch; ++b) {
      for (Index c = 0; c < x.channels(); ++c) {
        Index where = 0;
        y(c, b) = x.sample(b).row(c).maxCoeff(&where);
        argmax_(c, b) = where;
      }
    }
    return y;
  }

  Sequence<Scalar> backward(const Matrix<Scalar>& dy) const {
    Sequence<Scalar> dx(dy.rows(), batch_, length_);
    for (Index b = 0; b < batch_; ++b) {
      for (Index c = 0; c < dy.rows(); ++c) dx.data(c, b * length_ + argmax_(c, b)) = dy(c, b);
    }
    return dx;
  }

 private:
  Index batch_ = 0, length_ = 0;
  Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> argmax_;
};

// ---------------------------------------------------------------------------

/// Inverted dropout. Masks come from a counter RNG keyed by
/// (seed, step, stream, element) so a forward pass can be replayed exactly.
template <typename Scalar>
class Dropout {
 public:
  Dropout() = default;
  Dropout(double rate, std::uint64_t stream) : rate_(rate), stream_(stream) {
    if (rate < 0.0 || rate >= 1.0) throw InvalidParameter("dropout rate must be in [0, 1)");
  }

  double rate() const { return rate_; }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Mode mode, const DropoutKey& key) {
    if (mode == Mode::Eval || rate_ == 0.0) {
      mask_.setOnes(x.rows(), x.cols());
      return x;
    }
    const auto keep_scale = static_cast<Scalar>(1.0 / (1.0 - rate_));
    mask_.resize(x.rows(), x.cols());
    for (Index i = 0; i < x.size(); ++i) {
      const double u = counter_uniform(key.seed, key.step, stream_, static_cast<std::uint64_t>(i));
      mask_.data()[i] = u >= rate_ ? keep_scale : Scalar(0);
    }
    return x.cwiseProduct(mask_);
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy) const { return dy.cwiseProduct(mask_); }

 private:
  double rate_ = 0.0;
  std::uint64_t stream_ = 0;
  Matrix<Scalar> mask_;
};

// ---------------------------------------------------------------------------

/// y = W x + b on column-per-sample inputs.
template <typename Scalar>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, Index in_features, Index out_features)
      : weight(name + ".weight", out_features, in_features), bias(name + ".bias", out_features, 1) {
    if (in_features < 1 || out_features < 1) throw InvalidParameter("invalid Linear configuration");
  }

  Index in_features() const { return weight.value.cols(); }
  Index out_features() const { return weight.value.rows(); }

  void init(std::mt19937_64& rng) {
    kaiming_normal(weight.value, in_features(), rng);
    bias.value.setZero();
  }

  void collect(ParameterList<Scalar>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x) {
    if (x.rows() != in_features()) throw ShapeError("Linear input feature mismatch");
    input_ = x;
    Matrix<Scalar> y = weight.value * x;
    y.colwise() += bias.value.col(0);
    return y;
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy) {
    weight.grad.noalias() += dy * input_.transpose();
    bias.grad.col(0) += dy.rowwise().sum();
    return weight.value.transpose() * dy;
  }

  Parameter<Scalar> weight, bias;

 private:
  Matrix<Scalar> input_;
};

// ---------------------------------------------------------------------------

/// conv-BN-ReLU-conv-BN plus identity skip, then ReLU. Shape preserving.
template <typename Scalar>
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(const std::string& name, Index channels)
      : conv1_(name + ".conv1", channels, channels, 1),
        bn1_(name + ".bn1", channels),
        conv2_(name + ".conv2", channels, channels, 1),
        bn2_(name + ".bn2", channels) {}

  void init(std::mt19937_64& rng) {
    conv1_.init(rng);
    conv2_.init(rng);
  }

  void collect(ParameterList<Scalar>& out) {
    conv1_.collect(out);
    bn1_.collect(out);
    conv2_.collect(out);
    bn2_.collect(out);
  }

  Sequence<Scalar> forward(const Sequence<Scalar>& x, Mode mode) {
    Sequence<Scalar> h = conv1_.forward(x);
    h = relu1_.forward(bn1_.forward(h, mode));
    h = bn2_.forward(conv2_.forward(h), mode);
    h.data += x.data;
    return relu_out_.forward(h);
  }

  Sequence<Scalar> backward(const Sequence<Scalar>& dy) {
    const Sequence<Scalar> d = relu_out_.backward(dy);
    Sequence<Scalar> dh = conv2_.backward(bn2_.backward(d));
    dh = conv1_.backward(bn1_.backward(relu1_.backward(dh)));
    dh.data += d.data;
    return dh;
  }

  Conv1d<Scalar>& conv1() { return conv1_; }
  Conv1d<Scalar>& conv2() { return conv2_; }
  BatchNorm1d<Scalar>& bn1() { return bn1_; }
  BatchNorm1d<Scalar>& bn2() { return bn2_; }

 private:
  Conv1d<Scalar> conv1_;
  BatchNorm1d<Scalar> bn1_;
  ReLU<Scalar> relu1_;
  Conv1d<Scalar> conv2_;
  BatchNorm1d<Scalar> bn2_;
  ReLU<Scalar> relu_out_;
};

}  // namespace omni::nn

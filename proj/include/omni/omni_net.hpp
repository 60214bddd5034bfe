#pragma once

#include "omni/config.hpp"
#include "omni/dataset.hpp"
#include "omni/geo_encoder.hpp"
#include "omni/kdelta.hpp"
#include "omni/nn/layers.hpp"

#include <algorithm>
#include <random>
#include <span>
#include <vector>

namespace omni {

/// A mini-batch assembled from cached features. Geometry sequences hold
/// the `a` samples first, then the `b` samples.
template <typename Scalar>
struct Batch {
  nn::Matrix<Scalar> summary;   // d x B
  nn::Matrix<Scalar> affinity;  // A x B
  nn::Matrix<Scalar> min_dist;  // 1 x B
  nn::Matrix<Scalar> centroid;  // 1 x B, already scaled to min(km / cap, 1)
  nn::Sequence<Scalar> geo;     // C x (2B * (P + 2))
  std::vector<int> labels;

  Eigen::Index size() const { return summary.cols(); }
};

template <typename Scalar>
Batch<Scalar> make_batch(std::span<const PairFeatures* const> items, const OmniConfig& cfg) {
  if (items.empty()) throw InvalidParameter("empty batch");
  const auto B = static_cast<Eigen::Index>(items.size());
  const PairFeatures& first = *items[0];
  const Eigen::Index len = first.seq_a.cols();
  Batch<Scalar> batch;
  batch.summary.resize(first.summary.size(), B);
  batch.affinity.resize(first.affinity.size(), B);
  batch.min_dist.resize(1, B);
  batch.centroid.resize(1, B);
  batch.geo = nn::Sequence<Scalar>(first.seq_a.rows(), 2 * B, len);
  for (Eigen::Index b = 0; b < B; ++b) {
    const PairFeatures& f = *items[static_cast<std::size_t>(b)];
    if (f.summary.size() != batch.summary.rows() || f.affinity.size() != batch.affinity.rows() ||
        f.seq_a.cols() != len || f.seq_b.cols() != len) {
      throw ShapeError("features in one batch disagree in shape");
    }
    batch.summary.col(b) = f.summary.cast<Scalar>();
    batch.affinity.col(b) = f.affinity.cast<Scalar>();
    batch.min_dist(0, b) = static_cast<Scalar>(f.min_dist);
    batch.centroid(0, b) = static_cast<Scalar>(std::min(f.centroid_km / cfg.d_cap_km, 1.0));
    batch.geo.sample(b) = f.seq_a.cast<Scalar>();
    batch.geo.sample(B + b) = f.seq_b.cast<Scalar>();
    batch.labels.push_back(f.label);
  }
  return batch;
}

/// Layout of the concatenated feature vector fed to the classifier.
struct FeatureLayout {
  Eigen::Index summary = 0, affinity = 0, min_dist = 0, centroid = 0, geom = 0;

  Eigen::Index summary_at() const { return 0; }
  Eigen::Index affinity_at() const { return summary; }
  Eigen::Index min_dist_at() const { return summary + affinity; }
  Eigen::Index centroid_at() const { return min_dist_at() + min_dist; }
  Eigen::Index geom_at() const { return centroid_at() + centroid; }
  Eigen::Index total() const { return geom_at() + geom; }
};

inline FeatureLayout feature_layout(const OmniConfig& cfg) {
  FeatureLayout l;
  l.summary = cfg.text_dim;
  l.affinity = affinity_dim(cfg.text_dim, cfg.affinity_attrs.size(), cfg.affinity);
  l.min_dist = cfg.d_dist;
  l.centroid = cfg.d_dist;
  l.geom = cfg.geom_embed;
  return l;
}

/// The full matcher: text head, distance embeddings, shared GeoEncoder for
/// both geometries, geometry FC and a one-hidden-layer classifier.
template <typename Scalar>
class OmniNet {
 public:
  using Matrix = nn::Matrix<Scalar>;

  explicit OmniNet(const OmniConfig& cfg)
      : cfg_(cfg),
        layout_(feature_layout(cfg)),
        text_head_("text.head", cfg.text_dim, cfg.text_dim),
        md_alpha_("dist.min.alpha", cfg.d_dist, 1),
        md_beta_("dist.min.beta", cfg.d_dist, 1),
        c_alpha_("dist.centroid.alpha", cfg.d_dist, 1),
        c_beta_("dist.centroid.beta", cfg.d_dist, 1),
        encoder_(kdelta_channels(cfg.k), cfg.kernels, cfg.blocks, cfg.dropout),
        geo_fc_("geo.fc", 2 * cfg.kernels, cfg.geom_embed),
        geo_drop_(cfg.dropout, 2),
        hidden_("mlp.hidden", layout_.total(), cfg.mlp_hidden),
        mlp_drop_(cfg.dropout, 3),
        out_("mlp.out", cfg.mlp_hidden, cfg.n_classes) {
    cfg.validate();
  }

  // Parameter pointers refer into this object.
  OmniNet(const OmniNet&) = delete;
  OmniNet& operator=(const OmniNet&) = delete;

  const OmniConfig& config() const { return cfg_; }
  const FeatureLayout& layout() const { return layout_; }
  GeoEncoder<Scalar>& encoder() { return encoder_; }

  void init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    text_head_.init(rng);
    std::normal_distribution<double> unit(0.0, 1.0);
    for (auto* p : {&md_alpha_, &c_alpha_}) {
      for (Eigen::Index i = 0; i < p->size(); ++i) p->value(i) = static_cast<Scalar>(unit(rng));
    }
    md_beta_.value.setZero();
    c_beta_.value.setZero();
    encoder_.init(rng);
    geo_fc_.init(rng);
    hidden_.init(rng);
    out_.init(rng);
    if (cfg_.zero_init_head) {
      out_.weight.value.setZero();
      out_.bias.value.setZero();
    }
  }

  nn::ParameterList<Scalar> parameters() {
    nn::ParameterList<Scalar> out;
    text_head_.collect(out);
    for (auto* p : {&md_alpha_, &md_beta_, &c_alpha_, &c_beta_}) out.push_back(p);
    encoder_.collect(out);
    geo_fc_.collect(out);
    hidden_.collect(out);
    out_.collect(out);
    return out;
  }

  /// Classifier input for a batch, features x B. Ablated segments are zero.
  Matrix features(const Batch<Scalar>& batch, nn::Mode mode, const nn::DropoutKey& key) {
    const Eigen::Index B = batch.size();
    const Ablation& ab = cfg_.ablation;
    Matrix feat = Matrix::Zero(layout_.total(), B);
    if (batch.summary.rows() != layout_.summary || batch.affinity.rows() != layout_.affinity) {
      throw ShapeError("text features do not match the configured dimensions");
    }
    if (!ab.no_lang) {
      feat.middleRows(layout_.summary_at(), layout_.summary) = text_head_.forward(batch.summary);
      if (!ab.no_att_aff) feat.middleRows(layout_.affinity_at(), layout_.affinity) = batch.affinity;
    }
    if (!ab.no_dist) {
      md_in_ = (batch.min_dist.array() / static_cast<Scalar>(kMaxNormDist) - 1).matrix();
      c_in_ = (batch.centroid.array() - 1).matrix();
      feat.middleRows(layout_.min_dist_at(), layout_.min_dist) =
          (md_alpha_.value.col(0) * md_in_).colwise() + md_beta_.value.col(0);
      feat.middleRows(layout_.centroid_at(), layout_.centroid) =
          (c_alpha_.value.col(0) * c_in_).colwise() + c_beta_.value.col(0);
    }
    if (!ab.no_geoenc) {
      if (batch.geo.batch != 2 * B) throw ShapeError("geometry batch does not match text batch");
      const Matrix enc = encoder_.forward(batch.geo, mode, key);
      Matrix pair(2 * cfg_.kernels, B);
      pair.topRows(cfg_.kernels) = enc.leftCols(B);
      pair.bottomRows(cfg_.kernels) = enc.rightCols(B);
      feat.middleRows(layout_.geom_at(), layout_.geom) =
          geo_drop_.forward(geo_relu_.forward(geo_fc_.forward(pair)), mode, key);
    }
    return feat;
  }

  /// Logits, classes x B.
  Matrix forward(const Batch<Scalar>& batch, nn::Mode mode, const nn::DropoutKey& key) {
    const Matrix feat = features(batch, mode, key);
    return out_.forward(mlp_drop_.forward(hidden_relu_.forward(hidden_.forward(feat)), mode, key));
  }

  /// Accumulates parameter gradients from d loss / d logits.
  void backward(const Matrix& dlogits) {
    const Matrix dfeat = hidden_.backward(hidden_relu_.backward(mlp_drop_.backward(out_.backward(dlogits))));
    const Ablation& ab = cfg_.ablation;
    if (!ab.no_lang) text_head_.backward(dfeat.middleRows(layout_.summary_at(), layout_.summary));
    if (!ab.no_dist) {
      const Matrix dmd = dfeat.middleRows(layout_.min_dist_at(), layout_.min_dist);
      const Matrix dc = dfeat.middleRows(layout_.centroid_at(), layout_.centroid);
      md_alpha_.grad.col(0) += dmd * md_in_.transpose();
      md_beta_.grad.col(0) += dmd.rowwise().sum();
      c_alpha_.grad.col(0) += dc * c_in_.transpose();
      c_beta_.grad.col(0) += dc.rowwise().sum();
    }
    if (!ab.no_geoenc) {
      const Matrix dpair =
          geo_fc_.backward(geo_relu_.backward(geo_drop_.backward(dfeat.middleRows(layout_.geom_at(), layout_.geom))));
      const Eigen::Index B = dpair.cols();
      Matrix denc(cfg_.kernels, 2 * B);
      denc.leftCols(B) = dpair.topRows(cfg_.kernels);
      denc.rightCols(B) = dpair.bottomRows(cfg_.kernels);
      encoder_.backward(denc);
    }
  }

 private:
  OmniConfig cfg_;
  FeatureLayout layout_;
  nn::Linear<Scalar> text_head_;
  nn::Parameter<Scalar> md_alpha_, md_beta_, c_alpha_, c_beta_;
  GeoEncoder<Scalar> encoder_;
  nn::Linear<Scalar> geo_fc_;
  nn::ReLU<Scalar> geo_relu_;
  nn::Dropout<Scalar> geo_drop_;
  nn::Linear<Scalar> hidden_;
  nn::ReLU<Scalar> hidden_relu_;
  nn::Dropout<Scalar> mlp_drop_;
  nn::Linear<Scalar> out_;
  Matrix md_in_, c_in_;
};

/// Closed-form parameter count. `trainable_only` leaves out batch-norm
/// running statistics.
inline Eigen::Index analytic_parameter_count(const OmniConfig& cfg, bool trainable_only) {
  const Eigen::Index d = cfg.text_dim;
  const Eigen::Index l = cfg.kernels;
  const Eigen::Index C = kdelta_channels(cfg.k);
  const Eigen::Index bn = trainable_only ? 2 * l : 4 * l;
  const Eigen::Index encoder = 3 * C * l + bn + cfg.blocks * (2 * 3 * l * l + 2 * bn);
  const Eigen::Index features = feature_layout(cfg).total();
  return (d * d + d) + 4 * cfg.d_dist + encoder + (2 * l * cfg.geom_embed + cfg.geom_embed) +
         (features * cfg.mlp_hidden + cfg.mlp_hidden) + (cfg.mlp_hidden * cfg.n_classes + cfg.n_classes);
}

}  // namespace omni

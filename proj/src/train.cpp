#include "omni/train.hpp"

#include "omni/error.hpp"
#include "omni/nn/loss.hpp"
#include "omni/nn/optim.hpp"
#include "omni/nn/random.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>

namespace omni {
namespace {

std::vector<double> class_weights(const OmniConfig& cfg) {
  if (cfg.n_classes == 2 && cfg.pos_weight != 1.0) return {1.0, cfg.pos_weight};
  return {};
}

Batch<double> gather(const std::vector<PairFeatures>& data, const std::vector<std::size_t>& idx,
                     const OmniConfig& cfg) {
  std::vector<const PairFeatures*> items;
  items.reserve(idx.size());
  for (std::size_t i : idx) items.push_back(&data[i]);
  return make_batch<double>(items, cfg);
}

std::vector<Eigen::MatrixXd> snapshot(const nn::ParameterList<double>& params) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(params.size());
  for (const auto* p : params) out.push_back(p->value);
  return out;
}

void restore(const nn::ParameterList<double>& params, const std::vector<Eigen::MatrixXd>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

}  // namespace

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, int batch, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(nn::splitmix64(seed ^ (0x5eedULL + static_cast<std::uint64_t>(epoch))));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  const auto b = static_cast<std::size_t>(batch);
  for (std::size_t at = 0; at < n; at += b) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, at + b)));
  }
  if (out.size() > 1 && out.back().size() == 1) {
    out[out.size() - 2].push_back(out.back()[0]);
    out.pop_back();
  }
  return out;
}

double loss_and_grad(Model& model, const Batch<double>& batch, const nn::DropoutKey& key) {
  const auto params = model.parameters();
  nn::zero_grad(params);
  const Eigen::MatrixXd logits = model.forward(batch, nn::Mode::Train, key);
  const std::vector<double> weights = class_weights(model.config());
  const auto result = nn::softmax_cross_entropy<double>(logits, batch.labels, weights);
  model.backward(result.grad);
  return result.loss;
}

TrainResult train(Model& model, const std::vector<PairFeatures>& train_set,
                  const std::vector<PairFeatures>& valid_set, std::uint64_t seed) {
  if (train_set.size() < 2) throw ConfigError("training split needs at least two pairs");
  if (valid_set.empty()) throw ConfigError("validation split is empty");
  const OmniConfig& cfg = model.config();
  const auto params = model.parameters();

  long total = 0;
  for (int e = 1; e <= cfg.epochs; ++e) {
    total += static_cast<long>(epoch_batches(train_set.size(), cfg.batch, seed, e).size());
  }
  const nn::LinearWarmupSchedule schedule{cfg.lr, cfg.warmup, total};

  TrainResult result;
  result.best_valid_f1 = -1.0;
  std::vector<Eigen::MatrixXd> best;
  long step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t seen = 0;
    double lr = 0.0;
    for (const auto& idx : epoch_batches(train_set.size(), cfg.batch, seed, epoch)) {
      const Batch<double> batch = gather(train_set, idx, cfg);
      const double loss = loss_and_grad(model, batch, {seed, static_cast<std::uint64_t>(step)});
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite loss " + std::to_string(loss) + " at epoch " + std::to_string(epoch) +
                           ", step " + std::to_string(step) + ", lr " + std::to_string(schedule.lr_at(step + 1)));
      }
      ++step;
      lr = schedule.lr_at(step);
      nn::adam_step(params, lr);
      loss_sum += loss * static_cast<double>(idx.size());
      seen += idx.size();
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.valid_f1 = selection_score(evaluate(model, valid_set));
    rec.lr = lr;
    result.history.push_back(rec);
    spdlog::info("epoch {:>2}  loss {:.5f}  valid F1 {:.4f}", epoch, rec.train_loss, rec.valid_f1);
    if (rec.valid_f1 > result.best_valid_f1) {
      result.best_valid_f1 = rec.valid_f1;
      result.best_epoch = epoch;
      best = snapshot(params);
    }
  }
  restore(params, best);
  result.steps = step;
  return result;
}

Eigen::MatrixXd predict_proba(Model& model, const std::vector<PairFeatures>& data, int batch) {
  Eigen::MatrixXd out(model.config().n_classes, static_cast<Eigen::Index>(data.size()));
  for (std::size_t at = 0; at < data.size(); at += static_cast<std::size_t>(batch)) {
    std::vector<std::size_t> idx;
    for (std::size_t i = at; i < std::min(data.size(), at + static_cast<std::size_t>(batch)); ++i) idx.push_back(i);
    const Batch<double> b = gather(data, idx, model.config());
    const Eigen::MatrixXd logits = model.forward(b, nn::Mode::Eval, {});
    out.middleCols(static_cast<Eigen::Index>(at), b.size()) = nn::softmax<double>(logits);
  }
  return out;
}

std::vector<int> predict(Model& model, const std::vector<PairFeatures>& data, int batch) {
  const Eigen::MatrixXd proba = predict_proba(model, data, batch);
  std::vector<int> out;
  out.reserve(data.size());
  for (Eigen::Index j = 0; j < proba.cols(); ++j) {
    Eigen::Index arg = 0;
    proba.col(j).maxCoeff(&arg);
    out.push_back(static_cast<int>(arg));
  }
  return out;
}

Metrics evaluate(Model& model, const std::vector<PairFeatures>& data) {
  std::vector<int> gold;
  gold.reserve(data.size());
  for (const auto& f : data) gold.push_back(f.label);
  return compute_metrics(gold, predict(model, data), model.config().n_classes);
}

// ---------------------------------------------------------------------------

nn::Checkpoint to_checkpoint(Model& model, const KeyValues& metadata) {
  nn::Checkpoint ckpt;
  KeyValues meta = metadata;
  model.config().store(meta);
  ckpt.metadata = meta.to_text();
  for (const auto* p : model.parameters()) ckpt.blobs.push_back(nn::to_blob(*p));
  return ckpt;
}

void save_model(const std::filesystem::path& path, Model& model, const KeyValues& metadata) {
  nn::write_checkpoint(path, to_checkpoint(model, metadata));
}

std::unique_ptr<Model> load_model(const std::filesystem::path& path, KeyValues* metadata) {
  const nn::Checkpoint ckpt = nn::read_checkpoint(path);
  const KeyValues meta = KeyValues::parse(ckpt.metadata);
  auto model = std::make_unique<Model>(OmniConfig::from(meta));
  for (auto* p : model->parameters()) {
    const nn::Blob* blob = ckpt.find(p->name);
    if (blob == nullptr) throw IoError("checkpoint is missing parameter '" + p->name + "'");
    nn::from_blob(*blob, *p);
  }
  if (ckpt.blobs.size() != model->parameters().size()) throw IoError("checkpoint has unexpected parameters");
  if (metadata != nullptr) *metadata = meta;
  return model;
}

std::uint64_t parameter_hash(const nn::ParameterList<double>& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t word) {
    for (int i = 0; i < 8; ++i) {
      h ^= (word >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto* p : params) {
    mix(static_cast<std::uint64_t>(p->value.rows()));
    mix(static_cast<std::uint64_t>(p->value.cols()));
    for (Eigen::Index i = 0; i < p->value.size(); ++i) mix(std::bit_cast<std::uint64_t>(p->value.data()[i]));
  }
  return h;
}

}  // namespace omni

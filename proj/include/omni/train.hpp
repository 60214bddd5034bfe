#pragma once

#include "omni/config.hpp"
#include "omni/dataset.hpp"
#include "omni/metrics.hpp"
#include "omni/nn/checkpoint.hpp"
#include "omni/omni_net.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace omni {

using Model = OmniNet<double>;

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_f1 = 0.0;
  double lr = 0.0;  // rate used by the last update of the epoch
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_valid_f1 = 0.0;
  long steps = 0;
};

/// Mini-batch index lists for one epoch. A trailing batch of a single
/// sample is merged into the previous one.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, int batch, std::uint64_t seed, int epoch);

/// Adam with linear warmup/decay over every batch of every epoch. The model
/// must already be initialized; on return it holds the parameters of the
/// epoch with the best validation score.
TrainResult train(Model& model, const std::vector<PairFeatures>& train_set,
                  const std::vector<PairFeatures>& valid_set, std::uint64_t seed);

/// Class probabilities, classes x n, in eval mode.
Eigen::MatrixXd predict_proba(Model& model, const std::vector<PairFeatures>& data, int batch = 64);
std::vector<int> predict(Model& model, const std::vector<PairFeatures>& data, int batch = 64);
Metrics evaluate(Model& model, const std::vector<PairFeatures>& data);

/// Mean loss and gradients for one batch; used by training and gradient
/// checks.
double loss_and_grad(Model& model, const Batch<double>& batch, const nn::DropoutKey& key);

/// Checkpoint metadata holds the resolved configuration text.
nn::Checkpoint to_checkpoint(Model& model, const KeyValues& metadata);
void save_model(const std::filesystem::path& path, Model& model, const KeyValues& metadata);
/// Rebuilds the model from the stored configuration.
std::unique_ptr<Model> load_model(const std::filesystem::path& path, KeyValues* metadata = nullptr);
/// FNV-1a over every parameter value; changes iff some value changes.
std::uint64_t parameter_hash(const nn::ParameterList<double>& params);

}  // namespace omni

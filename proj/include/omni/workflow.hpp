#pragma once

#include "omni/config.hpp"
#include "omni/probe.hpp"
#include "omni/prompt.hpp"
#include "omni/synth.hpp"
#include "omni/text.hpp"
#include "omni/train.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace omni {

/// Resolved view of a configuration file plus overrides. Besides the model
/// keys it understands dataset paths, output and per-command settings; any
/// other key is a ConfigError.
struct RunConfig {
  KeyValues kv;
  OmniConfig model;
  std::uint64_t seed = 1;
  std::filesystem::path out = "out";

  static RunConfig resolve(const KeyValues& kv);
  static const std::vector<std::string>& run_keys();

  std::optional<std::filesystem::path> path(const std::string& key) const;
  /// ConfigError when the key is unset or the file does not exist.
  std::filesystem::path require_path(const std::string& key) const;
  /// Writes config.txt into `dir`.
  void write_resolved(const std::filesystem::path& dir) const;
};

/// Trigram encoder, or the precomputed table named by the `embeddings` key.
std::unique_ptr<TextEncoder> make_text_encoder(const RunConfig& run);

struct TrainOutcome {
  TrainResult result;
  Metrics test;
  std::filesystem::path dir;
  double seconds = 0.0;
};

/// Trains on the configured splits and writes config.txt, model.ckpt,
/// metrics.json, history.csv and run.json into `run.out`.
TrainOutcome cmd_train(const RunConfig& run);
Metrics cmd_evaluate(const RunConfig& run);

struct AblationRow {
  std::string ablation;
  double best_valid_f1 = 0.0;
  double test_f1 = 0.0;
};
/// One training run without ablation and one per flag, in out/ablate/<flag>.
std::vector<AblationRow> cmd_ablate(const RunConfig& run, const std::vector<std::string>& flags);

struct SweepRow {
  int P = 0;
  double best_valid_f1 = 0.0;
  double test_f1 = 0.0;
};
std::vector<SweepRow> cmd_sweep_p(const RunConfig& run, const std::vector<int>& p_values);

/// Uses the encoder of the `checkpoint` key, or a freshly initialized one.
std::vector<ProbeReport> cmd_probe(const RunConfig& run);
PromptRunResult cmd_prompt_run(const RunConfig& run);

struct BenchReport {
  long params_total = 0;
  long params_trainable = 0;
  long params_analytic_total = 0;
  long params_analytic_trainable = 0;
  std::size_t samples = 0;
  int repetitions = 0;
  /// Preprocessing, text encoding and forward pass.
  double s_per_1000 = 0.0;
  /// Forward pass on prepared features only.
  double s_per_1000_model = 0.0;
  std::vector<double> rep_seconds;
};
BenchReport cmd_bench(const RunConfig& run);
std::string bench_report_json(const BenchReport& r);

/// One JSON line of vertex statistics per input geometry, in processed.jsonl.
std::size_t cmd_preprocess(const RunConfig& run);
/// Writes train/valid/test JSONL files for the synthetic task.
Splits cmd_synth(const RunConfig& run);

}  // namespace omni

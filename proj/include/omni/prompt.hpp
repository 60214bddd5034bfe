#pragma once

#include "omni/dataset.hpp"
#include "omni/metrics.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace omni {

enum class SerializationStyle { Simple, AttributeValue, PlmSerialization, AttributeValueDistance };

std::string to_string(SerializationStyle s);
SerializationStyle parse_style(const std::string& s);
inline bool needs_distance(SerializationStyle s) { return s == SerializationStyle::AttributeValueDistance; }

/// Replaces every {{key}} with its binding. Throws TemplateError for an
/// unbound or unterminated placeholder.
std::string render(std::string_view text, const std::map<std::string, std::string>& bindings);

/// The set of template files one prompt is assembled from. Missing files in
/// a template directory fall back to the built-in text.
struct TemplateSet {
  std::map<std::string, std::string> files;

  static TemplateSet builtin();
  static TemplateSet load(const std::filesystem::path& dir);
  const std::string& get(const std::string& name) const;
  /// FNV-1a over the file names and contents.
  std::uint64_t hash() const;
};

struct PromptTemplate {
  TemplateSet templates = TemplateSet::builtin();
  SerializationStyle style = SerializationStyle::Simple;
  int n_classes = 2;
};

struct Demo {
  LabeledPair pair;
  std::optional<double> distance_km;
};

/// Haversine distance between vertex centroids, as inserted into prompts.
double prompt_distance_km(const LabeledPair& pair);
std::string format_distance(double km);

/// Task description, then the demonstrations with their gold answers, then
/// the query pair.
std::string build_prompt(const PromptTemplate& t, const LabeledPair& pair, std::optional<double> distance_km,
                         std::span<const Demo> demos = {});

/// The answer word a demonstration shows for `label`.
std::string answer_text(int label, int n_classes);

enum class DemoStrategy { Random, ClassBalanced };

struct FewShotConfig {
  DemoStrategy strategy = DemoStrategy::Random;
  std::size_t n_random = 4;
  std::size_t n_per_class = 2;
  std::uint64_t seed = 1;
};

std::string to_string(DemoStrategy s);
DemoStrategy parse_strategy(const std::string& s);

/// Throws SamplingError when the split cannot supply the demonstrations.
std::vector<LabeledPair> sample_demos(std::span<const LabeledPair> train, const FewShotConfig& cfg, int n_classes);

/// First class keyword in `raw` (case-insensitive, whole words), if any.
std::optional<int> match_answer(std::string_view raw, int n_classes);
/// Like match_answer, but falls back to the negative/"unknown" class and
/// bumps `unparseable`.
int parse_answer(std::string_view raw, int n_classes, std::size_t& unparseable);

struct EndpointConfig {
  /// Full URL of the chat-completion route, e.g. http://host:port/v1/chat/completions.
  std::string url;
  std::string model = "llama-3-8b-instruct";
  double temperature = 0.0;
  std::chrono::milliseconds timeout{60000};
  int max_retries = 3;
  std::chrono::milliseconds backoff{500};
  /// Environment variable holding a bearer token; unset means no header.
  std::string api_key_env = "OMNI_API_KEY";
};

/// One user message in, the first choice's content out. Retries 429, 5xx
/// and connection failures; other statuses throw HttpError immediately.
std::string chat_complete(const EndpointConfig& endpoint, const std::string& prompt);

struct PromptRunOptions {
  PromptTemplate prompt;
  std::optional<FewShotConfig> few_shot;
  EndpointConfig endpoint;
  std::size_t parallelism = 4;
  std::filesystem::path out_root = "runs";
};

struct PromptRecord {
  std::string pair_id;
  std::string prompt_hash;
  std::string raw;
  int parsed = 0;
  int gold = 0;
};

struct PromptRunResult {
  std::filesystem::path dir;
  std::vector<PromptRecord> records;  // sorted by pair id
  Metrics metrics;
  std::size_t unparseable = 0;
};

/// Runs every test pair through the endpoint and writes predictions.jsonl,
/// metrics.json and config.txt into a fresh run directory.
PromptRunResult prompt_run(const PromptRunOptions& opt, std::span<const LabeledPair> test,
                           std::span<const LabeledPair> train = {});

std::uint64_t fnv1a(std::string_view text);
std::string hex64(std::uint64_t h);

}  // namespace omni

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace omni {

/// Flat key=value settings. Files accept '#' and ';' comments; later
/// `set` calls override earlier values.
class KeyValues {
 public:
  static KeyValues load(const std::filesystem::path& path);
  static KeyValues parse(const std::string& text);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> find(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  long get_int(const std::string& key, long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  /// Sorted "key = value" lines.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

std::vector<std::string> split_list(const std::string& text, char sep = ',');

enum class AffinityVariant { Default, PooledCosine };

struct Ablation {
  bool no_lang = false;
  bool no_geoenc = false;
  bool no_att_aff = false;
  bool no_dist = false;

  bool any() const { return no_lang || no_geoenc || no_att_aff || no_dist; }
  bool all() const { return no_lang && no_geoenc && no_att_aff && no_dist; }
  /// Comma-separated flag names, or "none".
  std::string label() const;
  void enable(const std::string& flag);
};

struct OmniConfig {
  int P = 300;
  int k = 6;
  Eigen::Index kernels = 512;
  int blocks = 6;
  double dropout = 0.3;
  double lr = 3e-4;
  long warmup = 100;
  int epochs = 15;
  int batch = 16;
  AffinityVariant affinity = AffinityVariant::Default;
  int n_classes = 2;
  Ablation ablation;
  Eigen::Index d_dist = 32;
  Eigen::Index geom_embed = 256;
  Eigen::Index mlp_hidden = 256;
  double d_cap_km = 20.0;
  std::vector<std::string> affinity_attrs{"name", "type"};
  Eigen::Index text_dim = 64;
  /// Cross-entropy weight of the positive class in binary mode; 1 is unweighted.
  double pos_weight = 1.0;
  bool zero_init_head = false;

  /// Throws ConfigError on any inconsistency.
  void validate() const;

  static OmniConfig from(const KeyValues& kv);
  void store(KeyValues& kv) const;
};

std::string to_string(AffinityVariant v);
AffinityVariant parse_affinity(const std::string& s);

/// Keys understood by OmniConfig::from.
const std::vector<std::string>& model_config_keys();

}  // namespace omni

#pragma once

#include "omni/geometry.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace omni {

struct EntityRecord {
  std::string id;
  /// Attribute name/value pairs in a stable order.
  std::vector<std::pair<std::string, std::string>> attrs;
  Geometry geometry;

  /// Value of `name`, or empty when the attribute is absent.
  std::string value_of(const std::string& name) const;
};

/// "[COL] name [VAL] value ..." over all attributes in order.
std::string serialize_entity(const EntityRecord& e);

/// "[CLS] Ser(a) [SEP] Ser(b) [SEP]".
std::string serialize_pair(const EntityRecord& a, const EntityRecord& b);

/// Text features for one entity pair. `val_*` play the [VAL]-token role and
/// `pooled_*` the token-pooled role; both hold one vector per affinity
/// attribute.
struct TextEncoding {
  Eigen::VectorXd summary;
  std::vector<Eigen::VectorXd> val_a, val_b, pooled_a, pooled_b;

  Eigen::Index dim() const { return summary.size(); }
  std::size_t attribute_count() const { return val_a.size(); }
};

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual TextEncoding encode(const EntityRecord& a, const EntityRecord& b,
                              const std::string& pair_id) const = 0;
  virtual Eigen::Index dim() const = 0;
  virtual std::size_t attribute_count() const = 0;
};

/// Deterministic stand-in for a language model: each value becomes a
/// character-trigram count vector hashed into `dim` buckets and
/// L2-normalized (zero when empty).
class TrigramEncoder final : public TextEncoder {
 public:
  TrigramEncoder(std::vector<std::string> affinity_attrs, Eigen::Index dim = 64);

  TextEncoding encode(const EntityRecord& a, const EntityRecord& b,
                      const std::string& pair_id) const override;
  Eigen::Index dim() const override { return dim_; }
  std::size_t attribute_count() const override { return attrs_.size(); }

  Eigen::VectorXd embed(const std::string& text) const;
  /// Bucket index of every trigram of `text`, in order.
  std::vector<Eigen::Index> buckets(const std::string& text) const;

 private:
  std::vector<std::string> attrs_;
  Eigen::Index dim_;
};

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Looks up encodings produced elsewhere (for example by a transformer) by
/// pair id.
class PrecomputedEncoder final : public TextEncoder {
 public:
  static constexpr std::uint32_t kVersion = 1;

  PrecomputedEncoder(Eigen::Index dim, std::size_t attribute_count,
                     std::map<std::string, TextEncoding> table);

  TextEncoding encode(const EntityRecord& a, const EntityRecord& b,
                      const std::string& pair_id) const override;
  Eigen::Index dim() const override { return dim_; }
  std::size_t attribute_count() const override { return attrs_; }
  const std::map<std::string, TextEncoding>& table() const { return table_; }

 private:
  Eigen::Index dim_;
  std::size_t attrs_;
  std::map<std::string, TextEncoding> table_;
};

/// Binary layout, little-endian:
///   "OMNIEMB1" | u32 version | u32 d | u32 H | u64 count |
///   count x (u32 len, id utf-8 | summary | val_a[H] | val_b[H] |
///            pooled_a[H] | pooled_b[H]), every vector d x f32.
void write_precomputed(const std::filesystem::path& path, Eigen::Index dim, std::size_t attribute_count,
                       const std::map<std::string, TextEncoding>& table);
PrecomputedEncoder load_precomputed(const std::filesystem::path& path);

}  // namespace omni

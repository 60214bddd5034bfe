#pragma once

#include "omni/config.hpp"
#include "omni/geometry.hpp"
#include "omni/text.hpp"

#include <Eigen/Core>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace omni {

struct LabeledPair {
  EntityRecord a;
  EntityRecord b;
  int label = 0;

  std::string pair_id() const { return a.id + "|" + b.id; }
};

/// Label names for a class count: {non_match, match} or
/// {same_as, part_of, serves, unknown}.
const std::vector<std::string>& class_names(int n_classes);
/// Index of the class a failed or unknown prediction falls back to.
int fallback_class(int n_classes);
/// Accepts a class name, or for binary data also 0/1 and true/false.
int parse_label(const std::string& text, int n_classes);

/// One JSON object per line:
/// {id_a, id_b, attrs_a: {...}, attrs_b: {...}, geom_a: WKT, geom_b: WKT, label}.
std::vector<LabeledPair> load_dataset(const std::filesystem::path& path, int n_classes);
std::vector<LabeledPair> parse_dataset(const std::string& text, int n_classes);
void save_dataset(const std::filesystem::path& path, const std::vector<LabeledPair>& pairs, int n_classes);
std::string dataset_line(const LabeledPair& pair, int n_classes);

// ---------------------------------------------------------------------------

/// [val_a ; val_b ; val_a .* val_b] for attribute h.
Eigen::VectorXd affinity_default(const TextEncoding& enc, std::size_t h);
/// Cosine of the pooled vectors for attribute h; 0 when either is zero.
double affinity_cosine(const TextEncoding& enc, std::size_t h);
/// Concatenated affinities over all attributes.
Eigen::VectorXd affinity_features(const TextEncoding& enc, AffinityVariant variant);
/// summary followed by the affinities.
Eigen::VectorXd language_output(const TextEncoding& enc, AffinityVariant variant);
Eigen::Index affinity_dim(Eigen::Index d, std::size_t attributes, AffinityVariant variant);

/// Largest normalized distance two geometries inside [-1,1]^2 can have.
inline const double kMaxNormDist = 2.0 * std::sqrt(2.0);

/// Everything the network consumes for one pair, computed once up front.
struct PairFeatures {
  std::string pair_id;
  Eigen::VectorXd summary;
  Eigen::VectorXd affinity;
  double min_dist = 0.0;
  double centroid_km = 0.0;
  /// Padded KDelta sequences, channels x (P + 2).
  Eigen::MatrixXd seq_a, seq_b;
  int label = 0;
};

PairFeatures make_features(const LabeledPair& pair, const TextEncoder& encoder, const OmniConfig& cfg);
std::vector<PairFeatures> make_features(const std::vector<LabeledPair>& pairs, const TextEncoder& encoder,
                                        const OmniConfig& cfg);

/// KDelta encoding plus one row of padding on each side, transposed to
/// channels x (P + 2).
Eigen::MatrixXd encode_geometry(const ProcessedGeometry& g, int k);

}  // namespace omni

#pragma once

#include "omni/dataset.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace omni {

enum class SynthVariant {
  /// match iff normalized distance < 0.1 and name trigram cosine > 0.6
  Standard,
  /// names carry no signal; positives are near-copies of a polygon, negatives
  /// are shrunken copies inside it or lines across it
  GeometryOnly,
  /// Standard rule, but every geometry is a point
  PointsOnly,
};

struct SynthOptions {
  std::size_t n = 3100;
  /// Negatives per positive.
  double neg_ratio = 30.0;
  std::uint64_t seed = 1;
  SynthVariant variant = SynthVariant::Standard;
  /// Vertex budget used when checking labels against the rule.
  int P = 300;
};

struct Splits {
  std::vector<LabeledPair> train, valid, test;
};

/// Rule thresholds for the Standard and PointsOnly variants.
inline constexpr double kMatchMaxDistance = 0.1;
inline constexpr double kMatchMinCosine = 0.6;

/// Trigram cosine of the two "name" attributes with the 64-bucket hasher.
double name_cosine(const LabeledPair& pair);

/// Stratified 60/20/20 split of a generated pair list.
Splits synth_er_dataset(const SynthOptions& opt);
std::vector<LabeledPair> synth_er_pairs(const SynthOptions& opt);
Splits stratified_split(std::vector<LabeledPair> pairs, std::uint64_t seed, int n_classes = 2);

SynthVariant parse_synth_variant(const std::string& s);
std::string to_string(SynthVariant v);

// Shape helpers shared with the probe generator. All work in local metres.
namespace synth {

/// Star-shaped ring around the origin: `n` vertices at sorted random angles
/// with radii in [r_min, r_max].
Ring star_ring(std::mt19937_64& rng, int n, double r_min, double r_max);
/// Regular n-gon of circumradius r, rotated by `angle`.
Ring regular_ring(int n, double r, double angle);
/// Maps local metres around (lon0, lat0) to degrees.
Geometry to_lonlat(const Geometry& metres, double lon0, double lat0);

}  // namespace synth

}  // namespace omni

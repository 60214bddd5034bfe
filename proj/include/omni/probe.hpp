#pragma once

#include "omni/config.hpp"
#include "omni/geo_encoder.hpp"
#include "omni/geometry.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace omni {

enum class Relation { Contain, Touch, Overlap };

std::string to_string(Relation r);
Relation parse_relation(const std::string& s);

/// `target` says whether `relation` holds for (a, b). Contain means b lies
/// inside a, boundary included.
struct RelationSample {
  Geometry a;
  Geometry b;
  Relation relation = Relation::Contain;
  bool target = false;
};

// Exact predicates for convex simple polygons given in one planar frame.
namespace predicate {

bool contains(const Ring& outer, const Ring& inner);
bool interiors_intersect(const Ring& p, const Ring& q);
bool boundaries_intersect(const Ring& p, const Ring& q);
bool touches(const Ring& p, const Ring& q);
bool overlaps(const Ring& p, const Ring& q);
bool holds(Relation r, const Ring& a, const Ring& b);

}  // namespace predicate

/// Balanced positives and negatives for one relation. Negatives come from the
/// other two relations and from disjoint pairs. Geometries are in lon/lat.
std::vector<RelationSample> gen_relation_dataset(Relation relation, std::size_t n, std::uint64_t seed);

/// Re-checks a sample against the predicates after projecting both
/// geometries to local metres.
bool verify_sample(const RelationSample& s);

struct ProbeOptions {
  int epochs = 10;
  int batch = 32;
  double lr = 1e-2;
  double train_fraction = 0.8;
  std::uint64_t seed = 1;
};

struct ProbeReport {
  Relation relation = Relation::Contain;
  double accuracy = 0.0;
  double train_accuracy = 0.0;
  std::size_t n = 0;
  std::size_t n_test = 0;
  std::uint64_t encoder_hash = 0;
};

/// Trains a linear head on [enc(a); enc(b)] with the encoder frozen. Throws
/// ContractViolation when the encoder parameters change during training.
ProbeReport probe_train_eval(GeoEncoder<double>& encoder, const OmniConfig& cfg,
                             const std::vector<RelationSample>& data, const ProbeOptions& opt = {});

std::string probe_report_json(const ProbeReport& r);

}  // namespace omni

#pragma once

#include "omni/geometry.hpp"

#include <Eigen/Core>

namespace omni {

/// P x (2 + 4k) per-vertex encoding. Row m holds the vertex followed by
/// deltas to its k predecessors (farthest first) and k successors (nearest
/// first). Polygonal sequences wrap; linear sequences use a zero delta where
/// the neighbour does not exist.
using KDeltaMatrix = Eigen::MatrixXd;

enum class PadKind { Circular, Zero };

struct PaddedSequence {
  Eigen::MatrixXd rows;  // (P + 2*pad) x (2 + 4k)
  PadKind kind = PadKind::Circular;
  int pad = 0;
};

constexpr Eigen::Index kdelta_channels(int k) { return 2 + 4 * static_cast<Eigen::Index>(k); }

KDeltaMatrix kdelta_encode(const ProcessedGeometry& g, int k);

/// Circular padding for polygonal geometries, zero rows for linear ones.
PaddedSequence pad_sequence(const KDeltaMatrix& m, GeometryClass cls, int pad);

}  // namespace omni

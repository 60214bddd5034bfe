#include "omni/kdelta.hpp"

#include "omni/error.hpp"

namespace omni {

KDeltaMatrix kdelta_encode(const ProcessedGeometry& g, int k) {
  const Eigen::Index P = g.size();
  if (k < 1 || k >= P) throw InvalidParameter("KDelta needs 1 <= k < P");
  const bool cyclic = g.cls == GeometryClass::Polygonal;

  KDeltaMatrix out(P, kdelta_channels(k));
  for (Eigen::Index m = 0; m < P; ++m) {
    const Eigen::Vector2d v = g.vertices.col(m);
    out(m, 0) = v.x();
    out(m, 1) = v.y();
    auto delta = [&](Eigen::Index offset) -> Eigen::Vector2d {
      Eigen::Index j = m + offset;
      if (cyclic) {
        j = ((j % P) + P) % P;
      } else if (j < 0 || j >= P) {
        return Eigen::Vector2d::Zero();
      }
      return v - g.vertices.col(j);
    };
    Eigen::Index col = 2;
    for (int back = k; back >= 1; --back, col += 2) out.row(m).segment<2>(col) = delta(-back);
    for (int fwd = 1; fwd <= k; ++fwd, col += 2) out.row(m).segment<2>(col) = delta(fwd);
  }
  return out;
}

PaddedSequence pad_sequence(const KDeltaMatrix& m, GeometryClass cls, int pad) {
  if (pad < 1) throw InvalidParameter("pad must be at least 1");
  const Eigen::Index P = m.rows();
  if (pad > P) throw InvalidParameter("pad cannot exceed the sequence length");
  PaddedSequence out;
  out.pad = pad;
  out.kind = cls == GeometryClass::Polygonal ? PadKind::Circular : PadKind::Zero;
  out.rows = Eigen::MatrixXd::Zero(P + 2 * pad, m.cols());
  out.rows.middleRows(pad, P) = m;
  if (out.kind == PadKind::Circular) {
    out.rows.topRows(pad) = m.bottomRows(pad);
    out.rows.bottomRows(pad) = m.topRows(pad);
  }
  return out;
}

}  // namespace omni

#include "omni/error.hpp"
#include "omni/kdelta.hpp"

#include <doctest.h>

using namespace omni;

namespace {

ProcessedGeometry line_of(int n, GeometryClass cls) {
  ProcessedGeometry g;
  g.cls = cls;
  g.vertices.resize(2, n);
  for (int i = 0; i < n; ++i) g.vertices.col(i) = Eigen::Vector2d(0.1 * i, 0.01 * i * i);
  return g;
}

}  // namespace

TEST_SUITE("kdelta") {

TEST_CASE("shape is P x (2 + 4k)") {
  const auto m = kdelta_encode(line_of(10, GeometryClass::Linear), 3);
  CHECK(m.rows() == 10);
  CHECK(m.cols() == 14);
  CHECK(kdelta_channels(6) == 26);
}

TEST_CASE("row layout: vertex, predecessors farthest first, successors nearest first") {
  const auto g = line_of(8, GeometryClass::Linear);
  const auto m = kdelta_encode(g, 2);
  const Eigen::Index r = 4;
  CHECK(m(r, 0) == g.vertices(0, r));
  CHECK(m(r, 1) == g.vertices(1, r));
  CHECK(m.row(r).segment<2>(2).transpose() == g.vertices.col(r) - g.vertices.col(r - 2));
  CHECK(m.row(r).segment<2>(4).transpose() == g.vertices.col(r) - g.vertices.col(r - 1));
  CHECK(m.row(r).segment<2>(6).transpose() == g.vertices.col(r) - g.vertices.col(r + 1));
  CHECK(m.row(r).segment<2>(8).transpose() == g.vertices.col(r) - g.vertices.col(r + 2));
}

TEST_CASE("linear sequences use zero deltas past either end") {
  const auto m = kdelta_encode(line_of(6, GeometryClass::Linear), 2);
  CHECK(m.row(0).segment(2, 4).isZero(0));
  CHECK(m(1, 2) == 0.0);
  CHECK(m(1, 3) == 0.0);
  CHECK(m(1, 4) != 0.0);
  CHECK(m.row(5).segment(6, 4).isZero(0));
}

TEST_CASE("polygonal sequences wrap around") {
  const auto g = line_of(6, GeometryClass::Polygonal);
  const auto m = kdelta_encode(g, 2);
  CHECK(m.row(0).segment<2>(2).transpose() == g.vertices.col(0) - g.vertices.col(4));
  CHECK(m.row(0).segment<2>(4).transpose() == g.vertices.col(0) - g.vertices.col(5));
  CHECK(m.row(5).segment<2>(6).transpose() == g.vertices.col(5) - g.vertices.col(0));
}

TEST_CASE("k must leave room in the sequence") {
  CHECK_THROWS_AS(kdelta_encode(line_of(4, GeometryClass::Linear), 4), InvalidParameter);
  CHECK_THROWS_AS(kdelta_encode(line_of(4, GeometryClass::Linear), 0), InvalidParameter);
}

TEST_CASE("padding is circular for polygons and zero for lines") {
  const auto m = kdelta_encode(line_of(5, GeometryClass::Polygonal), 1);
  const auto pc = pad_sequence(m, GeometryClass::Polygonal, 1);
  CHECK(pc.rows.rows() == 7);
  CHECK(pc.rows.row(0) == m.row(4));
  CHECK(pc.rows.row(6) == m.row(0));
  const auto pz = pad_sequence(m, GeometryClass::Linear, 1);
  CHECK(pz.rows.row(0).isZero(0));
  CHECK(pz.rows.row(6).isZero(0));
  CHECK(pz.rows.middleRows(1, 5) == m);
}

}  // TEST_SUITE

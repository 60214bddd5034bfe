#pragma once

#include <Eigen/Core>

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace omni {

/// lon/lat degrees for raw geometries, metres after projection, unitless
/// after pair normalization.
using Coordinate = Eigen::Vector2d;
using Ring = std::vector<Coordinate>;

struct Point {
  Coordinate at;
};

struct LineString {
  Ring vertices;
};

/// Rings are stored unclosed: the first vertex is not repeated at the end.
struct Polygon {
  Ring outer;
  std::vector<Ring> holes;
};

struct MultiLineString {
  std::vector<LineString> lines;
};

struct MultiPolygon {
  std::vector<Polygon> polygons;
};

using Geometry = std::variant<Point, LineString, Polygon, MultiLineString, MultiPolygon>;

enum class GeometryClass { Polygonal, Linear };
enum class Provenance { Original, DiskAugmented };

/// A geometry resampled to a fixed vertex count. Columns of `vertices` are
/// the vertices in traversal order; `part_starts` holds the first column of
/// each part (always starts with 0).
struct ProcessedGeometry {
  Eigen::Matrix2Xd vertices;
  std::vector<Eigen::Index> part_starts{0};
  GeometryClass cls = GeometryClass::Polygonal;
  Provenance provenance = Provenance::Original;

  Eigen::Index size() const { return vertices.cols(); }
  Eigen::Index part_count() const { return static_cast<Eigen::Index>(part_starts.size()); }
  Eigen::Index part_end(Eigen::Index part) const {
    return part + 1 < part_count() ? part_starts[part + 1] : size();
  }
};

struct GeometryPair {
  ProcessedGeometry a;
  ProcessedGeometry b;
  double min_dist_norm = 0.0;
  double centroid_haversine_km = 0.0;
};

// ---------------------------------------------------------------------------
// Parsing and formatting

/// Parses WKT or a GeoJSON geometry object (detected by a leading '{').
/// Throws ParseError on malformed input and UnsupportedGeometry for types
/// outside Point/LineString/Polygon/MultiLineString/MultiPolygon.
Geometry parse_geometry(std::string_view text);

/// WKT with shortest round-trip number formatting. Rings are written closed.
std::string to_wkt(const Geometry& g);

std::string_view geometry_type_name(const Geometry& g);
GeometryClass geometry_class(const Geometry& g);
std::size_t vertex_count(const Geometry& g);

/// Every stored vertex in traversal order (outer rings then holes).
std::vector<Coordinate> all_vertices(const Geometry& g);

/// Arithmetic mean of the stored vertices.
Coordinate vertex_centroid(const Geometry& g);

Geometry translate(const Geometry& g, const Coordinate& offset);
Geometry transform(const Geometry& g, const std::function<Coordinate(const Coordinate&)>& f);

// ---------------------------------------------------------------------------
// Planar helpers

double ring_area(std::span<const Coordinate> ring);
double ring_signed_area(std::span<const Coordinate> ring);
double path_length(std::span<const Coordinate> path, bool closed);

/// Distance from p to the closed segment [a, b].
double point_segment_distance(const Coordinate& p, const Coordinate& a, const Coordinate& b);

/// Distance between closed segments; 0 when they intersect or touch.
double segment_segment_distance(const Coordinate& a0, const Coordinate& a1,
                                const Coordinate& b0, const Coordinate& b1);

bool segments_intersect(const Coordinate& a0, const Coordinate& a1,
                        const Coordinate& b0, const Coordinate& b1);

/// Even-odd crossing test; boundary points may go either way.
bool point_in_ring(const Coordinate& p, std::span<const Coordinate> ring);

// ---------------------------------------------------------------------------
// Preprocessing

/// Regular P-gon of the given radius around `center` (planar units).
Polygon point_to_disk(const Coordinate& center, int vertex_count, double radius = 1.0);

Geometry drop_holes(const Geometry& g);

/// Douglas-Peucker elimination threshold per vertex. Open sequences keep
/// their endpoints at +inf; cyclic sequences keep the two mutually farthest
/// vertices at +inf and run the recursion on the two chains between them.
std::vector<double> vertex_importance(std::span<const Coordinate> seq, bool cyclic);

/// Indices of the `keep` most important vertices, ascending. Ties go to the
/// lower index.
std::vector<std::size_t> top_importance(std::span<const double> importance, std::size_t keep);

struct PartSize {
  GeometryClass cls;
  double size;  // area for polygonal parts, length for linear parts
};

/// Splits P vertices among parts in proportion to size, with at least 3 per
/// polygonal part and 2 per linear part. Largest-remainder rounding.
std::vector<int> allocate_part_vertices(std::span<const PartSize> parts, int P);

/// Resamples a geometry with more than P vertices down to exactly P.
ProcessedGeometry decimate_to_p(const Geometry& g, int P);

/// Resamples a geometry with at most P vertices up to exactly P.
ProcessedGeometry interpolate_to_p(const Geometry& g, int P);

/// Dispatches to decimation or interpolation per part. Points must be
/// converted to disks first. Multi-part geometries whose parts cannot all
/// receive their minimum budget keep only their largest parts.
ProcessedGeometry fix_vertex_count(const Geometry& g, int P);

/// Local equirectangular projection (metres) about a centre in degrees.
class LocalProjection {
 public:
  static constexpr double kEarthRadiusM = 6371000.0;

  LocalProjection(double lon0, double lat0);
  Coordinate forward(const Coordinate& lonlat) const;
  Coordinate inverse(const Coordinate& xy) const;
  const Coordinate& center() const { return center_; }

 private:
  Coordinate center_;
  double cos_lat0_;
};

/// Projects both geometries with one projection centred on the mean of
/// their raw bounding-box centres. Throws InvalidParameter for coordinates
/// outside lon [-180,180] / lat [-90,90].
std::pair<Geometry, Geometry> project_pair(const Geometry& a, const Geometry& b);

/// Maps both geometries into [-1,1]^2 using their joint bounding box with a
/// single scale factor.
std::pair<ProcessedGeometry, ProcessedGeometry> normalize_pair(const ProcessedGeometry& a,
                                                               const ProcessedGeometry& b);

/// Minimum boundary distance, 0 when the geometries cross or one lies inside
/// a polygonal other.
double min_distance_normalized(const ProcessedGeometry& a, const ProcessedGeometry& b);

double haversine_km(const Coordinate& lonlat_a, const Coordinate& lonlat_b);
double haversine_centroid_km(const Geometry& a, const Geometry& b);

/// Full pipeline: project, disk-augment points, drop holes, fix to P
/// vertices, normalize jointly, measure distances.
GeometryPair process_pair(const Geometry& a, const Geometry& b, int P);

}  // namespace omni

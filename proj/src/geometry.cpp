#include "omni/geometry.hpp"

#include "omni/error.hpp"

#include <Eigen/Geometry>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace omni {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

double cross(const Coordinate& a, const Coordinate& b) { return a.x() * b.y() - a.y() * b.x(); }

double orient(const Coordinate& a, const Coordinate& b, const Coordinate& c) {
  return cross(b - a, c - a);
}

bool on_segment(const Coordinate& a, const Coordinate& b, const Coordinate& p) {
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
         std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
}

int sign(double v) { return (v > 0) - (v < 0); }

// Perpendicular distance from p to the line through a and b (to a itself
// when a == b).
double line_distance(const Coordinate& p, const Coordinate& a, const Coordinate& b) {
  const Coordinate ab = b - a;
  const double len = ab.norm();
  if (len == 0.0) return (p - a).norm();
  return std::abs(cross(ab, p - a)) / len;
}

// Fills importance for the open chain seq[order[lo..hi]] with both ends
// already assigned. `order` maps chain positions to vertex indices.
void rank_chain(std::span<const Coordinate> seq, std::span<const std::size_t> order,
                std::vector<double>& importance) {
  struct Span {
    std::size_t lo, hi;
    double cap;
  };
  std::vector<Span> stack{{0, order.size() - 1, kInf}};
  while (!stack.empty()) {
    const Span s = stack.back();
    stack.pop_back();
    if (s.hi - s.lo < 2) continue;
    const Coordinate& a = seq[order[s.lo]];
    const Coordinate& b = seq[order[s.hi]];
    std::size_t best = s.lo + 1;
    double best_d = -1.0;
    for (std::size_t k = s.lo + 1; k < s.hi; ++k) {
      const double d = line_distance(seq[order[k]], a, b);
      if (d > best_d) {
        best_d = d;
        best = k;
      }
    }
    const double threshold = std::min(best_d, s.cap);
    importance[order[best]] = threshold;
    stack.push_back({best, s.hi, threshold});
    stack.push_back({s.lo, best, threshold});
  }
}

// Lowest-index pair of mutually farthest vertices. Long rings search only
// convex hull vertices, where every farthest pair lies.
std::pair<std::size_t, std::size_t> farthest_pair(std::span<const Coordinate> seq) {
  const std::size_t n = seq.size();
  std::vector<std::size_t> candidates;
  if (n <= 2048) {
    candidates.resize(n);
    std::iota(candidates.begin(), candidates.end(), 0);
  } else {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (seq[a].x() != seq[b].x()) return seq[a].x() < seq[b].x();
      if (seq[a].y() != seq[b].y()) return seq[a].y() < seq[b].y();
      return a < b;
    });
    // Collapse duplicates onto their lowest index.
    std::vector<std::size_t> unique;
    for (std::size_t i : order) {
      if (unique.empty() || seq[unique.back()] != seq[i]) unique.push_back(i);
    }
    std::vector<std::size_t> hull(2 * unique.size());
    std::size_t k = 0;
    for (std::size_t i : unique) {
      while (k >= 2 && orient(seq[hull[k - 2]], seq[hull[k - 1]], seq[i]) <= 0) --k;
      hull[k++] = i;
    }
    for (std::size_t r = unique.size() - 1, lower = k + 1; r-- > 0;) {
      const std::size_t i = unique[r];
      while (k >= lower && orient(seq[hull[k - 2]], seq[hull[k - 1]], seq[i]) <= 0) --k;
      hull[k++] = i;
    }
    hull.resize(k > 1 ? k - 1 : k);
    std::sort(hull.begin(), hull.end());
    candidates = std::move(hull);
  }
  std::size_t best_a = 0, best_b = 1;
  double widest = -1.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    for (std::size_t j = i + 1; j < candidates.size(); ++j) {
      const double d = (seq[candidates[i]] - seq[candidates[j]]).squaredNorm();
      if (d > widest) {
        widest = d;
        best_a = candidates[i];
        best_b = candidates[j];
      }
    }
  }
  return {best_a, best_b};
}

struct Part {
  Ring ring;
  GeometryClass cls;
  double size;
};

std::vector<Part> parts_of(const Geometry& g) {
  std::vector<Part> parts;
  std::visit(overloaded{
                 [&](const Point&) {
                   throw InvalidParameter("points must be converted to disks before resampling");
                 },
                 [&](const LineString& l) {
                   parts.push_back({l.vertices, GeometryClass::Linear, path_length(l.vertices, false)});
                 },
                 [&](const Polygon& p) {
                   parts.push_back({p.outer, GeometryClass::Polygonal, ring_area(p.outer)});
                 },
                 [&](const MultiLineString& m) {
                   for (const auto& l : m.lines) {
                     parts.push_back(
                         {l.vertices, GeometryClass::Linear, path_length(l.vertices, false)});
                   }
                 },
                 [&](const MultiPolygon& m) {
                   for (const auto& p : m.polygons) {
                     parts.push_back({p.outer, GeometryClass::Polygonal, ring_area(p.outer)});
                   }
                 },
             },
             g);
  return parts;
}

int minimum_budget(GeometryClass cls) { return cls == GeometryClass::Polygonal ? 3 : 2; }

Ring decimate_part(const Ring& ring, bool cyclic, std::size_t budget) {
  const auto importance = vertex_importance(ring, cyclic);
  Ring out;
  out.reserve(budget);
  for (std::size_t i : top_importance(importance, budget)) out.push_back(ring[i]);
  return out;
}

Ring interpolate_part(const Ring& ring, bool cyclic, std::size_t budget) {
  const std::size_t n = ring.size();
  const std::size_t edges = cyclic ? n : n - 1;
  std::vector<double> length(edges);
  for (std::size_t e = 0; e < edges; ++e) length[e] = (ring[(e + 1) % n] - ring[e]).norm();

  // Each insertion goes to the edge whose sub-edges are currently longest.
  std::vector<std::size_t> inserts(edges, 0);
  for (std::size_t added = n; added < budget; ++added) {
    std::size_t best = 0;
    double best_gap = -1.0;
    for (std::size_t e = 0; e < edges; ++e) {
      const double gap = length[e] / static_cast<double>(inserts[e] + 1);
      if (gap > best_gap) {
        best_gap = gap;
        best = e;
      }
    }
    ++inserts[best];
  }

  Ring out;
  out.reserve(budget);
  for (std::size_t e = 0; e < edges; ++e) {
    const Coordinate& a = ring[e];
    const Coordinate& b = ring[(e + 1) % n];
    out.push_back(a);
    const double denom = static_cast<double>(inserts[e] + 1);
    for (std::size_t t = 1; t <= inserts[e]; ++t) {
      out.push_back(a + (static_cast<double>(t) / denom) * (b - a));
    }
  }
  if (!cyclic) out.push_back(ring.back());
  return out;
}

void check_lonlat(const Coordinate& c) {
  if (!(c.x() >= -180.0 && c.x() <= 180.0 && c.y() >= -90.0 && c.y() <= 90.0)) {
    throw InvalidParameter("coordinate outside WGS84 lon/lat range");
  }
}

Eigen::AlignedBox2d bounds(const Geometry& g) {
  Eigen::AlignedBox2d box;
  for (const auto& c : all_vertices(g)) box.extend(c);
  return box;
}

bool point_in_parts(const Coordinate& p, const ProcessedGeometry& g) {
  for (Eigen::Index part = 0; part < g.part_count(); ++part) {
    const Eigen::Index start = g.part_starts[part];
    const Eigen::Index end = g.part_end(part);
    Ring ring;
    ring.reserve(static_cast<std::size_t>(end - start));
    for (Eigen::Index i = start; i < end; ++i) ring.emplace_back(g.vertices.col(i));
    if (point_in_ring(p, ring)) return true;
  }
  return false;
}

struct Segment {
  Coordinate a, b;
};

std::vector<Segment> segments_of(const ProcessedGeometry& g) {
  std::vector<Segment> segs;
  segs.reserve(static_cast<std::size_t>(g.size()));
  for (Eigen::Index part = 0; part < g.part_count(); ++part) {
    const Eigen::Index start = g.part_starts[part];
    const Eigen::Index end = g.part_end(part);
    for (Eigen::Index i = start; i + 1 < end; ++i) {
      segs.push_back({g.vertices.col(i), g.vertices.col(i + 1)});
    }
    if (g.cls == GeometryClass::Polygonal && end - start >= 3) {
      segs.push_back({g.vertices.col(end - 1), g.vertices.col(start)});
    }
  }
  return segs;
}

}  // namespace

// ---------------------------------------------------------------------------

GeometryClass geometry_class(const Geometry& g) {
  return std::holds_alternative<LineString>(g) || std::holds_alternative<MultiLineString>(g)
             ? GeometryClass::Linear
             : GeometryClass::Polygonal;
}

std::size_t vertex_count(const Geometry& g) { return all_vertices(g).size(); }

std::vector<Coordinate> all_vertices(const Geometry& g) {
  std::vector<Coordinate> out;
  auto add_polygon = [&](const Polygon& p) {
    out.insert(out.end(), p.outer.begin(), p.outer.end());
    for (const auto& h : p.holes) out.insert(out.end(), h.begin(), h.end());
  };
  std::visit(overloaded{
                 [&](const Point& p) { out.push_back(p.at); },
                 [&](const LineString& l) { out = l.vertices; },
                 [&](const Polygon& p) { add_polygon(p); },
                 [&](const MultiLineString& m) {
                   for (const auto& l : m.lines) out.insert(out.end(), l.vertices.begin(), l.vertices.end());
                 },
                 [&](const MultiPolygon& m) {
                   for (const auto& p : m.polygons) add_polygon(p);
                 },
             },
             g);
  return out;
}

Coordinate vertex_centroid(const Geometry& g) {
  const auto vs = all_vertices(drop_holes(g));
  Coordinate sum = Coordinate::Zero();
  for (const auto& v : vs) sum += v;
  return sum / static_cast<double>(vs.size());
}

Geometry transform(const Geometry& g, const std::function<Coordinate(const Coordinate&)>& f) {
  auto ring = [&](const Ring& r) {
    Ring out;
    out.reserve(r.size());
    for (const auto& c : r) out.push_back(f(c));
    return out;
  };
  auto polygon = [&](const Polygon& p) {
    Polygon out{ring(p.outer), {}};
    for (const auto& h : p.holes) out.holes.push_back(ring(h));
    return out;
  };
  return std::visit(overloaded{
                        [&](const Point& p) -> Geometry { return Point{f(p.at)}; },
                        [&](const LineString& l) -> Geometry { return LineString{ring(l.vertices)}; },
                        [&](const Polygon& p) -> Geometry { return polygon(p); },
                        [&](const MultiLineString& m) -> Geometry {
                          MultiLineString out;
                          for (const auto& l : m.lines) out.lines.push_back({ring(l.vertices)});
                          return out;
                        },
                        [&](const MultiPolygon& m) -> Geometry {
                          MultiPolygon out;
                          for (const auto& p : m.polygons) out.polygons.push_back(polygon(p));
                          return out;
                        },
                    },
                    g);
}

Geometry translate(const Geometry& g, const Coordinate& offset) {
  return transform(g, [&](const Coordinate& c) -> Coordinate { return c + offset; });
}

double ring_signed_area(std::span<const Coordinate> ring) {
  double twice = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    twice += cross(ring[i], ring[(i + 1) % ring.size()]);
  }
  return 0.5 * twice;
}

double ring_area(std::span<const Coordinate> ring) { return std::abs(ring_signed_area(ring)); }

double path_length(std::span<const Coordinate> path, bool closed) {
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) len += (path[i + 1] - path[i]).norm();
  if (closed && path.size() > 2) len += (path.front() - path.back()).norm();
  return len;
}

double point_segment_distance(const Coordinate& p, const Coordinate& a, const Coordinate& b) {
  const Coordinate ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

bool segments_intersect(const Coordinate& a0, const Coordinate& a1, const Coordinate& b0,
                        const Coordinate& b1) {
  const int o1 = sign(orient(a0, a1, b0));
  const int o2 = sign(orient(a0, a1, b1));
  const int o3 = sign(orient(b0, b1, a0));
  const int o4 = sign(orient(b0, b1, a1));
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a0, a1, b0)) return true;
  if (o2 == 0 && on_segment(a0, a1, b1)) return true;
  if (o3 == 0 && on_segment(b0, b1, a0)) return true;
  if (o4 == 0 && on_segment(b0, b1, a1)) return true;
  return false;
}

double segment_segment_distance(const Coordinate& a0, const Coordinate& a1, const Coordinate& b0,
                                const Coordinate& b1) {
  if (segments_intersect(a0, a1, b0, b1)) return 0.0;
  return std::min({point_segment_distance(a0, b0, b1), point_segment_distance(a1, b0, b1),
                   point_segment_distance(b0, a0, a1), point_segment_distance(b1, a0, a1)});
}

bool point_in_ring(const Coordinate& p, std::span<const Coordinate> ring) {
  bool inside = false;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const Coordinate& vi = ring[i];
    const Coordinate& vj = ring[j];
    if ((vi.y() > p.y()) != (vj.y() > p.y())) {
      const double x = vj.x() + (p.y() - vj.y()) * (vi.x() - vj.x()) / (vi.y() - vj.y());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

// ---------------------------------------------------------------------------

Polygon point_to_disk(const Coordinate& center, int vertex_count, double radius) {
  if (vertex_count < 3) throw InvalidParameter("disk needs at least 3 vertices");
  Polygon disk;
  disk.outer.reserve(static_cast<std::size_t>(vertex_count));
  for (int i = 0; i < vertex_count; ++i) {
    const double theta = 2.0 * std::numbers::pi * i / vertex_count;
    disk.outer.push_back(center + radius * Coordinate(std::cos(theta), std::sin(theta)));
  }
  return disk;
}

Geometry drop_holes(const Geometry& g) {
  if (const auto* p = std::get_if<Polygon>(&g)) return Polygon{p->outer, {}};
  if (const auto* m = std::get_if<MultiPolygon>(&g)) {
    MultiPolygon out;
    for (const auto& p : m->polygons) out.polygons.push_back({p.outer, {}});
    return out;
  }
  return g;
}

std::vector<double> vertex_importance(std::span<const Coordinate> seq, bool cyclic) {
  const std::size_t n = seq.size();
  if (n < 2) throw InvalidParameter("importance needs at least 2 vertices");
  std::vector<double> importance(n, 0.0);

  if (!cyclic) {
    importance.front() = importance.back() = kInf;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rank_chain(seq, order, importance);
    return importance;
  }

  const auto [anchor_a, anchor_b] = farthest_pair(seq);
  importance[anchor_a] = importance[anchor_b] = kInf;

  std::vector<std::size_t> forward, backward;
  for (std::size_t i = anchor_a; i <= anchor_b; ++i) forward.push_back(i);
  for (std::size_t i = anchor_b; i <= anchor_a + n; ++i) backward.push_back(i % n);
  rank_chain(seq, forward, importance);
  rank_chain(seq, backward, importance);
  return importance;
}

std::vector<std::size_t> top_importance(std::span<const double> importance, std::size_t keep) {
  std::vector<std::size_t> order(importance.size());
  std::iota(order.begin(), order.end(), 0);
  keep = std::min(keep, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (importance[a] != importance[b]) return importance[a] > importance[b];
                      return a < b;
                    });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<int> allocate_part_vertices(std::span<const PartSize> parts, int P) {
  if (parts.empty()) throw InvalidParameter("allocation needs at least one part");
  int minimum = 0;
  for (const auto& p : parts) minimum += minimum_budget(p.cls);
  if (P < minimum) {
    throw InfeasibleBudget("P=" + std::to_string(P) + " is below the minimum budget " +
                           std::to_string(minimum));
  }

  const std::size_t n = parts.size();
  std::vector<int> budget(n, 0);
  std::vector<bool> clamped(n, false);
  while (true) {
    int free_budget = P;
    double free_size = 0.0;
    std::size_t free_parts = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (clamped[i]) {
        free_budget -= budget[i];
      } else {
        free_size += std::max(parts[i].size, 0.0);
        ++free_parts;
      }
    }
    std::vector<double> quota(n, 0.0);
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (clamped[i]) continue;
      quota[i] = free_size > 0.0 ? free_budget * std::max(parts[i].size, 0.0) / free_size
                                 : static_cast<double>(free_budget) / static_cast<double>(free_parts);
      if (quota[i] < minimum_budget(parts[i].cls)) {
        clamped[i] = true;
        budget[i] = minimum_budget(parts[i].cls);
        changed = true;
      }
    }
    if (changed) continue;

    int assigned = 0;
    std::vector<std::size_t> free_index;
    for (std::size_t i = 0; i < n; ++i) {
      if (clamped[i]) continue;
      budget[i] = static_cast<int>(std::floor(quota[i]));
      assigned += budget[i];
      free_index.push_back(i);
    }
    std::stable_sort(free_index.begin(), free_index.end(), [&](std::size_t a, std::size_t b) {
      return quota[a] - std::floor(quota[a]) > quota[b] - std::floor(quota[b]);
    });
    for (std::size_t r = 0; assigned < free_budget; ++r, ++assigned) {
      ++budget[free_index[r % free_index.size()]];
    }
    return budget;
  }
}

ProcessedGeometry fix_vertex_count(const Geometry& raw, int P) {
  const Geometry g = drop_holes(raw);
  std::vector<Part> parts = parts_of(g);
  std::stable_sort(parts.begin(), parts.end(),
                   [](const Part& a, const Part& b) { return a.size > b.size; });
  int minimum = 0;
  std::size_t fit = 0;
  while (fit < parts.size() && minimum + minimum_budget(parts[fit].cls) <= P) {
    minimum += minimum_budget(parts[fit].cls);
    ++fit;
  }
  if (fit == 0) {
    throw InfeasibleBudget("P=" + std::to_string(P) + " cannot hold a single part");
  }
  if (fit < parts.size()) {
    spdlog::debug("keeping {} of {} parts to fit P={}", fit, parts.size(), P);
    parts.resize(fit);
  }

  std::vector<PartSize> sizes;
  for (const auto& p : parts) sizes.push_back({p.cls, p.size});
  const auto budget = allocate_part_vertices(sizes, P);

  ProcessedGeometry out;
  out.cls = geometry_class(g);
  out.vertices.resize(2, P);
  out.part_starts.clear();
  Eigen::Index col = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const bool cyclic = parts[i].cls == GeometryClass::Polygonal;
    const auto want = static_cast<std::size_t>(budget[i]);
    const Ring resampled = parts[i].ring.size() > want ? decimate_part(parts[i].ring, cyclic, want)
                                                       : interpolate_part(parts[i].ring, cyclic, want);
    out.part_starts.push_back(col);
    for (const auto& v : resampled) out.vertices.col(col++) = v;
  }
  return out;
}

ProcessedGeometry decimate_to_p(const Geometry& g, int P) {
  if (vertex_count(drop_holes(g)) <= static_cast<std::size_t>(P)) {
    throw ContractViolation("decimate_to_p needs more than P vertices; use interpolate_to_p");
  }
  return fix_vertex_count(g, P);
}

ProcessedGeometry interpolate_to_p(const Geometry& g, int P) {
  if (vertex_count(drop_holes(g)) > static_cast<std::size_t>(P)) {
    throw ContractViolation("interpolate_to_p needs at most P vertices; use decimate_to_p");
  }
  return fix_vertex_count(g, P);
}

// ---------------------------------------------------------------------------

LocalProjection::LocalProjection(double lon0, double lat0)
    : center_(lon0, lat0), cos_lat0_(std::cos(lat0 * std::numbers::pi / 180.0)) {}

Coordinate LocalProjection::forward(const Coordinate& lonlat) const {
  constexpr double rad = std::numbers::pi / 180.0;
  return {kEarthRadiusM * (lonlat.x() - center_.x()) * rad * cos_lat0_,
          kEarthRadiusM * (lonlat.y() - center_.y()) * rad};
}

Coordinate LocalProjection::inverse(const Coordinate& xy) const {
  constexpr double deg = 180.0 / std::numbers::pi;
  return {center_.x() + xy.x() / (kEarthRadiusM * cos_lat0_) * deg,
          center_.y() + xy.y() / kEarthRadiusM * deg};
}

std::pair<Geometry, Geometry> project_pair(const Geometry& a, const Geometry& b) {
  for (const auto& c : all_vertices(a)) check_lonlat(c);
  for (const auto& c : all_vertices(b)) check_lonlat(c);
  const Coordinate center = 0.5 * (bounds(a).center() + bounds(b).center());
  const LocalProjection proj(center.x(), center.y());
  auto f = [&](const Coordinate& c) -> Coordinate { return proj.forward(c); };
  return {transform(a, f), transform(b, f)};
}

std::pair<ProcessedGeometry, ProcessedGeometry> normalize_pair(const ProcessedGeometry& a,
                                                               const ProcessedGeometry& b) {
  Eigen::AlignedBox2d box;
  for (Eigen::Index i = 0; i < a.size(); ++i) box.extend(a.vertices.col(i));
  for (Eigen::Index i = 0; i < b.size(); ++i) box.extend(b.vertices.col(i));
  const Coordinate center = box.center();
  double half = 0.5 * box.sizes().maxCoeff();
  if (!(half > 0.0)) {
    spdlog::warn("degenerate joint bounding box; centring without scaling");
    half = 1.0;
  }
  auto apply = [&](const ProcessedGeometry& g) {
    ProcessedGeometry out = g;
    out.vertices = ((g.vertices.colwise() - center) / half).cwiseMax(-1.0).cwiseMin(1.0);
    return out;
  };
  return {apply(a), apply(b)};
}

double min_distance_normalized(const ProcessedGeometry& a, const ProcessedGeometry& b) {
  const auto sa = segments_of(a);
  const auto sb = segments_of(b);
  double best = kInf;
  for (const auto& s : sa) {
    for (const auto& t : sb) {
      const double d = segment_segment_distance(s.a, s.b, t.a, t.b);
      if (d == 0.0) return 0.0;
      best = std::min(best, d);
    }
  }
  if (a.cls == GeometryClass::Polygonal) {
    for (Eigen::Index part = 0; part < b.part_count(); ++part) {
      if (point_in_parts(b.vertices.col(b.part_starts[part]), a)) return 0.0;
    }
  }
  if (b.cls == GeometryClass::Polygonal) {
    for (Eigen::Index part = 0; part < a.part_count(); ++part) {
      if (point_in_parts(a.vertices.col(a.part_starts[part]), b)) return 0.0;
    }
  }
  return best;
}

double haversine_km(const Coordinate& a, const Coordinate& b) {
  constexpr double rad = std::numbers::pi / 180.0;
  constexpr double earth_km = 6371.0;
  const double dlat = (b.y() - a.y()) * rad;
  const double dlon = (b.x() - a.x()) * rad;
  const double h = std::pow(std::sin(dlat / 2), 2) +
                   std::cos(a.y() * rad) * std::cos(b.y() * rad) * std::pow(std::sin(dlon / 2), 2);
  return 2.0 * earth_km * std::asin(std::sqrt(std::clamp(h, 0.0, 1.0)));
}

double haversine_centroid_km(const Geometry& a, const Geometry& b) {
  return haversine_km(vertex_centroid(a), vertex_centroid(b));
}

GeometryPair process_pair(const Geometry& a, const Geometry& b, int P) {
  if (P < 3) throw InvalidParameter("P must be at least 3");
  const auto [pa, pb] = project_pair(a, b);
  auto fixed = [P](const Geometry& g) {
    if (const auto* pt = std::get_if<Point>(&g)) {
      ProcessedGeometry out = fix_vertex_count(point_to_disk(pt->at, P), P);
      out.provenance = Provenance::DiskAugmented;
      return out;
    }
    return fix_vertex_count(g, P);
  };
  GeometryPair pair;
  std::tie(pair.a, pair.b) = normalize_pair(fixed(pa), fixed(pb));
  pair.min_dist_norm = min_distance_normalized(pair.a, pair.b);
  pair.centroid_haversine_km = haversine_centroid_km(a, b);
  return pair;
}

}  // namespace omni

#include "omni/error.hpp"
#include "omni/geometry.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

namespace omni {
namespace {

using nlohmann::json;

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

// Drops a trailing vertex equal to the first one.
Ring unclose(Ring ring) {
  if (ring.size() >= 2 && ring.front() == ring.back()) ring.pop_back();
  return ring;
}

std::size_t distinct_count(const Ring& ring) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    bool seen = false;
    for (std::size_t j = 0; j < i && !seen; ++j) seen = ring[j] == ring[i];
    n += seen ? 0 : 1;
  }
  return n;
}

class WktReader {
 public:
  explicit WktReader(std::string_view text) : text_(text) {}

  Geometry read() {
    skip_space();
    std::string keyword = upper(word());
    if (keyword.rfind("SRID=", 0) == 0) {
      // EWKT prefix: SRID=4326;POINT(...)
      expect(';');
      skip_space();
      keyword = upper(word());
    }
    if (keyword.empty()) fail("expected geometry keyword");
    skip_dimension_tag();

    Geometry g;
    if (keyword == "POINT") {
      reject_empty(keyword);
      expect('(');
      g = Point{coordinate()};
      expect(')');
    } else if (keyword == "LINESTRING") {
      reject_empty(keyword);
      g = line();
    } else if (keyword == "POLYGON") {
      reject_empty(keyword);
      g = polygon();
    } else if (keyword == "MULTILINESTRING") {
      reject_empty(keyword);
      MultiLineString m;
      expect('(');
      do m.lines.push_back(line()); while (accept(','));
      expect(')');
      g = std::move(m);
    } else if (keyword == "MULTIPOLYGON") {
      reject_empty(keyword);
      MultiPolygon m;
      expect('(');
      do m.polygons.push_back(polygon()); while (accept(','));
      expect(')');
      g = std::move(m);
    } else if (keyword == "MULTIPOINT" || keyword == "GEOMETRYCOLLECTION" ||
               keyword == "CIRCULARSTRING" || keyword == "COMPOUNDCURVE" ||
               keyword == "CURVEPOLYGON" || keyword == "MULTICURVE" ||
               keyword == "MULTISURFACE" || keyword == "POLYHEDRALSURFACE" ||
               keyword == "TIN" || keyword == "TRIANGLE") {
      throw UnsupportedGeometry("unsupported geometry type " + keyword);
    } else {
      fail("unknown geometry keyword '" + keyword + "'");
    }
    skip_space();
    if (pos_ != text_.size()) fail("trailing characters after geometry");
    return g;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, pos_); }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::string_view word() {
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '=')) {
      ++pos_;
    }
    return text_.substr(start, pos_ - start);
  }

  void skip_dimension_tag() {
    skip_space();
    std::size_t save = pos_;
    std::string tag = upper(word());
    if (tag != "Z" && tag != "M" && tag != "ZM") pos_ = save;
  }

  void reject_empty(const std::string& keyword) {
    skip_space();
    std::size_t save = pos_;
    if (upper(word()) == "EMPTY") throw UnsupportedGeometry("empty " + keyword + " is not supported");
    pos_ = save;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  bool number(double& out) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == '+') ++pos_;
    const char* first = text_.data() + pos_;
    const char* last = text_.data() + text_.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr == first) return false;
    pos_ += static_cast<std::size_t>(ptr - first);
    return true;
  }

  Coordinate coordinate() {
    double x = 0.0, y = 0.0;
    if (!number(x)) fail("expected number");
    if (!number(y)) fail("expected number");
    double extra = 0.0;
    // Z and M ordinates are read and dropped.
    for (int i = 0; i < 2; ++i) {
      std::size_t save = pos_;
      if (!number(extra)) {
        pos_ = save;
        break;
      }
    }
    if (!std::isfinite(x) || !std::isfinite(y)) fail("non-finite coordinate");
    return {x, y};
  }

  Ring ring() {
    Ring r;
    expect('(');
    do r.push_back(coordinate()); while (accept(','));
    expect(')');
    return r;
  }

  LineString line() {
    std::size_t start = pos_;
    LineString l{ring()};
    if (l.vertices.size() < 2) throw ParseError("LINESTRING needs at least 2 vertices", start);
    return l;
  }

  Ring polygon_ring(std::size_t start) {
    Ring r = unclose(ring());
    if (distinct_count(r) < 3) throw ParseError("polygon ring needs at least 3 distinct vertices", start);
    return r;
  }

  Polygon polygon() {
    Polygon p;
    expect('(');
    skip_space();
    p.outer = polygon_ring(pos_);
    while (accept(',')) {
      skip_space();
      p.holes.push_back(polygon_ring(pos_));
    }
    expect(')');
    return p;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

Coordinate json_coordinate(const json& j) {
  if (!j.is_array() || j.size() < 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ParseError("GeoJSON position must be an array of at least two numbers", 0);
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

Ring json_ring(const json& j) {
  if (!j.is_array()) throw ParseError("GeoJSON coordinates must be arrays", 0);
  Ring r;
  for (const auto& c : j) r.push_back(json_coordinate(c));
  return r;
}

LineString json_line(const json& j) {
  LineString l{json_ring(j)};
  if (l.vertices.size() < 2) throw ParseError("LineString needs at least 2 positions", 0);
  return l;
}

Polygon json_polygon(const json& j) {
  if (!j.is_array() || j.empty()) throw ParseError("Polygon needs at least one ring", 0);
  Polygon p;
  for (std::size_t i = 0; i < j.size(); ++i) {
    Ring r = unclose(json_ring(j[i]));
    if (distinct_count(r) < 3) throw ParseError("polygon ring needs at least 3 distinct positions", 0);
    if (i == 0) {
      p.outer = std::move(r);
    } else {
      p.holes.push_back(std::move(r));
    }
  }
  return p;
}

Geometry from_geojson(const json& j) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    throw ParseError("GeoJSON object without a type member", 0);
  }
  const std::string type = j["type"].get<std::string>();
  if (type == "Feature") {
    if (!j.contains("geometry") || j["geometry"].is_null()) {
      throw ParseError("Feature without geometry", 0);
    }
    return from_geojson(j["geometry"]);
  }
  if (type == "GeometryCollection" || type == "MultiPoint" || type == "FeatureCollection") {
    throw UnsupportedGeometry("unsupported geometry type " + type);
  }
  if (!j.contains("coordinates")) throw ParseError("GeoJSON geometry without coordinates", 0);
  const json& c = j["coordinates"];
  if (type == "Point") return Point{json_coordinate(c)};
  if (type == "LineString") return json_line(c);
  if (type == "Polygon") return json_polygon(c);
  if (type == "MultiLineString") {
    MultiLineString m;
    for (const auto& l : c) m.lines.push_back(json_line(l));
    if (m.lines.empty()) throw UnsupportedGeometry("empty MultiLineString is not supported");
    return m;
  }
  if (type == "MultiPolygon") {
    MultiPolygon m;
    for (const auto& p : c) m.polygons.push_back(json_polygon(p));
    if (m.polygons.empty()) throw UnsupportedGeometry("empty MultiPolygon is not supported");
    return m;
  }
  throw UnsupportedGeometry("unsupported geometry type " + type);
}

void append_number(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

void append_path(std::string& out, const Ring& r, bool close) {
  out += '(';
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (i) out += ", ";
    append_number(out, r[i].x());
    out += ' ';
    append_number(out, r[i].y());
  }
  if (close && !r.empty()) {
    out += ", ";
    append_number(out, r.front().x());
    out += ' ';
    append_number(out, r.front().y());
  }
  out += ')';
}

void append_polygon(std::string& out, const Polygon& p) {
  out += '(';
  append_path(out, p.outer, true);
  for (const auto& h : p.holes) {
    out += ", ";
    append_path(out, h, true);
  }
  out += ')';
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

Geometry parse_geometry(std::string_view text) {
  std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) throw ParseError("empty geometry text", 0);
  if (text[first] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed GeoJSON: ") + e.what(), e.byte);
    }
    return from_geojson(j);
  }
  return WktReader(text).read();
}

std::string to_wkt(const Geometry& g) {
  std::string out;
  std::visit(overloaded{
                 [&](const Point& p) {
                   out = "POINT (";
                   append_number(out, p.at.x());
                   out += ' ';
                   append_number(out, p.at.y());
                   out += ')';
                 },
                 [&](const LineString& l) {
                   out = "LINESTRING ";
                   append_path(out, l.vertices, false);
                 },
                 [&](const Polygon& p) {
                   out = "POLYGON ";
                   append_polygon(out, p);
                 },
                 [&](const MultiLineString& m) {
                   out = "MULTILINESTRING (";
                   for (std::size_t i = 0; i < m.lines.size(); ++i) {
                     if (i) out += ", ";
                     append_path(out, m.lines[i].vertices, false);
                   }
                   out += ')';
                 },
                 [&](const MultiPolygon& m) {
                   out = "MULTIPOLYGON (";
                   for (std::size_t i = 0; i < m.polygons.size(); ++i) {
                     if (i) out += ", ";
                     append_polygon(out, m.polygons[i]);
                   }
                   out += ')';
                 },
             },
             g);
  return out;
}

std::string_view geometry_type_name(const Geometry& g) {
  static constexpr std::string_view names[] = {"Point", "LineString", "Polygon", "MultiLineString",
                                               "MultiPolygon"};
  return names[g.index()];
}

}  // namespace omni

#include "omni/synth.hpp"

#include "omni/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numbers>
#include <optional>

namespace omni {
namespace {

constexpr std::array kStems{
    "Queens",   "Albert",   "Victoria",  "Rangitoto", "Waitemata", "Ponsonby", "Karangahape", "Takapuna",
    "Devonport", "Onehunga", "Parnell",  "Remuera",   "Mission",   "Kelburn",  "Oriental",    "Lambton",
    "Petone",   "Tauranga", "Rotorua",   "Kaikoura",  "Hokitika",  "Wanaka",   "Arrowtown",   "Picton",
    "Nelson",   "Cuba",     "Dominion",  "Manukau",   "Tamaki",    "Orakei",   "Kohimarama",  "Mangere",
    "Otahuhu",  "Papatoetoe", "Glenfield", "Birkenhead", "Northcote", "Hobson", "Princes",     "Britomart",
    "Wynyard",  "Halsey",   "Customs",   "Fanshawe",  "Federal",   "Elliott",  "Durham",      "Symonds",
    "Grafton",  "Newmarket", "Epsom",    "Kingsland", "Morningside", "Avondale", "Titirangi", "Piha"};

constexpr std::array kFeatures{"Wharf",  "Park",    "Street", "Road",     "Terminal", "Domain",  "Beach",
                               "School", "Station", "Church", "Library",  "Market",   "Reserve", "Bridge",
                               "Lake",   "Stream",  "Hall",   "Gardens",  "Pier",     "Lookout"};

constexpr std::array kTypes{"wharf", "park", "road", "building", "school", "lake", "river", "beach", "station",
                            "church"};

constexpr std::array<std::pair<const char*, const char*>, 6> kAbbreviations{
    {{"Street", "St"}, {"Road", "Rd"}, {"Mount", "Mt"}, {"Terminal", "Term"}, {"Station", "Stn"},
     {"Gardens", "Gdns"}}};

enum class Shape { Point, Line, Polygon, MultiPolygon, MultiLine };

template <typename Seq>
const auto& pick(std::mt19937_64& rng, const Seq& seq) {
  std::uniform_int_distribution<std::size_t> d(0, seq.size() - 1);
  return seq[d(rng)];
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
double normal(std::mt19937_64& rng, double sd) { return std::normal_distribution<double>(0.0, sd)(rng); }

std::string random_name(std::mt19937_64& rng) {
  return std::string(pick(rng, kStems)) + " " + pick(rng, kFeatures);
}

/// A spelling variant of `name`: case change, apostrophe, typo or
/// abbreviation.
std::string name_variant(std::mt19937_64& rng, const std::string& name) {
  std::string out = name;
  switch (uniform_int(rng, 0, 4)) {
    case 0:
      std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
      break;
    case 1: {
      const auto space = out.find(' ');
      if (space != std::string::npos && space > 1 && out[space - 1] == 's') out.insert(space - 1, "'");
      else out.insert(space == std::string::npos ? out.size() : space, "'s");
      break;
    }
    case 2: {
      if (out.size() > 3) {
        const auto i = static_cast<std::size_t>(uniform_int(rng, 1, static_cast<int>(out.size()) - 3));
        std::swap(out[i], out[i + 1]);
      }
      break;
    }
    case 3:
      for (const auto& [full, abbr] : kAbbreviations) {
        const auto at = out.find(full);
        if (at != std::string::npos) {
          out.replace(at, std::string(full).size(), abbr);
          return out;
        }
      }
      out += " NZ";
      break;
    default:
      std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
      break;
  }
  return out;
}

const TrigramEncoder& name_hasher() {
  static const TrigramEncoder enc({"name"}, 64);
  return enc;
}

double text_cosine(const std::string& x, const std::string& y) {
  return cosine_similarity(name_hasher().embed(x), name_hasher().embed(y));
}

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

LineString random_line(std::mt19937_64& rng, double r) {
  const int m = uniform_int(rng, 2, 25);
  LineString line;
  const double heading = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const Coordinate dir(std::cos(heading), std::sin(heading));
  const Coordinate perp(-dir.y(), dir.x());
  double wiggle = 0.0;
  for (int i = 0; i < m; ++i) {
    const double t = -r + 2.0 * r * static_cast<double>(i) / static_cast<double>(m - 1);
    if (i > 0) wiggle += normal(rng, 0.15 * r / std::sqrt(static_cast<double>(m)));
    line.vertices.push_back(t * dir + wiggle * perp);
  }
  return line;
}

Geometry random_shape(std::mt19937_64& rng, Shape shape, double r) {
  switch (shape) {
    case Shape::Point:
      return Point{Coordinate(0.0, 0.0)};
    case Shape::Line:
      return random_line(rng, r);
    case Shape::Polygon: {
      Polygon p{synth::star_ring(rng, uniform_int(rng, 4, 40), 0.6 * r, r), {}};
      if (uniform(rng, 0.0, 1.0) < 0.25) p.holes.push_back(synth::regular_ring(6, 0.2 * r, 0.0));
      return p;
    }
    case Shape::MultiPolygon: {
      MultiPolygon mp;
      const int parts = uniform_int(rng, 2, 3);
      for (int i = 0; i < parts; ++i) {
        const double ang = 2.0 * std::numbers::pi * i / parts;
        const Coordinate off = 0.7 * r * Coordinate(std::cos(ang), std::sin(ang));
        Ring ring = synth::star_ring(rng, uniform_int(rng, 4, 20), 0.2 * r, 0.33 * r);
        for (auto& c : ring) c += off;
        mp.polygons.push_back({std::move(ring), {}});
      }
      return mp;
    }
    case Shape::MultiLine: {
      MultiLineString ml;
      for (double y : {-0.5 * r, 0.5 * r}) {
        LineString l = random_line(rng, r);
        for (auto& c : l.vertices) c.y() += y;
        ml.lines.push_back(std::move(l));
      }
      return ml;
    }
  }
  return Point{};
}

Shape random_kind(std::mt19937_64& rng) {
  static constexpr std::array kinds{Shape::Point, Shape::Point, Shape::Line, Shape::Polygon,
                                    Shape::Polygon, Shape::MultiPolygon, Shape::MultiLine};
  return pick(rng, kinds);
}

Geometry jitter(std::mt19937_64& rng, const Geometry& g, double scale, double angle, double noise) {
  const double c = std::cos(angle), s = std::sin(angle);
  return transform(g, [&](const Coordinate& p) {
    const Coordinate q(c * p.x() - s * p.y(), s * p.x() + c * p.y());
    return Coordinate(scale * q + Coordinate(normal(rng, noise), normal(rng, noise)));
  });
}

/// A geometry that touches, crosses or lies inside `a` (metres, origin-centred).
Geometry near_geometry(std::mt19937_64& rng, const Geometry& a, Shape a_kind, double r) {
  if (a_kind == Shape::Point) {
    if (uniform(rng, 0.0, 1.0) < 0.7) {
      return Point{Coordinate(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5))};
    }
    return Polygon{synth::star_ring(rng, uniform_int(rng, 4, 12), 6.0, 15.0), {}};
  }
  if (uniform(rng, 0.0, 1.0) < 0.4) {
    const auto verts = all_vertices(a);
    if (a_kind == Shape::Line || a_kind == Shape::MultiLine) return Point{pick(rng, verts)};
    if (a_kind == Shape::MultiPolygon) {
      const auto& mp = std::get<MultiPolygon>(a);
      Coordinate c = Coordinate::Zero();
      for (const auto& v : mp.polygons[0].outer) c += v;
      return Point{c / static_cast<double>(mp.polygons[0].outer.size())};
    }
    return Point{Coordinate(normal(rng, 0.05 * r), normal(rng, 0.05 * r))};
  }
  return jitter(rng, a, uniform(rng, 0.9, 1.1), uniform(rng, -0.1, 0.1), 0.02 * r);
}

/// A geometry well away from the origin-centred `a` of size r.
Geometry far_geometry(std::mt19937_64& rng, double r, bool points_only, double min_gap, double max_gap) {
  const Shape kind = points_only ? Shape::Point : random_kind(rng);
  const double rb = log_uniform(rng, 20.0, 400.0);
  const Geometry b = random_shape(rng, kind, rb);
  const double reach = (kind == Shape::Point ? 1.0 : rb) + std::max(r, 1.0);
  const double dist = reach + uniform(rng, min_gap, max_gap) * reach;
  const double ang = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  return translate(b, dist * Coordinate(std::cos(ang), std::sin(ang)));
}

EntityRecord make_entity(std::mt19937_64& rng, std::string id, std::string name, Geometry g) {
  EntityRecord e;
  e.id = std::move(id);
  e.attrs.emplace_back("name", std::move(name));
  e.attrs.emplace_back("type", pick(rng, kTypes));
  e.attrs.emplace_back("address", uniform(rng, 0.0, 1.0) < 0.3
                                      ? ""
                                      : std::to_string(uniform_int(rng, 1, 400)) + " " + pick(rng, kStems) + " " +
                                            (uniform(rng, 0.0, 1.0) < 0.5 ? "Street" : "Road"));
  e.geometry = std::move(g);
  return e;
}

enum class Intent { Match, FarSimilarName, NearOtherName, Unrelated };

/// True when the pair sits clear of both rule thresholds.
bool clear_of_boundary(double d, double cos) {
  const bool d_band = d >= 0.05 && d <= 0.2;
  const bool c_band = cos >= 0.45 && cos <= 0.75;
  return !((d_band && cos > 0.45) || (c_band && d < 0.2));
}

std::optional<LabeledPair> rule_pair(std::mt19937_64& rng, Intent intent, std::size_t index, const SynthOptions& opt) {
  const bool points_only = opt.variant == SynthVariant::PointsOnly;
  const Shape kind = points_only ? Shape::Point : random_kind(rng);
  const double r = kind == Shape::Point ? 1.0 : log_uniform(rng, 20.0, 400.0);
  const Geometry a = random_shape(rng, kind, r);
  const std::string name_a = random_name(rng);

  Geometry b;
  std::string name_b;
  switch (intent) {
    case Intent::Match:
      b = points_only ? Geometry(Point{Coordinate(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5))})
                      : near_geometry(rng, a, kind, r);
      name_b = name_variant(rng, name_a);
      break;
    case Intent::FarSimilarName:
      b = far_geometry(rng, r, points_only, 1.0, 6.0);
      name_b = uniform(rng, 0.0, 1.0) < 0.3 ? name_a : name_variant(rng, name_a);
      break;
    case Intent::NearOtherName:
      b = points_only ? Geometry(Point{Coordinate(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5))})
                      : near_geometry(rng, a, kind, r);
      name_b = random_name(rng);
      break;
    case Intent::Unrelated:
      b = far_geometry(rng, r, points_only, 2.0, 40.0);
      name_b = random_name(rng);
      break;
  }

  const double lon0 = uniform(rng, 166.5, 178.0);
  const double lat0 = uniform(rng, -46.5, -34.5);
  LabeledPair pair;
  const std::string id = "e" + std::to_string(index);
  pair.a = make_entity(rng, id + "a", name_a, synth::to_lonlat(a, lon0, lat0));
  pair.b = make_entity(rng, id + "b", name_b, synth::to_lonlat(b, lon0, lat0));
  if (uniform(rng, 0.0, 1.0) < 0.5) pair.b.attrs[1].second = pair.a.attrs[1].second;

  const double d = process_pair(pair.a.geometry, pair.b.geometry, opt.P).min_dist_norm;
  const double cos = name_cosine(pair);
  if (!clear_of_boundary(d, cos)) return std::nullopt;
  pair.label = (d < kMatchMaxDistance && cos > kMatchMinCosine) ? 1 : 0;
  if ((pair.label == 1) != (intent == Intent::Match)) return std::nullopt;
  return pair;
}

LabeledPair geometry_only_pair(std::mt19937_64& rng, bool positive, std::size_t index) {
  const double r = log_uniform(rng, 20.0, 400.0);
  const Polygon a{synth::star_ring(rng, uniform_int(rng, 5, 40), 0.6 * r, r), {}};
  Geometry b;
  if (positive) {
    b = jitter(rng, a, uniform(rng, 0.97, 1.03), uniform(rng, -0.05, 0.05), 0.01 * r);
  } else if (uniform(rng, 0.0, 1.0) < 0.5) {
    b = jitter(rng, a, uniform(rng, 0.25, 0.6), uniform(rng, -0.05, 0.05), 0.01 * r);
  } else {
    const double ang = uniform(rng, 0.0, std::numbers::pi);
    const Coordinate dir(std::cos(ang), std::sin(ang));
    const double half = 1.2 * r * uniform(rng, 0.9, 1.1);
    LineString line;
    const int m = uniform_int(rng, 2, 6);
    for (int i = 0; i < m; ++i) {
      const double t = -half + 2.0 * half * static_cast<double>(i) / static_cast<double>(m - 1);
      line.vertices.push_back(t * dir + Coordinate(normal(rng, 0.01 * r), normal(rng, 0.01 * r)));
    }
    b = line;
  }
  const double lon0 = uniform(rng, 166.5, 178.0);
  const double lat0 = uniform(rng, -46.5, -34.5);
  LabeledPair pair;
  const std::string id = "g" + std::to_string(index);
  pair.a = make_entity(rng, id + "a", random_name(rng), synth::to_lonlat(Geometry(a), lon0, lat0));
  pair.b = make_entity(rng, id + "b", random_name(rng), synth::to_lonlat(b, lon0, lat0));
  pair.label = positive ? 1 : 0;
  return pair;
}

}  // namespace

double name_cosine(const LabeledPair& pair) { return text_cosine(pair.a.value_of("name"), pair.b.value_of("name")); }

std::vector<LabeledPair> synth_er_pairs(const SynthOptions& opt) {
  if (opt.n < 100) throw InvalidParameter("synthetic datasets need n >= 100");
  if (opt.neg_ratio <= 0.0) throw InvalidParameter("neg_ratio must be positive");
  std::mt19937_64 rng(opt.seed);
  const auto n_pos = static_cast<std::size_t>(std::llround(static_cast<double>(opt.n) / (1.0 + opt.neg_ratio)));
  std::vector<LabeledPair> out;
  out.reserve(opt.n);
  for (std::size_t i = 0; i < opt.n; ++i) {
    const bool positive = i < n_pos;
    if (opt.variant == SynthVariant::GeometryOnly) {
      out.push_back(geometry_only_pair(rng, positive, i));
      continue;
    }
    Intent intent = Intent::Match;
    if (!positive) {
      static constexpr std::array negatives{Intent::FarSimilarName, Intent::NearOtherName, Intent::Unrelated};
      intent = negatives[i % negatives.size()];
    }
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000) throw SamplingError("could not generate a pair clear of the rule thresholds");
      if (auto p = rule_pair(rng, intent, i, opt)) {
        out.push_back(std::move(*p));
        break;
      }
    }
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

Splits stratified_split(std::vector<LabeledPair> pairs, std::uint64_t seed, int n_classes) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  Splits s;
  for (int c = 0; c < n_classes; ++c) {
    std::vector<LabeledPair*> members;
    for (auto& p : pairs) {
      if (p.label == c) members.push_back(&p);
    }
    std::shuffle(members.begin(), members.end(), rng);
    const std::size_t n = members.size();
    const std::size_t n_train = (n * 6 + 5) / 10;
    const std::size_t n_valid = (n * 2 + 5) / 10;
    for (std::size_t i = 0; i < n; ++i) {
      auto& dst = i < n_train ? s.train : (i < n_train + n_valid ? s.valid : s.test);
      dst.push_back(std::move(*members[i]));
    }
  }
  for (auto* split : {&s.train, &s.valid, &s.test}) std::shuffle(split->begin(), split->end(), rng);
  return s;
}

Splits synth_er_dataset(const SynthOptions& opt) { return stratified_split(synth_er_pairs(opt), opt.seed); }

SynthVariant parse_synth_variant(const std::string& s) {
  if (s == "standard") return SynthVariant::Standard;
  if (s == "geometry_only") return SynthVariant::GeometryOnly;
  if (s == "points_only") return SynthVariant::PointsOnly;
  throw ConfigError("synthetic variant must be standard, geometry_only or points_only, got '" + s + "'");
}

std::string to_string(SynthVariant v) {
  switch (v) {
    case SynthVariant::Standard: return "standard";
    case SynthVariant::GeometryOnly: return "geometry_only";
    case SynthVariant::PointsOnly: return "points_only";
  }
  return "standard";
}

namespace synth {

Ring star_ring(std::mt19937_64& rng, int n, double r_min, double r_max) {
  std::vector<double> angles(static_cast<std::size_t>(n));
  for (auto& a : angles) a = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  std::sort(angles.begin(), angles.end());
  // Keep every angular gap below pi so the origin stays inside the ring.
  for (int i = 0; i < n; ++i) {
    auto& a = angles[static_cast<std::size_t>(i)];
    a = 0.3 * a + 0.7 * 2.0 * std::numbers::pi * i / n;
  }
  Ring ring;
  for (double a : angles) {
    const double r = uniform(rng, r_min, r_max);
    ring.emplace_back(r * std::cos(a), r * std::sin(a));
  }
  return ring;
}

Ring regular_ring(int n, double r, double angle) {
  Ring ring;
  for (int i = 0; i < n; ++i) {
    const double a = angle + 2.0 * std::numbers::pi * i / n;
    ring.emplace_back(r * std::cos(a), r * std::sin(a));
  }
  return ring;
}

Geometry to_lonlat(const Geometry& metres, double lon0, double lat0) {
  const LocalProjection proj(lon0, lat0);
  return transform(metres, [&](const Coordinate& p) { return proj.inverse(p); });
}

}  // namespace synth

}  // namespace omni

#include "omni/dataset.hpp"

#include "omni/error.hpp"
#include "omni/kdelta.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace omni {
namespace {

using Json = nlohmann::ordered_json;

std::vector<std::pair<std::string, std::string>> read_attrs(const Json& obj, const char* field) {
  if (!obj.contains(field) || !obj[field].is_object()) {
    throw ConfigError(std::string("'") + field + "' must be an object");
  }
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [key, value] : obj[field].items()) {
    if (value.is_string()) out.emplace_back(key, value.get<std::string>());
    else if (value.is_null()) out.emplace_back(key, "");
    else out.emplace_back(key, value.dump());
  }
  return out;
}

std::string read_string(const Json& obj, const char* field) {
  if (!obj.contains(field) || !obj[field].is_string()) {
    throw ConfigError(std::string("'") + field + "' must be a string");
  }
  return obj[field].get<std::string>();
}

Geometry read_geometry(const Json& obj, const char* field) {
  if (!obj.contains(field)) throw ConfigError(std::string("missing '") + field + "'");
  const Json& g = obj[field];
  if (g.is_object()) return parse_geometry(g.dump());
  if (!g.is_string() || g.get<std::string>().empty()) {
    throw ConfigError(std::string("'") + field + "' must be a non-empty geometry");
  }
  return parse_geometry(g.get<std::string>());
}

int read_label(const Json& obj, int n_classes) {
  if (!obj.contains("label")) throw ConfigError("missing 'label'");
  const Json& l = obj["label"];
  if (l.is_boolean()) return parse_label(l.get<bool>() ? "true" : "false", n_classes);
  if (l.is_number_integer()) return parse_label(std::to_string(l.get<long>()), n_classes);
  if (l.is_string()) return parse_label(l.get<std::string>(), n_classes);
  throw ConfigError("'label' must be a string, integer or boolean");
}

}  // namespace

const std::vector<std::string>& class_names(int n_classes) {
  static const std::vector<std::string> binary{"non_match", "match"};
  static const std::vector<std::string> multi{"same_as", "part_of", "serves", "unknown"};
  if (n_classes == 2) return binary;
  if (n_classes == 4) return multi;
  throw ConfigError("classes must be 2 or 4");
}

int fallback_class(int n_classes) { return n_classes == 2 ? 0 : 3; }

int parse_label(const std::string& text, int n_classes) {
  const auto& names = class_names(n_classes);
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (text == names[i]) return static_cast<int>(i);
  }
  if (n_classes == 2) {
    if (text == "0" || text == "false") return 0;
    if (text == "1" || text == "true") return 1;
  }
  throw ConfigError("label '" + text + "' is not one of the " + std::to_string(n_classes) + " classes");
}

std::vector<LabeledPair> parse_dataset(const std::string& text, int n_classes) {
  std::vector<LabeledPair> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const Json obj = Json::parse(line);
      if (!obj.is_object()) throw ConfigError("expected a JSON object");
      LabeledPair p;
      p.a.id = read_string(obj, "id_a");
      p.b.id = read_string(obj, "id_b");
      p.a.attrs = read_attrs(obj, "attrs_a");
      p.b.attrs = read_attrs(obj, "attrs_b");
      p.a.geometry = read_geometry(obj, "geom_a");
      p.b.geometry = read_geometry(obj, "geom_b");
      p.label = read_label(obj, n_classes);
      out.push_back(std::move(p));
    } catch (const Json::exception& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<LabeledPair> load_dataset(const std::filesystem::path& path, int n_classes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_dataset(buf.str(), n_classes);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string dataset_line(const LabeledPair& pair, int n_classes) {
  Json obj;
  obj["id_a"] = pair.a.id;
  obj["id_b"] = pair.b.id;
  obj["attrs_a"] = Json::object();
  for (const auto& [k, v] : pair.a.attrs) obj["attrs_a"][k] = v;
  obj["attrs_b"] = Json::object();
  for (const auto& [k, v] : pair.b.attrs) obj["attrs_b"][k] = v;
  obj["geom_a"] = to_wkt(pair.a.geometry);
  obj["geom_b"] = to_wkt(pair.b.geometry);
  obj["label"] = class_names(n_classes).at(static_cast<std::size_t>(pair.label));
  return obj.dump();
}

void save_dataset(const std::filesystem::path& path, const std::vector<LabeledPair>& pairs, int n_classes) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& p : pairs) out << dataset_line(p, n_classes) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------

Eigen::VectorXd affinity_default(const TextEncoding& enc, std::size_t h) {
  if (h >= enc.val_a.size() || h >= enc.val_b.size()) throw InvalidParameter("attribute index out of range");
  const Eigen::VectorXd& a = enc.val_a[h];
  const Eigen::VectorXd& b = enc.val_b[h];
  if (a.size() != b.size()) throw ShapeError("affinity vectors differ in dimension");
  Eigen::VectorXd out(3 * a.size());
  out << a, b, a.cwiseProduct(b);
  return out;
}

double affinity_cosine(const TextEncoding& enc, std::size_t h) {
  if (h >= enc.pooled_a.size() || h >= enc.pooled_b.size()) throw InvalidParameter("attribute index out of range");
  return cosine_similarity(enc.pooled_a[h], enc.pooled_b[h]);
}

Eigen::Index affinity_dim(Eigen::Index d, std::size_t attributes, AffinityVariant variant) {
  const auto h = static_cast<Eigen::Index>(attributes);
  return variant == AffinityVariant::Default ? 3 * d * h : h;
}

Eigen::VectorXd affinity_features(const TextEncoding& enc, AffinityVariant variant) {
  const std::size_t H = enc.attribute_count();
  Eigen::VectorXd out(affinity_dim(enc.dim(), H, variant));
  Eigen::Index at = 0;
  for (std::size_t h = 0; h < H; ++h) {
    if (variant == AffinityVariant::Default) {
      const Eigen::VectorXd f = affinity_default(enc, h);
      out.segment(at, f.size()) = f;
      at += f.size();
    } else {
      out(at++) = affinity_cosine(enc, h);
    }
  }
  return out;
}

Eigen::VectorXd language_output(const TextEncoding& enc, AffinityVariant variant) {
  const Eigen::VectorXd aff = affinity_features(enc, variant);
  Eigen::VectorXd out(enc.summary.size() + aff.size());
  out << enc.summary, aff;
  return out;
}

Eigen::MatrixXd encode_geometry(const ProcessedGeometry& g, int k) {
  return pad_sequence(kdelta_encode(g, k), g.cls, 1).rows.transpose();
}

PairFeatures make_features(const LabeledPair& pair, const TextEncoder& encoder, const OmniConfig& cfg) {
  PairFeatures f;
  f.pair_id = pair.pair_id();
  f.label = pair.label;
  const TextEncoding enc = encoder.encode(pair.a, pair.b, f.pair_id);
  if (!enc.summary.allFinite()) throw NumericError("non-finite text encoding for " + f.pair_id);
  f.summary = enc.summary;
  f.affinity = affinity_features(enc, cfg.affinity);
  const GeometryPair g = process_pair(pair.a.geometry, pair.b.geometry, cfg.P);
  f.min_dist = g.min_dist_norm;
  if (f.min_dist < 0.0 || f.min_dist > kMaxNormDist) {
    spdlog::warn("normalized distance {} for {} clamped to [0, {}]", f.min_dist, f.pair_id, kMaxNormDist);
    f.min_dist = std::clamp(f.min_dist, 0.0, kMaxNormDist);
  }
  f.centroid_km = g.centroid_haversine_km;
  f.seq_a = encode_geometry(g.a, cfg.k);
  f.seq_b = encode_geometry(g.b, cfg.k);
  return f;
}

std::vector<PairFeatures> make_features(const std::vector<LabeledPair>& pairs, const TextEncoder& encoder,
                                        const OmniConfig& cfg) {
  if (encoder.attribute_count() != cfg.affinity_attrs.size()) {
    throw ConfigError("text encoder has " + std::to_string(encoder.attribute_count()) +
                      " affinity attributes but the configuration names " +
                      std::to_string(cfg.affinity_attrs.size()));
  }
  std::vector<PairFeatures> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(make_features(p, encoder, cfg));
  return out;
}

}  // namespace omni
